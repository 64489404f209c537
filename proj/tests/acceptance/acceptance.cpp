// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ncsmpc/analysis.hpp"
#include "ncsmpc/bounds.hpp"
#include "ncsmpc/cstr.hpp"
#include "ncsmpc/errors.hpp"
#include "ncsmpc/mpc.hpp"
#include "ncsmpc/network.hpp"

using namespace ncsmpc;

namespace {

struct Outcome
{
  bool pass;
  std::string detail;
};

std::string fmt(const char * f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const Vector kStart{{0.35, 370.0}};
constexpr double kDuration = 1.5;

OcpSpec cstr_spec()
{
  OcpSpec s;
  s.prediction_horizon = 0.3;
  s.control_sampling = 0.01;
  s.stage_cost = make_cstr_stage_cost();
  return s;
}

struct CstrRun
{
  RunRecords run;
  PerformanceReport report;
};

CstrRun fixed_run(double delta)
{
  const std::size_t n = static_cast<std::size_t>(std::ceil(kDuration / delta - 1e-9));
  CstrRun r;
  r.run = mpc_closed_loop(make_cstr_model(), cstr_spec(), kStart, std::vector<double>(n, delta), kDuration);
  r.report = trajectory_alpha(r.run, cstr_alpha_truncation);
  return r;
}

// Shared between criteria 7-10.
const CstrRun & fixed_run_cached(double delta)
{
  static std::vector<std::pair<double, CstrRun>> cache;
  for (const auto & [d, r] : cache) {
    if (d == delta) { return r; }
  }
  cache.emplace_back(delta, fixed_run(delta));
  return cache.back().second;
}

bool near_target(const Vector & x)
{
  return std::abs(x[0] - 0.5) <= 0.05 && std::abs(x[1] - 350.0) <= 5.0;
}

// 1
Outcome unit_overshoot_closed_form()
{
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double mu = 0.1 + 0.5 * i;
    for (int j = 0; j < 10; ++j) {
      const double T = 0.1 + 0.5 * j;
      for (int k = 0; k < 10; ++k) {
        const double d = (0.05 + 0.1 * k) * T;
        worst = std::max(worst, std::abs(alpha_continuous({1.0, mu}, {T, d}) - (1.0 - std::exp(-mu * T))));
      }
    }
  }
  return {worst <= 1e-12, fmt("max |alpha - (1 - exp(-mu T))| = %.3g over 1000 points", worst)};
}

// 2
Outcome symmetry()
{
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> C(1.0, 10.0), mu(0.01, 10.0), T(0.01, 10.0), frac(0.0, 1.0);
  double worst = 0.0;
  int n = 0;
  while (n < 10000) {
    const double c = C(rng), m = mu(rng), t = T(rng), d = frac(rng) * t;
    if (!(d > 0.0 && d < t)) { continue; }
    ++n;
    worst = std::max(worst, std::abs(alpha_continuous({c, m}, {t, d}) - alpha_continuous({c, m}, {t, t - d})));
  }
  return {worst <= 1e-12, fmt("max |alpha(T,d) - alpha(T,T-d)| = %.3g over 10^4 tuples", worst)};
}

// 3
Outcome monotonicity()
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> C(1.0, 10.0), mu(0.01, 10.0), T(0.01, 10.0);
  double worst_drop = 0.0;
  for (int i = 0; i < 100; ++i) {
    const ControllabilityParams p{C(rng), mu(rng)};
    const double t = T(rng);
    double prev = -std::numeric_limits<double>::infinity();
    for (int j = 1; j <= 200; ++j) {
      const double a = alpha_continuous(p, {t, 0.5 * t * j / 200.0});
      worst_drop = std::max(worst_drop, prev - a);
      prev = a;
    }
  }
  return {worst_drop <= 1e-12, fmt("largest decrease along delta = %.3g", worst_drop)};
}

// 4
Outcome refinement()
{
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> C(1.0, 2.5), mu(0.5, 2.5), T(0.5, 2.0);
  std::uniform_int_distribution<int> N(4, 20);
  double worst_gap = 0.0;
  double worst_k_drop = 0.0;
  double worst_m_drop = 0.0;
  for (int i = 0; i < 20; ++i) {
    const ControllabilityParams p{C(rng), mu(rng)};
    const int n = N(rng);
    const double tau = T(rng) / n;
    const int m = std::uniform_int_distribution<int>(1, n / 2)(rng);

    double prev = -std::numeric_limits<double>::infinity();
    double last = 0.0;
    for (int k = 0; k <= 12; ++k) {
      last = alpha_discrete(p, {tau, n, m, k});
      worst_k_drop = std::max(worst_k_drop, prev - last);
      prev = last;
    }
    worst_gap = std::max(worst_gap, std::abs(last - alpha_continuous(p, {n * tau, m * tau})));

    for (int k : {0, 4, 8}) {
      double prev_m = -std::numeric_limits<double>::infinity();
      for (int mm = 1; mm <= n / 2; ++mm) {
        const double a = alpha_discrete(p, {tau, n, mm, k});
        worst_m_drop = std::max(worst_m_drop, prev_m - a);
        prev_m = a;
      }
    }
  }
  const bool ok = worst_k_drop <= 1e-12 && worst_m_drop <= 1e-12 && worst_gap <= 1e-3;
  return {ok, fmt("max |alpha_12 - alpha| = %.3g, largest decrease in k = %.3g, in m = %.3g",
                  worst_gap, worst_k_drop, worst_m_drop)};
}

// 5
Outcome bound_sandwich()
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> C(1.0, 10.0), mu(0.01, 10.0), T(0.01, 10.0), frac(0.01, 0.99);
  double worst_low = -std::numeric_limits<double>::infinity();
  double worst_up = -std::numeric_limits<double>::infinity();
  int defined = 0;
  for (int i = 0; i < 10000; ++i) {
    const ControllabilityParams p{C(rng), mu(rng)};
    const double t = T(rng);
    const HorizonPair h{t, frac(rng) * t};
    const double a = alpha_continuous(p, h);
    worst_up = std::max(worst_up, a - overshoot_upper_bound(p, t));
    try {
      worst_low = std::max(worst_low, decay_rate_lower_bound(p, h) - a);
      ++defined;
    } catch (const UndefinedBound &) {
    }
  }
  const bool ok = worst_low <= 1e-12 && worst_up <= 1e-12;
  return {ok, fmt("max(lower - alpha) = %.3g on %d points, max(alpha - upper) = %.3g", worst_low,
                  defined, worst_up)};
}

// 6
Outcome cstr_equilibrium()
{
  const double r = equilibrium_residual(make_cstr_model());
  return {r <= 0.05, fmt("|f(x*, u*)| = %.6g", r)};
}

// 7
Outcome cstr_reproduction()
{
  const CstrRun & r = fixed_run_cached(0.1);
  const double a = r.report.global_alpha;
  return {a >= 0.23 && a <= 0.45, fmt("global alpha (T=0.3, delta=0.1) = %.6f, window [0.23, 0.45]", a)};
}

// 8
Outcome varying_horizons()
{
  const double reference = fixed_run_cached(0.1).report.global_alpha;
  const PlantModel model = make_cstr_model();
  double worst = std::numeric_limits<double>::infinity();
  int failures = 0;
  int off_target = 0;
  for (std::uint64_t seed = 7; seed < 27; ++seed) {
    const auto schedule = random_horizon_schedule(0.1, 0.3, 0.01, kDuration, seed);
    const RunRecords run = mpc_closed_loop(model, cstr_spec(), kStart, schedule, kDuration);
    const double a = trajectory_alpha(run, cstr_alpha_truncation).global_alpha;
    worst = std::min(worst, a);
    if (a < reference - 0.05) { ++failures; }
    if (!near_target(run.final_state)) { ++off_target; }
  }
  return {failures == 0 && off_target == 0,
          fmt("20 runs: min global alpha = %.6f vs fixed-0.1 %.6f - 0.05; below: %d, not converged: %d",
              worst, reference, failures, off_target)};
}

// 9
Outcome short_horizon_violation()
{
  const CstrRun r = fixed_run(0.01);
  const double reference = fixed_run_cached(0.1).report.global_alpha;
  const auto & la = r.report.local_alphas;
  const std::size_t negative = static_cast<std::size_t>(std::count_if(la.begin(), la.end(), [](double a) { return a < 0.0; }));
  const bool ok = negative > 0 || r.report.global_alpha < 0.5 * reference;
  return {ok, fmt("delta=0.01: %zu of %zu local alphas negative, global alpha = %.4f", negative,
                  la.size(), r.report.global_alpha)};
}

// 10
Outcome cost_flatness()
{
  std::vector<double> costs;
  for (double d : {0.1, 0.2, 0.3}) { costs.push_back(fixed_run_cached(d).report.closed_loop_cost); }
  const auto [lo, hi] = std::minmax_element(costs.begin(), costs.end());
  const double spread = (*hi - *lo) / *lo;
  return {spread <= 0.10, fmt("costs %.2f, %.2f, %.2f; relative spread %.4f", costs[0], costs[1],
                              costs[2], spread)};
}

NetworkConfig in_bounds_config(std::uint64_t seed)
{
  NetworkConfig cfg;
  cfg.delay_sc = {0.001, 0.01};
  cfg.delay_c = {0.0, 0.03};
  cfg.delay_ca = {0.0, 0.02};
  cfg.tau_c_max = 0.03;
  cfg.tau_ca_max = 0.02;
  cfg.dropout_probability = 0.05;
  cfg.controller_sampling = 0.1;
  cfg.transmitted_length = 0.3;
  cfg.rng_seed = seed;
  return cfg;
}

bool dropout_rule_respected(const NcsTrace & tr, std::size_t & exceeded)
{
  const NetworkConfig & cfg = tr.config;
  for (const auto & p : tr.packets) {
    const bool over = p.tau_c + p.tau_ca > cfg.tau_c_max + cfg.tau_ca_max;
    if (over != p.exceeded_bound) { return false; }
    const bool lost = p.delivery == Delivery::lost;
    if (lost != (over || p.random_drop)) { return false; }
    if (cfg.dropout_probability == 0.0 && p.random_drop) { return false; }
    exceeded += over ? 1 : 0;
  }
  return true;
}

// 11
Outcome prediction_consistency()
{
  const PlantModel model = make_cstr_model();
  const OcpSpec spec = cstr_spec();
  int inconsistent = 0;
  int rule_broken = 0;
  std::size_t exceeded_inside = 0;
  std::size_t activations = 0;
  double max_err = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const NcsTrace tr = run_ncs_simulation(model, spec, in_bounds_config(seed), kStart, kDuration);
    const ConsistencyReport rep = prediction_consistency_check(tr);
    if (!rep.passed) { ++inconsistent; }
    activations += rep.activations_checked;
    max_err = std::max(max_err, rep.max_prediction_error);
    if (!dropout_rule_respected(tr, exceeded_inside)) { ++rule_broken; }
  }

  // Computation delays past their bound, no random loss: only the rule drops packets.
  std::size_t exceeded = 0;
  std::size_t lost = 0;
  for (std::uint64_t seed = 101; seed <= 105; ++seed) {
    NetworkConfig cfg = in_bounds_config(seed);
    cfg.delay_c = {0.0, 0.045};
    cfg.dropout_probability = 0.0;
    const NcsTrace tr = run_ncs_simulation(model, spec, cfg, kStart, kDuration);
    if (!prediction_consistency_check(tr).passed) { ++inconsistent; }
    if (!dropout_rule_respected(tr, exceeded)) { ++rule_broken; }
    for (const auto & p : tr.packets) { lost += p.delivery == Delivery::lost ? 1 : 0; }
  }

  // Adversarial: every control packet is late, the startup segment runs out at 0.1.
  NetworkConfig adv;
  adv.delay_ca = {0.05, 0.06};
  adv.tau_ca_max = 0.02;
  adv.controller_sampling = 0.1;
  adv.transmitted_length = 0.1;
  const NcsTrace bad = run_ncs_simulation(model, spec, adv, kStart, 0.5, NcsRunOptions{false});
  const ConsistencyReport bad_rep = prediction_consistency_check(bad);
  const bool starvation_caught = !bad_rep.passed && bad_rep.violation_time.has_value();

  const bool ok = inconsistent == 0 && rule_broken == 0 && exceeded_inside == 0 && exceeded > 0 &&
                  lost == exceeded && starvation_caught;
  return {ok, fmt("55 runs, %zu activations, %d inconsistent, max prediction error %.2g; rule: %d "
                  "mismatches, %zu over-bound = %zu lost; adversarial run fails at t=%.2f",
                  activations, inconsistent, max_err, rule_broken, exceeded, lost,
                  bad_rep.violation_time.value_or(std::nan("")))};
}

// 12
Outcome nominal_equivalence()
{
  const PlantModel model = make_cstr_model();
  const OcpSpec spec = cstr_spec();
  NetworkConfig cfg;
  cfg.controller_sampling = 0.1;
  cfg.transmitted_length = 0.3;
  const NcsTrace tr = run_ncs_simulation(model, spec, cfg, kStart, kDuration);
  const CstrRun & direct = fixed_run_cached(0.1);
  const double tol = 10.0 * spec.integration_tolerance;

  double worst = 0.0;
  std::size_t compared = 0;
  bool aligned = tr.records.steps.size() == direct.run.steps.size();
  for (std::size_t i = 0; aligned && i < direct.run.steps.size(); ++i) {
    const StepRecord & a = direct.run.steps[i];
    const StepRecord & b = tr.records.steps[i];
    if (std::abs(a.time - b.time) > 1e-12) {
      aligned = false;
      break;
    }
    const Vector scale = a.state.cwiseAbs().array() + 1.0;
    worst = std::max(worst, ((a.state - b.state).cwiseAbs().array() / scale.array()).maxCoeff());
    ++compared;
  }
  const Vector fs = direct.run.final_state.cwiseAbs().array() + 1.0;
  worst = std::max(worst, ((direct.run.final_state - tr.trajectory.back()).cwiseAbs().array() / fs.array()).maxCoeff());
  return {aligned && worst <= tol,
          fmt("%zu step boundaries, max scaled state difference %.3g (limit %.0e)", compared, worst, tol)};
}

}  // namespace

int main()
{
  struct Criterion
  {
    const char * name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
    {"unit-overshoot closed form", unit_overshoot_closed_form},
    {"symmetry in the control horizon", symmetry},
    {"monotonicity in the control horizon", monotonicity},
    {"discrete refinement", refinement},
    {"bound sandwich", bound_sandwich},
    {"CSTR equilibrium residual", cstr_equilibrium},
    {"CSTR fixed-horizon alpha", cstr_reproduction},
    {"varying control horizons", varying_horizons},
    {"short-horizon Lyapunov violation", short_horizon_violation},
    {"closed-loop cost flatness", cost_flatness},
    {"prediction consistency", prediction_consistency},
    {"nominal networked equivalence", nominal_equivalence},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].fn();
    } catch (const std::exception & e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
