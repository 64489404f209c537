#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ncsmpc/analysis.hpp"
#include "ncsmpc/bounds.hpp"
#include "ncsmpc/cstr.hpp"
#include "ncsmpc/errors.hpp"
#include "ncsmpc/io.hpp"
#include "ncsmpc/log.hpp"
#include "ncsmpc/mpc.hpp"
#include "ncsmpc/network.hpp"

namespace ncsmpc::cli {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> split(const std::string & s, char sep)
{
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) { parts.push_back(item); }
  return parts;
}

double parse_double(const std::string & s, const std::string & what)
{
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != s.size()) { throw InvalidArgument(what + ": '" + s + "' is not a number"); }
  return v;
}

std::vector<double> parse_list(const std::string & s, const std::string & what)
{
  std::vector<double> out;
  for (const auto & p : split(s, ',')) { out.push_back(parse_double(p, what)); }
  if (out.empty()) { throw InvalidArgument(what + " is empty"); }
  return out;
}

Interval parse_range(const std::string & s, const std::string & what)
{
  const auto parts = split(s, ':');
  if (parts.size() != 2) { throw InvalidArgument(what + " must be lo:hi"); }
  return {parse_double(parts[0], what), parse_double(parts[1], what)};
}

struct Sweep
{
  double lo;
  double hi;
  std::size_t count;

  double at(std::size_t i) const
  {
    return count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
};

Sweep parse_sweep(const std::string & s, const std::string & what)
{
  const auto parts = split(s, ':');
  if (parts.size() != 3) { throw InvalidArgument(what + " must be lo:hi:n"); }
  const double n = parse_double(parts[2], what);
  if (n < 1 || n != std::floor(n)) { throw InvalidArgument(what + ": n must be a positive integer"); }
  return {parse_double(parts[0], what), parse_double(parts[1], what), static_cast<std::size_t>(n)};
}

std::string fixed6(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)> & fn)
{
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) { fn(i); }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) { fn(i); }
    });
  }
  for (auto & t : pool) { t.join(); }
}

void write_file(const fs::path & path, const std::function<void(std::ostream &)> & body)
{
  std::ofstream f(path);
  if (!f) { throw InvalidArgument("cannot write " + path.string()); }
  body(f);
}

std::string label_number(double v)
{
  std::string s = format_number(v);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

// ---------------------------------------------------------------- alpha

struct AlphaArgs
{
  double C{1.0};
  double mu{1.0};
  double T{1.0};
  std::optional<double> delta;
  std::string delta_sweep;
  std::optional<double> delta_min;
  bool bounds{false};
  std::string format{"csv"};
};

int cmd_alpha(const AlphaArgs & a, std::ostream & out)
{
  const ControllabilityParams p{a.C, a.mu};
  p.validate();
  if (a.delta_min) {
    out << fixed6(guaranteed_alpha_varying(p, a.T, *a.delta_min)) << '\n';
    return 0;
  }
  if (!a.delta_sweep.empty()) {
    const Sweep sw = parse_sweep(a.delta_sweep, "--delta-sweep");
    if (a.format == "json") { out << "["; }
    else {
      out << "delta,alpha";
      if (a.bounds) { out << ",lower_bound,upper_bound"; }
      out << '\n';
    }
    for (std::size_t i = 0; i < sw.count; ++i) {
      const double d = sw.at(i);
      const double alpha = alpha_continuous(p, {a.T, d});
      std::string lower = "nan";
      if (a.bounds) {
        try {
          lower = format_number(decay_rate_lower_bound(p, {a.T, d}));
        } catch (const UndefinedBound &) {
        }
      }
      if (a.format == "json") {
        out << (i ? "," : "") << "{\"delta\":" << format_number(d)
            << ",\"alpha\":" << format_number(alpha) << '}';
      } else {
        out << format_number(d) << ',' << format_number(alpha);
        if (a.bounds) { out << ',' << lower << ',' << format_number(overshoot_upper_bound(p, a.T)); }
        out << '\n';
      }
    }
    if (a.format == "json") { out << "]\n"; }
    return 0;
  }
  if (!a.delta) { throw InvalidArgument("one of --delta, --delta-sweep or --delta-min is required"); }
  out << fixed6(alpha_continuous(p, {a.T, *a.delta})) << '\n';
  return 0;
}

// ---------------------------------------------------------------- alpha-discrete

struct DiscreteArgs
{
  double C{1.0};
  double mu{1.0};
  double tau{0.1};
  int N{10};
  int m{1};
  int k{0};
  std::optional<int> k_max;
};

int cmd_alpha_discrete(const DiscreteArgs & a, std::ostream & out)
{
  const ControllabilityParams p{a.C, a.mu};
  if (a.k_max) {
    out << "k,alpha_k,alpha_continuous\n";
    const RefinementSpec base{a.tau, a.N, a.m, 0};
    const double limit = alpha_continuous(p, base.horizon());
    for (int k = 0; k <= *a.k_max; ++k) {
      out << k << ',' << format_number(alpha_discrete(p, {a.tau, a.N, a.m, k})) << ','
          << format_number(limit) << '\n';
    }
    return 0;
  }
  out << fixed6(alpha_discrete(p, {a.tau, a.N, a.m, a.k})) << '\n';
  return 0;
}

// ---------------------------------------------------------------- region

struct RegionArgs
{
  double T{1.0};
  double delta{0.5};
  std::string C_range{"1:4"};
  std::string sigma_range{"0.01:0.99"};
  std::size_t grid{50};
  std::string format{"csv"};
};

int cmd_region(const RegionArgs & a, std::ostream & out)
{
  const auto samples = stability_grid(a.T, a.delta, parse_range(a.C_range, "--C-range"),
                                      parse_range(a.sigma_range, "--sigma-range"), a.grid);
  if (a.format == "json") {
    out << '[';
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto & s = samples[i];
      out << (i ? "," : "") << "{\"C\":" << format_number(s.overshoot)
          << ",\"sigma\":" << format_number(s.sigma) << ",\"alpha\":" << format_number(s.alpha)
          << ",\"stable\":" << (s.stable ? "true" : "false") << '}';
    }
    out << "]\n";
    return 0;
  }
  out << "C,sigma,alpha,stable\n";
  for (const auto & s : samples) {
    out << format_number(s.overshoot) << ',' << format_number(s.sigma) << ','
        << format_number(s.alpha) << ',' << (s.stable ? 1 : 0) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- min-horizon

struct MinHorizonArgs
{
  double C{2.0};
  double mu{1.0};
  double delta_fraction{0.5};
  double target{0.0};
};

int cmd_min_horizon(const MinHorizonArgs & a, std::ostream & out)
{
  out << fixed6(minimal_prediction_horizon({a.C, a.mu}, a.delta_fraction, a.target)) << '\n';
  return 0;
}

// ---------------------------------------------------------------- cstr / ncs

struct ExperimentArgs
{
  double T{0.3};
  double sampling{0.01};
  double duration{1.5};
  std::string x0{"0.35,370"};
  std::optional<double> epsilon;
  std::string out_dir;
  std::string format{"csv"};
  unsigned threads{std::max(1u, std::thread::hardware_concurrency())};
  std::uint64_t seed{0};
  bool seed_given{false};
  std::size_t runs{1};
};

struct CstrArgs : ExperimentArgs
{
  std::string delta;
  std::string delta_random;
  std::string network;
};

struct NcsArgs : ExperimentArgs
{
  std::string config;
};

OcpSpec make_spec(const ExperimentArgs & a)
{
  OcpSpec spec;
  spec.prediction_horizon = a.T;
  spec.control_sampling = a.sampling;
  spec.stage_cost = make_cstr_stage_cost();
  spec.validate();
  return spec;
}

Vector parse_state(const std::string & s)
{
  const auto v = parse_list(s, "--x0");
  if (v.size() != 2) { throw InvalidArgument("--x0 needs two components"); }
  return Vector{{v[0], v[1]}};
}

struct RunOutcome
{
  std::string label;
  double delta_label{std::nan("")};
  std::uint64_t seed{0};
  std::optional<RunRecords> records;
  PerformanceReport report;
  std::optional<NcsTrace> trace;
  std::optional<ConsistencyReport> consistency;
  std::string error;
};

void emit_outputs(const RunOutcome & r, const fs::path & dir)
{
  if (dir.empty() || !r.records) { return; }
  fs::create_directories(dir);
  write_file(dir / (r.label + "_trajectory.csv"),
             [&](std::ostream & os) { write_trajectory_csv(os, r.records->trajectory); });
  write_file(dir / (r.label + "_steps.csv"),
             [&](std::ostream & os) { write_step_table_csv(os, *r.records, r.report); });
  write_file(dir / (r.label + "_report.json"),
             [&](std::ostream & os) { os << report_to_json(r.report) << '\n'; });
  write_file(dir / (r.label + "_records.json"),
             [&](std::ostream & os) { os << run_records_to_json(*r.records) << '\n'; });
  if (r.trace) {
    write_file(dir / (r.label + "_events.jsonl"),
               [&](std::ostream & os) { write_event_log_jsonl(os, *r.trace); });
  }
}

void print_summary(const std::vector<RunOutcome> & runs, const std::string & format,
                   std::ostream & out)
{
  const auto final_component = [](const RunOutcome & r, Eigen::Index i) {
    return r.records ? r.records->final_state[i] : std::nan("");
  };
  if (format == "json") {
    out << "[\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto & r = runs[i];
      out << "  {\"run\":\"" << r.label << "\",\"seed\":" << r.seed;
      if (!std::isnan(r.delta_label)) { out << ",\"delta\":" << format_number(r.delta_label); }
      if (r.error.empty()) {
        out << ",\"global_alpha\":" << format_number(r.report.global_alpha)
            << ",\"closed_loop_cost\":" << format_number(r.report.closed_loop_cost)
            << ",\"x1_final\":" << format_number(final_component(r, 0))
            << ",\"x2_final\":" << format_number(final_component(r, 1))
            << ",\"violations\":" << r.report.lyapunov_violations.size()
            << ",\"unconverged\":" << r.report.unconverged_values;
        if (r.consistency) {
          out << ",\"consistent\":" << (r.consistency->passed ? "true" : "false");
        }
      } else {
        out << ",\"error\":\"" << r.error << '"';
      }
      out << '}' << (i + 1 < runs.size() ? "," : "") << '\n';
    }
    out << "]\n";
    return;
  }
  const bool networked = std::any_of(runs.begin(), runs.end(),
                                     [](const RunOutcome & r) { return r.consistency.has_value(); });
  out << "run,seed,delta,global_alpha,closed_loop_cost,x1_final,x2_final,violations,unconverged";
  if (networked) { out << ",consistent"; }
  out << ",error\n";
  for (const auto & r : runs) {
    out << r.label << ',' << r.seed << ',' << format_number(r.delta_label) << ',';
    if (r.error.empty()) {
      out << format_number(r.report.global_alpha) << ',' << format_number(r.report.closed_loop_cost)
          << ',' << format_number(final_component(r, 0)) << ','
          << format_number(final_component(r, 1)) << ',' << r.report.lyapunov_violations.size()
          << ',' << r.report.unconverged_values;
    } else {
      out << "nan,nan,nan,nan,,";
    }
    if (networked) { out << ',' << (r.consistency && r.consistency->passed ? 1 : 0); }
    std::string e = r.error;
    std::replace(e.begin(), e.end(), ',', ';');
    std::replace(e.begin(), e.end(), '\n', ' ');
    out << ',' << e << '\n';
  }
}

int cmd_ncs(const NcsArgs & a, std::ostream & out)
{
  const PlantModel model = make_cstr_model();
  const OcpSpec spec = make_spec(a);
  const Vector x0 = parse_state(a.x0);
  NetworkConfig base;
  if (!a.config.empty()) {
    const ConfigMap cfg = load_config(a.config);
    base = network_config_from(cfg, base);
  }
  base.validate(spec);
  const std::uint64_t seed0 = a.seed_given ? a.seed : base.rng_seed;
  const double eps = a.epsilon.value_or(cstr_alpha_truncation);

  std::vector<RunOutcome> results(a.runs);
  parallel_for(a.runs, a.threads, [&](std::size_t i) {
    RunOutcome & r = results[i];
    r.seed = seed0 + i;
    r.label = "ncs_" + std::to_string(r.seed);
    try {
      NetworkConfig cfg = base;
      cfg.rng_seed = r.seed;
      NcsTrace trace = run_ncs_simulation(model, spec, cfg, x0, a.duration, {false});
      r.consistency = prediction_consistency_check(trace);
      if (trace.starvation_time) {
        r.error = "actuator starvation at t=" + format_number(*trace.starvation_time);
      }
      RunRecords rec = reevaluate_values(model, spec, trace.records);
      rec.trajectory = trace.trajectory;
      r.report = trajectory_alpha(rec, eps);
      r.records = std::move(rec);
      r.trace = std::move(trace);
    } catch (const std::exception & e) {
      r.error = e.what();
    }
  });
  for (const auto & r : results) {
    emit_outputs(r, a.out_dir);
    if (!r.error.empty()) { log::warn(r.label, ": ", r.error); }
  }
  print_summary(results, a.format, out);
  const bool ok = std::all_of(results.begin(), results.end(), [](const RunOutcome & r) {
    return r.error.empty() && r.consistency && r.consistency->passed;
  });
  return ok ? 0 : 1;
}

int cmd_cstr(const CstrArgs & a, std::ostream & out)
{
  if (!a.network.empty()) {
    NcsArgs n;
    static_cast<ExperimentArgs &>(n) = a;
    n.config = a.network;
    return cmd_ncs(n, out);
  }
  const PlantModel model = make_cstr_model();
  const OcpSpec spec = make_spec(a);
  const Vector x0 = parse_state(a.x0);
  const double eps = a.epsilon.value_or(cstr_alpha_truncation);

  struct Job
  {
    std::string label;
    double delta;
    std::uint64_t seed;
    std::vector<double> schedule;
  };
  std::vector<Job> jobs;
  const std::size_t max_steps = spec.steps_for(a.duration) + 1;
  if (!a.delta_random.empty()) {
    const Interval r = parse_range(a.delta_random, "--delta-random");
    for (std::size_t i = 0; i < a.runs; ++i) {
      const std::uint64_t s = a.seed + i;
      jobs.push_back({"random_" + std::to_string(s), std::nan(""), s,
                      random_horizon_schedule(r.lo, r.hi, a.sampling, a.duration, s)});
    }
  } else {
    for (double d : parse_list(a.delta.empty() ? "0.1" : a.delta, "--delta")) {
      jobs.push_back({"fixed_" + label_number(d), d, a.seed, std::vector<double>(max_steps, d)});
    }
  }

  std::vector<RunOutcome> results(jobs.size());
  parallel_for(jobs.size(), a.threads, [&](std::size_t i) {
    RunOutcome & r = results[i];
    r.label = jobs[i].label;
    r.delta_label = jobs[i].delta;
    r.seed = jobs[i].seed;
    try {
      RunRecords rec = mpc_closed_loop(model, spec, x0, jobs[i].schedule, a.duration);
      r.report = trajectory_alpha(rec, eps);
      r.records = std::move(rec);
    } catch (const std::exception & e) {
      r.error = e.what();
    }
  });
  for (const auto & r : results) {
    emit_outputs(r, a.out_dir);
    if (!r.error.empty()) { log::warn(r.label, ": ", r.error); }
  }
  print_summary(results, a.format, out);
  return std::all_of(results.begin(), results.end(),
                     [](const RunOutcome & r) { return r.error.empty(); })
    ? 0
    : 1;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs
{
  std::string records;
  double epsilon{1e-12};
  std::optional<double> alpha_bar;
  double slack{1e-5};
  std::string format{"json"};
};

int cmd_analyze(const AnalyzeArgs & a, std::ostream & out)
{
  std::ifstream in(a.records);
  if (!in) { throw InvalidArgument("cannot open " + a.records); }
  std::stringstream buf;
  buf << in.rdbuf();
  const RunRecords run = run_records_from_json(buf.str());
  PerformanceReport report = trajectory_alpha(run, a.epsilon);
  if (a.alpha_bar) {
    report.lyapunov_violations = lyapunov_check(run, *a.alpha_bar, a.slack, a.epsilon);
  }
  if (a.format == "csv") {
    write_step_table_csv(out, run, report);
  } else {
    out << report_to_json(report) << '\n';
  }
  return 0;
}

void add_experiment_options(CLI::App & sub, ExperimentArgs & a)
{
  sub.add_option("--T", a.T, "Prediction horizon")->capture_default_str();
  sub.add_option("--sampling", a.sampling, "Input sampling period")->capture_default_str();
  sub.add_option("--duration", a.duration, "Simulated time")->capture_default_str();
  sub.add_option("--x0", a.x0, "Initial state x1,x2")->capture_default_str();
  sub.add_option("--epsilon", a.epsilon, "Stage-integral truncation for alpha");
  sub.add_option("--out", a.out_dir, "Directory for per-run CSV/JSON files");
  sub.add_option("--format", a.format, "Summary format")
    ->check(CLI::IsMember({"csv", "json"}))
    ->capture_default_str();
  sub.add_option("--threads", a.threads, "Worker threads for batches");
  sub.add_option("--runs", a.runs, "Number of runs")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string> & tokens, std::ostream & out, std::ostream & err)
{
  CLI::App app{"Performance bounds and closed-loop experiments for MPC over networks", "ncsmpc"};
  app.require_subcommand(1);

  AlphaArgs alpha;
  auto * s_alpha = app.add_subcommand("alpha", "Performance index for continuous-time horizons");
  s_alpha->add_option("--C", alpha.C, "Overshoot constant (>= 1)")->required();
  s_alpha->add_option("--mu", alpha.mu, "Decay rate (> 0)")->required();
  s_alpha->add_option("--T", alpha.T, "Prediction horizon")->required();
  auto * o_delta = s_alpha->add_option("--delta", alpha.delta, "Control horizon");
  auto * o_sweep = s_alpha->add_option("--delta-sweep", alpha.delta_sweep, "lo:hi:n");
  auto * o_dmin =
    s_alpha->add_option("--delta-min", alpha.delta_min, "Guarantee for horizons in [d, T-d]");
  o_delta->excludes(o_sweep)->excludes(o_dmin);
  o_sweep->excludes(o_dmin);
  s_alpha->add_flag("--bounds", alpha.bounds, "Add lower/upper bound columns to a sweep");
  s_alpha->add_option("--format", alpha.format)->check(CLI::IsMember({"csv", "json"}));

  DiscreteArgs disc;
  auto * s_disc = app.add_subcommand("alpha-discrete", "Performance index on a refined grid");
  s_disc->add_option("--C", disc.C)->required();
  s_disc->add_option("--mu", disc.mu)->required();
  s_disc->add_option("--tau", disc.tau, "Base step")->required();
  s_disc->add_option("--N", disc.N, "Horizon steps")->required();
  s_disc->add_option("--m", disc.m, "Applied steps")->required();
  s_disc->add_option("--k", disc.k, "Refinement level")->capture_default_str();
  s_disc->add_option("--k-max", disc.k_max, "Tabulate levels 0..k_max");

  RegionArgs region;
  auto * s_region = app.add_subcommand("region", "Stability indicator over (C, sigma)");
  s_region->add_option("--T", region.T)->required();
  s_region->add_option("--delta", region.delta)->required();
  s_region->add_option("--C-range", region.C_range, "lo:hi")->capture_default_str();
  s_region->add_option("--sigma-range", region.sigma_range, "lo:hi")->capture_default_str();
  s_region->add_option("--grid", region.grid, "Points per axis")->capture_default_str();
  s_region->add_option("--format", region.format)->check(CLI::IsMember({"csv", "json"}));

  MinHorizonArgs mh;
  auto * s_mh = app.add_subcommand("min-horizon", "Smallest T reaching a target alpha");
  s_mh->add_option("--C", mh.C)->required();
  s_mh->add_option("--mu", mh.mu)->required();
  s_mh->add_option("--delta-fraction", mh.delta_fraction, "delta / T")->capture_default_str();
  s_mh->add_option("--target", mh.target, "Required alpha")->capture_default_str();

  CstrArgs cstr;
  auto * s_cstr = app.add_subcommand("cstr", "Closed-loop MPC runs on the stirred tank reactor");
  add_experiment_options(*s_cstr, cstr);
  auto * o_cd = s_cstr->add_option("--delta", cstr.delta, "Fixed control horizon(s), comma list");
  auto * o_cr = s_cstr->add_option("--delta-random", cstr.delta_random, "lo:hi, per-step random");
  auto * o_cn = s_cstr->add_option("--network", cstr.network, "Networked run from a config file");
  o_cd->excludes(o_cr)->excludes(o_cn);
  o_cr->excludes(o_cn);
  auto * o_cseed = s_cstr->add_option("--seed", cstr.seed, "Base seed (run i uses seed + i)");

  NcsArgs ncs;
  auto * s_ncs = app.add_subcommand("ncs", "Networked MPC runs on the stirred tank reactor");
  add_experiment_options(*s_ncs, ncs);
  s_ncs->add_option("--config", ncs.config, "Network config (JSON or key = value)");
  auto * o_seed = s_ncs->add_option("--seed", ncs.seed, "Base seed (overrides the config)");

  AnalyzeArgs an;
  auto * s_an = app.add_subcommand("analyze", "Suboptimality report from saved run records");
  s_an->add_option("--records", an.records, "Run records JSON")->required();
  s_an->add_option("--epsilon", an.epsilon)->capture_default_str();
  s_an->add_option("--alpha-bar", an.alpha_bar, "Report relaxed Lyapunov violations for this level");
  s_an->add_option("--slack", an.slack)->capture_default_str();
  s_an->add_option("--format", an.format)->check(CLI::IsMember({"csv", "json"}));

  std::vector<std::string> args(tokens.begin() + (tokens.empty() ? 0 : 1), tokens.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError & e) {
    return app.exit(e, out, err);
  }

  try {
    if (s_alpha->parsed()) { return cmd_alpha(alpha, out); }
    if (s_disc->parsed()) { return cmd_alpha_discrete(disc, out); }
    if (s_region->parsed()) { return cmd_region(region, out); }
    if (s_mh->parsed()) { return cmd_min_horizon(mh, out); }
    if (s_cstr->parsed()) {
      cstr.seed_given = o_cseed->count() > 0;
      return cmd_cstr(cstr, out);
    }
    if (s_ncs->parsed()) {
      ncs.seed_given = o_seed->count() > 0;
      return cmd_ncs(ncs, out);
    }
    if (s_an->parsed()) { return cmd_analyze(an, out); }
  } catch (const std::exception & e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace ncsmpc::cli
