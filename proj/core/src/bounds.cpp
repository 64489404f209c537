#include "ncsmpc/bounds.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "ncsmpc/errors.hpp"

namespace ncsmpc {

namespace {

bool finite(double v) { return std::isfinite(v); }

// log(exp(x) - 1) for x > 0 without overflow.
double log_expm1(double x)
{
  if (x > 30.0) { return x + std::log1p(-std::exp(-x)); }
  return std::log(std::expm1(x));
}

// Neumaier-compensated running sum.
struct CompensatedSum
{
  double sum{0.0};
  double carry{0.0};

  void add(double v)
  {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + carry; }
};

std::string describe(const char * what, double v)
{
  std::ostringstream os;
  os << what << " (got " << v << ")";
  return os.str();
}

}  // namespace

void ControllabilityParams::validate() const
{
  if (!finite(overshoot) || !finite(decay_rate)) {
    throw InvalidArgument("controllability constants must be finite");
  }
  if (overshoot < 1.0) { throw InvalidArgument(describe("overshoot C must be >= 1", overshoot)); }
  if (decay_rate <= 0.0) {
    throw InvalidArgument(describe("decay rate mu must be > 0", decay_rate));
  }
}

void HorizonPair::validate() const
{
  if (!finite(prediction_horizon) || !finite(control_horizon)) {
    throw InvalidArgument("horizons must be finite");
  }
  if (!(control_horizon > 0.0) || !(control_horizon < prediction_horizon)) {
    std::ostringstream os;
    os << "control horizon must lie in (0, T): delta=" << control_horizon
       << ", T=" << prediction_horizon;
    throw InvalidArgument(os.str());
  }
}

void RefinementSpec::validate() const
{
  if (!finite(base_step) || base_step <= 0.0) {
    throw InvalidArgument(describe("base step must be positive", base_step));
  }
  if (control_steps < 1 || 2 * static_cast<std::int64_t>(control_steps) > num_steps) {
    throw InvalidArgument("control steps m must satisfy 1 <= m <= N/2");
  }
  if (refinement_level < 0 || refinement_level > 30) {
    throw InvalidArgument("refinement level must lie in [0, 30]");
  }
}

double alpha_continuous(const ControllabilityParams & params, const HorizonPair & horizon)
{
  params.validate();
  horizon.validate();
  const double C  = params.overshoot;
  const double mu = params.decay_rate;
  const double T  = horizon.prediction_horizon;

  // Snap delta (by at most half an ulp of T) to a value whose complement T - delta
  // is exact, so that (T, delta) and (T, T - delta) evaluate the same pair.
  double d = T - (T - horizon.control_horizon);
  if (!(d > 0.0 && d < T)) { d = horizon.control_horizon; }

  // With a = (e^{mu d}-1)^{1/C}, b = (e^{mu T}-1)^{1/C}, c = (e^{mu(T-d)}-1)^{1/C}:
  // a/(b-a) = 1/expm1(log b - log a), likewise for c.
  const double log_a = log_expm1(mu * d) / C;
  const double log_b = log_expm1(mu * T) / C;
  const double log_c = log_expm1(mu * (T - d)) / C;
  return 1.0 - 1.0 / (std::expm1(log_b - log_a) * std::expm1(log_b - log_c));
}

std::vector<double> gamma_sequence(
  const ControllabilityParams & params, double base_step, int level, std::size_t length)
{
  params.validate();
  if (!finite(base_step) || base_step <= 0.0) {
    throw InvalidArgument(describe("base step must be positive", base_step));
  }
  if (level < 0) { throw InvalidArgument("refinement level must be >= 0"); }
  if (length < 1) { throw InvalidArgument("gamma sequence length must be >= 1"); }

  // sum_{n<i} s^n = (1 - s^i) / (1 - s) with s = exp(-x)
  const double x     = std::ldexp(params.decay_rate * base_step, -level);
  const double denom = std::expm1(-x);
  std::vector<double> gamma(length);
  for (std::size_t i = 1; i <= length; ++i) {
    gamma[i - 1] = params.overshoot * (std::expm1(-static_cast<double>(i) * x) / denom);
  }
  return gamma;
}

double alpha_discrete(const ControllabilityParams & params, const RefinementSpec & spec)
{
  params.validate();
  spec.validate();

  const std::int64_t scale = std::int64_t{1} << spec.refinement_level;
  const std::int64_t Nk    = scale * spec.num_steps;
  const std::int64_t mk    = scale * spec.control_steps;

  const double C     = params.overshoot;
  const double x     = std::ldexp(params.decay_rate * spec.base_step, -spec.refinement_level);
  const double denom = std::expm1(-x);

  // Each ratio prod(gamma_i - 1) / prod(gamma_i) is exp(sum log1p(-1/gamma_i)).
  // The window (Nk-mk, Nk] is contained in (mk, Nk] because mk <= Nk/2.
  CompensatedSum head;  // i in (mk, Nk-mk]
  CompensatedSum tail;  // i in (Nk-mk, Nk]
  for (std::int64_t i = mk + 1; i <= Nk; ++i) {
    const double gamma = C * (std::expm1(-static_cast<double>(i) * x) / denom);
    if (!(gamma > 1.0)) {
      std::ostringstream os;
      os << "gamma_" << i << " - 1 = " << gamma - 1.0 << " is not positive";
      throw DegenerateDenominator(os.str());
    }
    const double term = std::log1p(-1.0 / gamma);
    if (i > Nk - mk) {
      tail.add(term);
    } else {
      head.add(term);
    }
  }

  const double log_ratio_m    = head.value() + tail.value();  // over (mk, Nk]
  const double log_ratio_tail = tail.value();                 // over (Nk-mk, Nk]

  // [prod gamma - prod(gamma-1)] / prod(gamma-1) = expm1(-log ratio)
  const double bracket_m    = std::expm1(-log_ratio_m);
  const double bracket_tail = std::expm1(-log_ratio_tail);
  if (!(bracket_m > 0.0) || !(bracket_tail > 0.0)) {
    throw DegenerateDenominator("bracketed denominator of the discrete bound is not positive");
  }
  return 1.0 - 1.0 / (bracket_m * bracket_tail);
}

double guaranteed_alpha_varying(const ControllabilityParams & params, double prediction_horizon,
                                double delta_min)
{
  if (!finite(prediction_horizon) || !finite(delta_min) || !(delta_min > 0.0) ||
      !(delta_min <= 0.5 * prediction_horizon))
  {
    std::ostringstream os;
    os << "minimal control horizon must lie in (0, T/2]: delta_min=" << delta_min
       << ", T=" << prediction_horizon;
    throw InvalidArgument(os.str());
  }
  return alpha_continuous(params, {prediction_horizon, delta_min});
}

double decay_rate_lower_bound(const ControllabilityParams & params, const HorizonPair & horizon)
{
  params.validate();
  horizon.validate();
  const double C  = params.overshoot;
  const double mu = params.decay_rate;
  const double T  = horizon.prediction_horizon;
  const double d  = horizon.control_horizon;

  const double first  = std::expm1(mu * (T - d) / C);
  const double second = std::expm1(mu * d / C);
  if (!(first > 0.0) || !(second > 0.0)) {
    throw UndefinedBound("decay-rate bound undefined: a bracketed factor is not positive");
  }
  return 1.0 - 1.0 / (first * second);
}

double overshoot_upper_bound(const ControllabilityParams & params, double prediction_horizon)
{
  params.validate();
  if (!finite(prediction_horizon) || !(prediction_horizon > 0.0)) {
    throw InvalidArgument(describe("prediction horizon must be positive", prediction_horizon));
  }
  return -std::expm1(-params.decay_rate * prediction_horizon);
}

std::vector<RegionSample> stability_grid(double prediction_horizon, double control_horizon,
                                         Interval overshoot_range, Interval sigma_range,
                                         std::size_t grid)
{
  HorizonPair{prediction_horizon, control_horizon}.validate();
  if (grid < 2) { throw InvalidArgument("region grid needs at least 2 points per axis"); }
  if (!finite(overshoot_range.lo) || !finite(overshoot_range.hi) || overshoot_range.lo < 1.0 ||
      overshoot_range.hi < overshoot_range.lo)
  {
    throw InvalidArgument("overshoot range must be a nonempty interval within [1, inf)");
  }
  if (!(sigma_range.lo > 0.0) || !(sigma_range.hi < 1.0) || sigma_range.hi < sigma_range.lo) {
    throw InvalidArgument("sigma range must be a nonempty interval within (0, 1)");
  }

  const auto lattice = [grid](Interval r, std::size_t i) {
    return r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(grid - 1);
  };

  std::vector<RegionSample> out;
  out.reserve(grid * grid);
  for (std::size_t i = 0; i < grid; ++i) {
    const double C = lattice(overshoot_range, i);
    for (std::size_t j = 0; j < grid; ++j) {
      const double sigma = lattice(sigma_range, j);
      const double alpha =
        alpha_continuous({C, -std::log(sigma)}, {prediction_horizon, control_horizon});
      out.push_back({C, sigma, alpha, alpha >= 0.0});
    }
  }
  return out;
}

std::vector<std::pair<double, double>> stability_region(double prediction_horizon,
                                                        double control_horizon,
                                                        Interval overshoot_range,
                                                        Interval sigma_range, std::size_t grid)
{
  std::vector<std::pair<double, double>> inside;
  for (const auto & s :
       stability_grid(prediction_horizon, control_horizon, overshoot_range, sigma_range, grid)) {
    if (s.stable) { inside.emplace_back(s.overshoot, s.sigma); }
  }
  return inside;
}

double minimal_prediction_horizon(const ControllabilityParams & params, double delta_fraction,
                                  double alpha_target)
{
  params.validate();
  if (!finite(delta_fraction) || !(delta_fraction > 0.0) || !(delta_fraction <= 0.5)) {
    throw InvalidArgument(describe("delta fraction must lie in (0, 1/2]", delta_fraction));
  }
  if (!finite(alpha_target) || !(alpha_target > 0.0) || !(alpha_target < 1.0)) {
    throw InvalidArgument(describe("alpha target must lie in (0, 1)", alpha_target));
  }

  const auto alpha_at = [&](double T) {
    return alpha_continuous(params, {T, delta_fraction * T});
  };

  double hi = 1.0 / params.decay_rate;
  int doublings = 0;
  while (alpha_at(hi) < alpha_target) {
    hi *= 2.0;
    if (++doublings > 1000 || !finite(hi)) {
      throw Unattainable(describe("alpha target not reached for any horizon", alpha_target));
    }
  }

  double lo = 0.5 * hi;
  while (alpha_at(lo) >= alpha_target) {
    hi = lo;
    lo *= 0.5;
    if (lo < std::numeric_limits<double>::min()) { return hi; }
  }

  while (hi - lo > 1e-9 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (alpha_at(mid) >= alpha_target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace ncsmpc
