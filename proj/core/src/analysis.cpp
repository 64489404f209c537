#include "ncsmpc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ncsmpc/errors.hpp"

namespace ncsmpc {

double local_alpha(double V_n, double V_next, double stage_integral, double epsilon)
{
  const double denominator = stage_integral - epsilon;
  if (!(denominator > 0.0)) { return 1.0; }
  return (V_n - V_next) / denominator;
}

namespace {

double value_or_throw(const std::optional<double> & v, std::size_t n)
{
  if (!v) {
    std::ostringstream os;
    os << "run records lack V_T at step " << n;
    throw MissingValue(os.str());
  }
  return *v;
}

}  // namespace

PerformanceReport trajectory_alpha(const RunRecords & run, double epsilon)
{
  if (!(epsilon >= 0.0)) { throw InvalidArgument("truncation level must be nonnegative"); }
  PerformanceReport report;
  report.epsilon_truncation = epsilon;
  for (std::size_t n = 0; n < run.steps.size(); ++n) {
    const StepRecord & s = run.steps[n];
    const double V_n = value_or_throw(s.value, n);
    const double V_next = value_or_throw(run.value_after(n), n + 1);
    const double a = local_alpha(V_n, V_next, s.stage_integral, epsilon);
    report.local_alphas.push_back(a);
    if (a < 0.0) { report.lyapunov_violations.push_back(n); }
    if (!s.converged) { ++report.unconverged_values; }
    report.closed_loop_cost += s.stage_integral;
  }
  if (!run.steps.empty() && !run.final_converged) { ++report.unconverged_values; }
  if (!report.local_alphas.empty()) {
    report.global_alpha = *std::min_element(report.local_alphas.begin(), report.local_alphas.end());
  }
  return report;
}

RunRecords reevaluate_values(const PlantModel & model, const OcpSpec & spec, RunRecords run)
{
  const std::size_t horizon = spec.horizon_steps();
  const auto warm_from = [&](const ControlSignal & applied, double start) {
    ControlSignal warm{start, spec.control_sampling, {}};
    for (std::size_t i = 0; i < applied.size() && i < horizon; ++i) {
      warm.values.push_back(applied.values[i]);
    }
    while (warm.size() < horizon) { warm.values.push_back(model.equilibrium_input); }
    return warm;
  };

  for (std::size_t n = 0; n < run.steps.size(); ++n) {
    StepRecord & s = run.steps[n];
    const OcpSolution sol = solve_ocp(model, spec, s.state, warm_from(s.applied, s.time), s.time);
    s.value = sol.value;
    s.converged = sol.converged;
  }
  std::optional<ControlSignal> warm;
  if (!run.steps.empty()) {
    const StepRecord & last = run.steps.back();
    warm = ControlSignal::constant(run.final_time, spec.control_sampling, horizon,
                                   last.applied.empty() ? model.equilibrium_input
                                                        : last.applied.values.back());
  }
  const OcpSolution fin = solve_ocp(model, spec, run.final_state, warm, run.final_time);
  run.final_value = fin.value;
  run.final_converged = fin.converged;
  return run;
}

std::vector<std::size_t> lyapunov_check(const RunRecords & run, double alpha_bar, double slack,
                                        double epsilon)
{
  if (!(alpha_bar > 0.0 && alpha_bar <= 1.0)) {
    throw InvalidArgument("alpha_bar must lie in (0, 1]");
  }
  std::vector<std::size_t> violations;
  for (std::size_t n = 0; n < run.steps.size(); ++n) {
    const StepRecord & s = run.steps[n];
    if (!(s.stage_integral - epsilon > 0.0)) { continue; }
    const double V_n = value_or_throw(s.value, n);
    const double V_next = value_or_throw(run.value_after(n), n + 1);
    if (V_next > V_n - alpha_bar * s.stage_integral + slack) { violations.push_back(n); }
  }
  return violations;
}

double closed_loop_cost(const Trajectory & trajectory, const StageCost & cost, double t_end)
{
  if (trajectory.size() == 0) { return 0.0; }
  const auto & times = trajectory.sample_times();
  const auto & inputs = trajectory.inputs();
  const double t0 = times.front();
  if (t_end < t0 || t_end > times.back() + 1e-9 * std::max(1.0, std::abs(times.back()))) {
    throw InvalidArgument("t_end outside the recorded trajectory");
  }
  static const double nodes[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

  double total = 0.0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double a = times[i];
    const double b = std::min(times[i + 1], t_end);
    if (a >= t_end) { break; }
    if (b <= a) { continue; }
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (int k = 0; k < 3; ++k) {
      // Nodes lie strictly inside [a, b], so dense_eval stays on segment i.
      total += weights[k] * half * cost(trajectory.dense_eval(mid + half * nodes[k]), inputs[i]);
    }
  }
  return total;
}

}  // namespace ncsmpc
