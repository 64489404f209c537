#pragma once

/**
 * @file
 * @brief A-posteriori suboptimality estimates along closed-loop runs.
 */

#include <cstddef>
#include <vector>

#include "ncsmpc/dynamics.hpp"
#include "ncsmpc/mpc.hpp"

namespace ncsmpc {

struct PerformanceReport
{
  /// alpha(n) for every step with a successor value.
  std::vector<double> local_alphas;
  /// Minimum of local_alphas (1 for an empty run).
  double global_alpha{1.0};
  /// Sum of the per-step stage integrals.
  double closed_loop_cost{0.0};
  /// Steps whose value increased (alpha(n) < 0).
  std::vector<std::size_t> lyapunov_violations;
  double epsilon_truncation{1e-12};
  /// Steps whose value came from a solve that did not converge.
  std::size_t unconverged_values{0};
};

/**
 * @brief (V_n - V_next) / (stage_integral - epsilon), or 1 when the denominator
 * is not positive. Negative when the value increases.
 */
double local_alpha(double V_n, double V_next, double stage_integral, double epsilon = 1e-12);

/// Local and global alpha of a run. Throws MissingValue if a step has no value.
PerformanceReport trajectory_alpha(const RunRecords & run, double epsilon = 1e-12);

/**
 * @brief Replaces the values of a run by fresh OCP solves at the recorded states.
 *
 * Each solve is warm-started from the input the run applied from that state,
 * padded with the equilibrium input. Used for networked runs, whose recorded
 * values belong to predicted rather than measured states.
 */
RunRecords reevaluate_values(const PlantModel & model, const OcpSpec & spec, RunRecords run);

/**
 * @brief Steps with V_next > V_n - alpha_bar * stage_integral + slack.
 *
 * Steps whose stage integral does not exceed epsilon are skipped, matching the
 * truncation of local_alpha.
 */
std::vector<std::size_t> lyapunov_check(const RunRecords & run, double alpha_bar,
                                        double slack = 1e-5, double epsilon = 1e-12);

/// Integral of the stage cost along a recorded trajectory over [start, t_end]
/// (three-point Gauss-Legendre per integrator step on the dense output).
double closed_loop_cost(const Trajectory & trajectory, const StageCost & cost, double t_end);

}  // namespace ncsmpc
