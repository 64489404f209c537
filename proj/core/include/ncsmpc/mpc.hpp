#pragma once

/**
 * @file
 * @brief Direct single shooting for finite-horizon optimal control with
 * piecewise-constant inputs, and the receding-horizon loop built on it.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ncsmpc/common.hpp"
#include "ncsmpc/control_signal.hpp"
#include "ncsmpc/dynamics.hpp"

namespace ncsmpc {

struct OcpSpec
{
  double prediction_horizon{0.3};
  /// Length of the piecewise-constant input intervals.
  double control_sampling{0.01};
  StageCost stage_cost;
  /// Weight of the integrated squared state-constraint violation.
  double state_penalty_weight{1e6};
  /// Relative first-order stationarity tolerance of the optimizer.
  double optimizer_tolerance{1e-7};
  /// Tolerance of the adaptive integrator for values, predictions and the plant.
  double integration_tolerance{1e-6};
  /// RK4 substeps per input interval inside the optimizer's objective.
  int shooting_substeps{4};
  int max_iterations{500};

  /// Throws InvalidArgument unless T is a nonnegative integer multiple of the sampling.
  void validate() const;
  std::size_t horizon_steps() const;
  /// Converts a duration that must be a whole number of sampling intervals.
  std::size_t steps_for(double duration) const;
};

struct OcpSolution
{
  ControlSignal control;
  /// V_T(x0): cost_functional at the returned control.
  double value{0.0};
  /// Objective value seen by the optimizer (fixed-step discretization).
  double shooting_value{0.0};
  Trajectory predicted_trajectory;
  bool converged{false};
  int iterations{0};
  int evaluations{0};
  double projected_gradient_norm{0.0};
};

/**
 * @brief J_T(x0, u): integral of the stage cost plus state-constraint penalty over
 * [u.start_time, u.start_time + T], computed by integrating the cost as an extra state.
 */
double cost_functional(const PlantModel & model, const OcpSpec & spec, const Vector & x0,
                       const ControlSignal & u);

/// The same integral evaluated with fixed-step RK4 (smooth in u; used by the optimizer).
double shooting_cost(const PlantModel & model, const OcpSpec & spec, const Vector & x0,
                     const ControlSignal & u);

/**
 * @brief Local minimizer of J_T(x0, .) over input-box-constrained piecewise-constant controls.
 *
 * Starts from `warm_start` when given (projected into the input box), else from
 * the equilibrium input. Non-convergence is reported through `converged`; the
 * best iterate is returned either way.
 */
OcpSolution solve_ocp(const PlantModel & model, const OcpSpec & spec, const Vector & x0,
                      const std::optional<ControlSignal> & warm_start = std::nullopt,
                      double start_time = 0.0);

/// One receding-horizon step.
struct StepRecord
{
  std::size_t index{0};
  double time{0.0};
  Vector state;
  /// V_T at `state`; empty when not evaluated.
  std::optional<double> value;
  bool converged{false};
  double delta{0.0};
  /// Integral of the stage cost along the closed loop over [time, time + delta).
  double stage_integral{0.0};
  ControlSignal applied;
};

/// Closed-loop run: per-step records plus the state and value at the end.
struct RunRecords
{
  std::vector<StepRecord> steps;
  double final_time{0.0};
  Vector final_state;
  std::optional<double> final_value;
  bool final_converged{false};
  Trajectory trajectory;

  /// V_T at the start of step n + 1 (or at the end of the run).
  std::optional<double> value_after(std::size_t n) const;
};

/**
 * @brief MPC closed loop: solve, apply the first delta_i of the optimal control,
 * shift, repeat until `duration` is covered.
 *
 * Each delta_i must be a positive whole number of sampling intervals not
 * exceeding T. The warm start is the previous optimal control shifted by
 * delta_i and padded with the equilibrium input. The value at the final state
 * is also computed so every step has a successor value.
 */
RunRecords mpc_closed_loop(const PlantModel & model, const OcpSpec & spec, const Vector & x0,
                           const std::vector<double> & horizon_schedule, double duration);

/// Control horizons drawn uniformly from the sampling-grid multiples in [lo, hi]
/// until they cover `duration`.
std::vector<double> random_horizon_schedule(double lo, double hi, double sampling,
                                            double duration, std::uint64_t seed);

/// Integral of the stage cost (no penalty) along the solution from x0 under u over span.
double stage_integral_along(const PlantModel & model, const StageCost & cost, const Vector & x0,
                            const ControlSignal & u, Interval span, double tol);

}  // namespace ncsmpc
