#pragma once

/**
 * @file
 * @brief Closed-form performance bounds for continuous-time MPC without
 * terminal ingredients under an exponential controllability condition.
 *
 * All functions are pure and thread-safe. Invalid arguments raise
 * ncsmpc::InvalidArgument.
 */

#include <cstddef>
#include <utility>
#include <vector>

#include "ncsmpc/common.hpp"

namespace ncsmpc {

/// Exponential controllability constants: the stage cost along some admissible
/// control decays like overshoot * exp(-decay_rate * t) * l*(x).
struct ControllabilityParams
{
  double overshoot{1.0};   ///< C >= 1 (dimensionless)
  double decay_rate{1.0};  ///< mu > 0 (1/time)

  void validate() const;
};

/// Prediction horizon T and control horizon delta, 0 < delta < T.
struct HorizonPair
{
  double prediction_horizon{1.0};
  double control_horizon{0.5};

  void validate() const;
};

/// Uniform discretization of a horizon pair: T = num_steps * base_step and
/// delta = control_steps * base_step, refined `refinement_level` times by
/// halving the step.
struct RefinementSpec
{
  double base_step{0.1};
  int num_steps{10};
  int control_steps{1};
  int refinement_level{0};

  void validate() const;
  HorizonPair horizon() const { return {num_steps * base_step, control_steps * base_step}; }
};

/// Performance index alpha_{T,delta}. Bounded above by one, may be negative
/// (no stability guarantee). Symmetric in delta <-> T - delta.
double alpha_continuous(const ControllabilityParams & params, const HorizonPair & horizon);

/**
 * @brief Partial geometric sums gamma_i = C * sum_{n=0}^{i-1} s^n, i = 1..length,
 * with s = exp(-decay_rate * base_step * 2^-level).
 */
std::vector<double> gamma_sequence(
  const ControllabilityParams & params, double base_step, int level, std::size_t length);

/**
 * @brief Discrete counterpart of alpha_continuous on the refined grid with
 * 2^k * N steps of which 2^k * m are applied.
 *
 * The four products are accumulated as sums of logarithms so that grids with
 * tens of thousands of factors neither overflow nor underflow. Throws
 * DegenerateDenominator when a bracketed denominator is not positive.
 */
double alpha_discrete(const ControllabilityParams & params, const RefinementSpec & spec);

/// Guaranteed level for any (possibly time-varying) control horizon in
/// [delta_min, T - delta_min]; requires 0 < delta_min <= T/2.
double guaranteed_alpha_varying(const ControllabilityParams & params, double prediction_horizon,
                                double delta_min);

/// 1 - ([exp(mu(T-delta)/C) - 1][exp(mu delta/C) - 1])^-1, a lower bound on
/// alpha_continuous. Throws UndefinedBound if a bracket is not positive.
double decay_rate_lower_bound(const ControllabilityParams & params, const HorizonPair & horizon);

/// 1 - exp(-mu T); upper bound on alpha_continuous for every C >= 1 and delta.
double overshoot_upper_bound(const ControllabilityParams & params, double prediction_horizon);

struct RegionSample
{
  double overshoot;
  double sigma;  ///< per-unit-time contraction exp(-mu)
  double alpha;
  bool stable;   ///< alpha >= 0
};

/// Evaluates alpha on a grid x grid lattice over (C, sigma), C-major order.
/// sigma parameterizes the decay rate as mu = -ln(sigma); sigma_range must lie in (0, 1).
std::vector<RegionSample> stability_grid(double prediction_horizon, double control_horizon,
                                         Interval overshoot_range, Interval sigma_range,
                                         std::size_t grid);

/// The (C, sigma) lattice points with alpha >= 0.
std::vector<std::pair<double, double>> stability_region(double prediction_horizon,
                                                        double control_horizon,
                                                        Interval overshoot_range,
                                                        Interval sigma_range, std::size_t grid);

/**
 * @brief Smallest prediction horizon T with
 * alpha_continuous(params, {T, delta_fraction * T}) >= alpha_target.
 *
 * Bracketing by doubling, then bisection to 1e-9 relative width. Throws
 * Unattainable if the target is not reached for any representable horizon.
 */
double minimal_prediction_horizon(const ControllabilityParams & params, double delta_fraction,
                                  double alpha_target);

}  // namespace ncsmpc
