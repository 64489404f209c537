#pragma once

/**
 * @file
 * @brief Plant models, stage costs and explicit Runge-Kutta integration.
 */

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ncsmpc/common.hpp"
#include "ncsmpc/control_signal.hpp"

namespace ncsmpc {

/// dxdt = f(x, u), written into a caller-provided vector of the state size.
using VectorField = std::function<void(const Vector & x, const Vector & u, Vector & dxdt)>;

/// Componentwise box; infinite bounds allowed.
struct Box
{
  Vector lower;
  Vector upper;

  static Box unbounded(Eigen::Index dim);

  bool contains(const Vector & v) const;
  /// Sum of squared distances to the box, zero inside.
  double squared_violation(const Vector & v) const;
  Vector clamp(const Vector & v) const { return v.cwiseMax(lower).cwiseMin(upper); }
};

struct PlantModel
{
  std::string name;
  Eigen::Index state_dim{0};
  Eigen::Index input_dim{0};
  VectorField vector_field;
  Box state_constraints;
  Box input_constraints;
  Vector equilibrium_state;
  Vector equilibrium_input;

  /// Throws InvalidArgument on inconsistent dimensions or empty boxes.
  void validate() const;

  Vector eval(const Vector & x, const Vector & u) const
  {
    Vector dx(state_dim);
    vector_field(x, u, dx);
    return dx;
  }
};

/// Running cost l(x, u) >= 0 with l(x*, u*) = 0.
struct StageCost
{
  std::function<double(const Vector & x, const Vector & u)> evaluate;
  /// l*(x) = min_u l(x, u); optional.
  std::function<double(const Vector & x)> evaluate_min_over_inputs;

  double operator()(const Vector & x, const Vector & u) const { return evaluate(x, u); }
};

/**
 * @brief Sampled solution of an integration run with cubic Hermite dense output.
 *
 * Segment i spans [times[i], times[i+1]] with input inputs[i] held constant.
 */
class Trajectory
{
public:
  Trajectory() = default;
  Trajectory(double t0, Vector x0, Vector u0);

  /// Appends the end of a step of constant input `u`; `slope_start` and
  /// `slope_end` are f(x, u) at both ends of the step.
  void append(double t, Vector x, const Vector & u, Vector slope_start, Vector slope_end);

  std::size_t size() const { return times_.size(); }
  const std::vector<double> & sample_times() const { return times_; }
  const std::vector<Vector> & states() const { return states_; }
  /// inputs()[i] acts on [times[i], times[i+1]); the last entry repeats the final input.
  const std::vector<Vector> & inputs() const { return inputs_; }

  double start_time() const { return times_.front(); }
  double end_time() const { return times_.back(); }
  const Vector & front() const { return states_.front(); }
  const Vector & back() const { return states_.back(); }

  /// State at t in [start_time, end_time] by Hermite interpolation of the enclosing step.
  Vector dense_eval(double t) const;

  /// Appends `other`, whose first sample must coincide in time with this end.
  void extend(const Trajectory & other);

private:
  std::vector<double> times_;
  std::vector<Vector> states_;
  std::vector<Vector> inputs_;
  std::vector<Vector> slope_start_;
  std::vector<Vector> slope_end_;
};

struct IntegratorOptions
{
  double rel_tol{1e-6};
  double abs_tol{1e-6};
  std::size_t max_steps{1000000};
};

/**
 * @brief Adaptive Dormand-Prince 5(4) integration under a piecewise-constant input.
 *
 * The integration restarts at every switch time of `u` inside `t_span`, so no
 * step straddles an input discontinuity. A zero-length span yields the single
 * sample x0. Throws IntegrationError on step-size underflow and propagates
 * DomainError from the vector field.
 */
Trajectory integrate(const PlantModel & model, const Vector & x0, const ControlSignal & u,
                     Interval t_span, const IntegratorOptions & options);

/// Same with rel_tol = abs_tol = tol.
Trajectory integrate(const PlantModel & model, const Vector & x0, const ControlSignal & u,
                     Interval t_span, double tol);

/// Classical fixed-step RK4 with `substeps` equal steps per input interval.
Trajectory integrate_rk4(const PlantModel & model, const Vector & x0, const ControlSignal & u,
                         Interval t_span, int substeps);

/// Euclidean norm of f(x*, u*).
double equilibrium_residual(const PlantModel & model);

/**
 * @brief Model with one extra state integrating
 * l(x, u) + penalty_weight * (squared state-box violation).
 */
PlantModel augment_with_cost(const PlantModel & model, const StageCost & cost,
                             double penalty_weight);

}  // namespace ncsmpc
