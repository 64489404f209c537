#pragma once

#include <limits>

#include "ncsmpc/dynamics.hpp"

namespace ncsmpc::testing {

inline Box scalar_box(double lo, double hi)
{
  return {Vector::Constant(1, lo), Vector::Constant(1, hi)};
}

/// dx/dt = a x + b u on x in R, u in [-u_max, u_max], target (0, 0).
inline PlantModel scalar_linear(double a, double b, double u_max = 10.0)
{
  PlantModel m;
  m.name = "scalar";
  m.state_dim = 1;
  m.input_dim = 1;
  m.vector_field = [a, b](const Vector & x, const Vector & u, Vector & dx) {
    dx[0] = a * x[0] + b * u[0];
  };
  const double inf = std::numeric_limits<double>::infinity();
  m.state_constraints = scalar_box(-inf, inf);
  m.input_constraints = scalar_box(-u_max, u_max);
  m.equilibrium_state = Vector::Zero(1);
  m.equilibrium_input = Vector::Zero(1);
  return m;
}

/// l(x, u) = x^2 + u^2.
inline StageCost quadratic_cost()
{
  StageCost c;
  c.evaluate = [](const Vector & x, const Vector & u) { return x.squaredNorm() + u.squaredNorm(); };
  c.evaluate_min_over_inputs = [](const Vector & x) { return x.squaredNorm(); };
  return c;
}

}  // namespace ncsmpc::testing
