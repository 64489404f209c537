#pragma once

#include <functional>
#include <string>

#include "ncsmpc/common.hpp"

namespace ncsmpc {

struct BoxOptimizerOptions
{
  /// Stop when ||P(x - g) - x||_inf <= tolerance * max(1, |f(x)|).
  double tolerance{1e-7};
  int max_iterations{500};
  int memory{10};
  /// Finite-difference step (absolute, in the optimizer's coordinates).
  double fd_step{1e-6};
};

struct BoxOptimizerResult
{
  Vector x;
  double value{0.0};
  double projected_gradient_norm{0.0};
  int iterations{0};
  int evaluations{0};
  bool converged{false};
  std::string status;
};

/**
 * @brief Projected limited-memory quasi-Newton method for min f(x), lower <= x <= upper.
 *
 * Gradients come from forward differences, switching to central differences
 * once the projected gradient is small or a forward-difference line search
 * stalls. Variables held at an active bound are excluded from the quasi-Newton
 * step. f may return +inf to reject a trial point. If even a steepest-descent
 * step yields no decrease while the projected gradient is within 100x the
 * tolerance, the point is reported as converged.
 */
BoxOptimizerResult minimize_box(const std::function<double(const Vector &)> & f, Vector x0,
                                const Vector & lower, const Vector & upper,
                                const BoxOptimizerOptions & options = {});

}  // namespace ncsmpc
