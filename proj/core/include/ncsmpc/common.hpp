#pragma once

#include <Eigen/Core>

namespace ncsmpc {

using Vector = Eigen::VectorXd;

/// Closed interval [lo, hi] of reals.
struct Interval
{
  double lo{0.0};
  double hi{0.0};

  double length() const { return hi - lo; }
};

}  // namespace ncsmpc
