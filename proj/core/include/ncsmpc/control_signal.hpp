#pragma once

#include <cstddef>
#include <vector>

#include "ncsmpc/common.hpp"

namespace ncsmpc {

/**
 * @brief Piecewise-constant input on a uniform grid.
 *
 * values[i] is applied on [start_time + i*sampling, start_time + (i+1)*sampling).
 */
struct ControlSignal
{
  double start_time{0.0};
  double sampling{0.01};
  std::vector<Vector> values;

  static ControlSignal constant(double start_time, double sampling, std::size_t count,
                                const Vector & value);

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  Eigen::Index input_dim() const { return values.empty() ? 0 : values.front().size(); }

  /// Left edge of interval i.
  double grid_time(std::size_t i) const { return start_time + static_cast<double>(i) * sampling; }
  double end_time() const { return grid_time(values.size()); }

  /// Index of the interval containing t; times within 1e-9 grid cells of a
  /// switch point snap to the later interval. Throws InvalidArgument outside
  /// [start_time, end_time].
  std::size_t index_at(double t) const;
  const Vector & at(double t) const { return values[index_at(t)]; }

  /// Drops the first `steps` values and appends `pad` so the length is unchanged.
  ControlSignal shifted(std::size_t steps, const Vector & pad) const;

  /// Values [first, first + count) as a signal starting at grid_time(first).
  ControlSignal slice(std::size_t first, std::size_t count) const;

  /// Clamps every value into [lower, upper] componentwise.
  void project(const Vector & lower, const Vector & upper);

  /// Stacks the values into one parameter vector (interval-major).
  Vector flatten() const;
  static ControlSignal unflatten(double start_time, double sampling, Eigen::Index input_dim,
                                 const Vector & flat);

  bool operator==(const ControlSignal & other) const;
};

}  // namespace ncsmpc
