#include "ncsmpc/control_signal.hpp"

#include <cmath>
#include <sstream>

#include "ncsmpc/errors.hpp"

namespace ncsmpc {

ControlSignal ControlSignal::constant(double start_time, double sampling, std::size_t count,
                                      const Vector & value)
{
  if (!(sampling > 0.0)) { throw InvalidArgument("control sampling must be positive"); }
  return ControlSignal{start_time, sampling, std::vector<Vector>(count, value)};
}

std::size_t ControlSignal::index_at(double t) const
{
  const double cells = (t - start_time) / sampling;
  const double n     = static_cast<double>(values.size());
  if (values.empty() || cells < -1e-9 || cells > n + 1e-9) {
    std::ostringstream os;
    os << "time " << t << " outside control signal support [" << start_time << ", "
       << end_time() << ")";
    throw InvalidArgument(os.str());
  }
  const double idx = std::floor(cells + 1e-9);
  if (idx < 0.0) { return 0; }
  if (idx >= n) { return values.size() - 1; }
  return static_cast<std::size_t>(idx);
}

ControlSignal ControlSignal::shifted(std::size_t steps, const Vector & pad) const
{
  ControlSignal out{grid_time(steps), sampling, {}};
  out.values.reserve(values.size());
  for (std::size_t i = steps; i < values.size(); ++i) { out.values.push_back(values[i]); }
  while (out.values.size() < values.size()) { out.values.push_back(pad); }
  return out;
}

ControlSignal ControlSignal::slice(std::size_t first, std::size_t count) const
{
  if (first + count > values.size()) {
    throw InvalidArgument("control signal slice exceeds its support");
  }
  ControlSignal out{grid_time(first), sampling, {}};
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(first),
                    values.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

void ControlSignal::project(const Vector & lower, const Vector & upper)
{
  for (auto & v : values) { v = v.cwiseMax(lower).cwiseMin(upper); }
}

Vector ControlSignal::flatten() const
{
  const Eigen::Index m = input_dim();
  Vector flat(m * static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    flat.segment(static_cast<Eigen::Index>(i) * m, m) = values[i];
  }
  return flat;
}

ControlSignal ControlSignal::unflatten(double start_time, double sampling, Eigen::Index input_dim,
                                       const Vector & flat)
{
  if (input_dim <= 0 || flat.size() % input_dim != 0) {
    throw InvalidArgument("flat control vector length is not a multiple of the input dimension");
  }
  ControlSignal out{start_time, sampling, {}};
  const Eigen::Index count = flat.size() / input_dim;
  out.values.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    out.values.emplace_back(flat.segment(i * input_dim, input_dim));
  }
  return out;
}

bool ControlSignal::operator==(const ControlSignal & other) const
{
  if (start_time != other.start_time || sampling != other.sampling ||
      values.size() != other.values.size())
  {
    return false;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != other.values[i].size() || values[i] != other.values[i]) {
      return false;
    }
  }
  return true;
}

}  // namespace ncsmpc
