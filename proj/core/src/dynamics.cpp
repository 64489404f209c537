#include "ncsmpc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ncsmpc/errors.hpp"

namespace ncsmpc {

Box Box::unbounded(Eigen::Index dim)
{
  const double inf = std::numeric_limits<double>::infinity();
  return Box{Vector::Constant(dim, -inf), Vector::Constant(dim, inf)};
}

bool Box::contains(const Vector & v) const
{
  return (v.array() >= lower.array()).all() && (v.array() <= upper.array()).all();
}

double Box::squared_violation(const Vector & v) const
{
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] < lower[i]) {
      s += (lower[i] - v[i]) * (lower[i] - v[i]);
    } else if (v[i] > upper[i]) {
      s += (v[i] - upper[i]) * (v[i] - upper[i]);
    }
  }
  return s;
}

void PlantModel::validate() const
{
  if (state_dim <= 0 || input_dim <= 0) {
    throw InvalidArgument("plant model dimensions must be positive");
  }
  if (!vector_field) { throw InvalidArgument("plant model has no vector field"); }
  const auto check_box = [](const Box & b, Eigen::Index dim, const char * what) {
    if (b.lower.size() != dim || b.upper.size() != dim) {
      throw InvalidArgument(std::string(what) + " box has wrong dimension");
    }
    if ((b.lower.array() > b.upper.array()).any()) {
      throw InvalidArgument(std::string(what) + " box is empty");
    }
  };
  check_box(state_constraints, state_dim, "state constraint");
  check_box(input_constraints, input_dim, "input constraint");
  if (equilibrium_state.size() != state_dim || equilibrium_input.size() != input_dim) {
    throw InvalidArgument("equilibrium has wrong dimension");
  }
}

// --- Trajectory -------------------------------------------------------------

Trajectory::Trajectory(double t0, Vector x0, Vector u0)
{
  times_.push_back(t0);
  states_.push_back(std::move(x0));
  inputs_.push_back(std::move(u0));
}

void Trajectory::append(double t, Vector x, const Vector & u, Vector slope_start, Vector slope_end)
{
  inputs_.back() = u;
  times_.push_back(t);
  states_.push_back(std::move(x));
  inputs_.push_back(u);
  slope_start_.push_back(std::move(slope_start));
  slope_end_.push_back(std::move(slope_end));
}

Vector Trajectory::dense_eval(double t) const
{
  if (times_.empty()) { throw InvalidArgument("dense evaluation of an empty trajectory"); }
  const double span = times_.back() - times_.front();
  const double slack = 1e-12 * std::max(1.0, std::abs(times_.back()));
  if (t < times_.front() - slack || t > times_.back() + slack) {
    std::ostringstream os;
    os << "time " << t << " outside trajectory [" << times_.front() << ", " << times_.back()
       << "]";
    throw InvalidArgument(os.str());
  }
  if (times_.size() == 1 || span == 0.0) { return states_.front(); }

  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t i = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  if (i >= slope_start_.size()) { i = slope_start_.size() - 1; }

  const double h = times_[i + 1] - times_[i];
  const double s = std::clamp((t - times_[i]) / h, 0.0, 1.0);
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * states_[i] + h10 * h * slope_start_[i] + h01 * states_[i + 1] +
         h11 * h * slope_end_[i];
}

void Trajectory::extend(const Trajectory & other)
{
  if (other.times_.empty()) { return; }
  if (times_.empty()) {
    *this = other;
    return;
  }
  if (std::abs(other.times_.front() - times_.back()) > 1e-9 * std::max(1.0, std::abs(times_.back())))
  {
    throw InvalidArgument("trajectories to concatenate are not contiguous");
  }
  inputs_.back() = other.inputs_.front();
  for (std::size_t i = 1; i < other.times_.size(); ++i) {
    times_.push_back(other.times_[i]);
    states_.push_back(other.states_[i]);
    inputs_.push_back(other.inputs_[i]);
    slope_start_.push_back(other.slope_start_[i - 1]);
    slope_end_.push_back(other.slope_end_[i - 1]);
  }
}

// --- integration ------------------------------------------------------------

namespace {

void check_span(const Vector & x0, const ControlSignal & u, Interval t_span)
{
  if (!x0.allFinite()) { throw InvalidArgument("initial state is not finite"); }
  if (!(t_span.hi >= t_span.lo)) { throw InvalidArgument("integration span is reversed"); }
  if (u.empty()) { throw InvalidArgument("control signal is empty"); }
  const double tol = 1e-9 * u.sampling;
  if (t_span.lo < u.start_time - tol || t_span.hi > u.end_time() + tol) {
    std::ostringstream os;
    os << "control signal [" << u.start_time << ", " << u.end_time()
       << ") does not cover integration span [" << t_span.lo << ", " << t_span.hi << "]";
    throw InvalidArgument(os.str());
  }
}

/// Calls fn(a, b, input) for every maximal subinterval of t_span with constant input.
template<typename Fn>
void for_each_piece(const ControlSignal & u, Interval t_span, Fn && fn)
{
  std::size_t i = u.index_at(t_span.lo);
  double a = t_span.lo;
  const double snap = 1e-9 * u.sampling;
  while (a < t_span.hi) {
    double b = std::min(u.grid_time(i + 1), t_span.hi);
    if (t_span.hi - b <= snap) { b = t_span.hi; }
    if (b - a > snap || b == t_span.hi) { fn(a, b, u.values[std::min(i, u.size() - 1)]); }
    a = b;
    ++i;
  }
}

double rms_error(const Vector & err, const Vector & y0, const Vector & y1,
                 const IntegratorOptions & opt)
{
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r  = err[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

class DormandPrince
{
public:
  DormandPrince(const PlantModel & model, const IntegratorOptions & options)
  : model_(model), opt_(options)
  {
    const Eigen::Index n = model.state_dim;
    for (auto * v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &y1_, &err_}) {
      v->resize(n);
    }
  }

  /// Integrates from (t, x) to b with constant input u, appending accepted steps to traj.
  void advance(double t, Vector & x, double b, const Vector & u, Trajectory & traj)
  {
    const auto & f = model_.vector_field;
    f(x, u, k1_);
    if (h_ <= 0.0) { h_ = initial_step(t, x, b, u); }

    bool last_rejected = false;
    while (t < b) {
      if (++steps_ > opt_.max_steps) { throw IntegrationError("maximum number of steps exceeded"); }
      double h = std::min(h_, b - t);
      const bool lands = (t + h >= b) || (b - (t + h) < 1e-10 * std::max(1.0, std::abs(b)));
      if (lands) { h = b - t; }
      if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        std::ostringstream os;
        os << "step-size underflow at t=" << t << " (h=" << h << ")";
        throw IntegrationError(os.str());
      }

      tmp_ = x + h * (a21 * k1_);
      f(tmp_, u, k2_);
      tmp_ = x + h * (a31 * k1_ + a32 * k2_);
      f(tmp_, u, k3_);
      tmp_ = x + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
      f(tmp_, u, k4_);
      tmp_ = x + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
      f(tmp_, u, k5_);
      tmp_ = x + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
      f(tmp_, u, k6_);
      y1_ = x + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
      f(y1_, u, k7_);
      err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

      const double err = rms_error(err_, x, y1_, opt_);
      if (!std::isfinite(err)) {
        h_ = 0.25 * h;
        last_rejected = true;
        continue;
      }
      if (err <= 1.0) {
        const double grow = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        t = lands ? b : t + h;
        traj.append(t, y1_, u, k1_, k7_);
        x = y1_;
        k1_ = k7_;
        // Keep the controller's proposal when the step was shortened to hit b.
        if (!lands || h >= h_) { h_ = last_rejected ? std::min(h, h * grow) : h * grow; }
        last_rejected = false;
      } else {
        h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
        last_rejected = true;
      }
    }
  }

private:
  double initial_step(double t, const Vector & x, double b, const Vector & u)
  {
    const auto scaled_norm = [this](const Vector & v, const Vector & y) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double sc = opt_.abs_tol + opt_.rel_tol * std::abs(y[i]);
        acc += (v[i] / sc) * (v[i] / sc);
      }
      return std::sqrt(acc / static_cast<double>(v.size()));
    };
    const double d0 = scaled_norm(x, x);
    const double d1 = scaled_norm(k1_, x);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, b - t);
    tmp_ = x + h0 * k1_;
    model_.vector_field(tmp_, u, k2_);
    const double d2 = scaled_norm(k2_ - k1_, x) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min(100.0 * h0, h1);
  }

  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                          a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                          a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
  static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                          a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
  static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                          e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

  const PlantModel & model_;
  IntegratorOptions opt_;
  double h_{0.0};
  std::size_t steps_{0};
  Vector k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y1_, err_;
};

}  // namespace

Trajectory integrate(const PlantModel & model, const Vector & x0, const ControlSignal & u,
                     Interval t_span, const IntegratorOptions & options)
{
  check_span(x0, u, t_span);
  if (x0.size() != model.state_dim) { throw InvalidArgument("initial state has wrong dimension"); }
  if (!(options.rel_tol > 0.0) || !(options.abs_tol > 0.0)) {
    throw InvalidArgument("integration tolerances must be positive");
  }

  Trajectory traj(t_span.lo, x0, u.at(t_span.lo));
  if (t_span.hi == t_span.lo) { return traj; }

  DormandPrince stepper(model, options);
  Vector x = x0;
  for_each_piece(u, t_span, [&](double a, double b, const Vector & ui) {
    stepper.advance(a, x, b, ui, traj);
  });
  return traj;
}

Trajectory integrate(const PlantModel & model, const Vector & x0, const ControlSignal & u,
                     Interval t_span, double tol)
{
  return integrate(model, x0, u, t_span, IntegratorOptions{tol, tol, 1000000});
}

Trajectory integrate_rk4(const PlantModel & model, const Vector & x0, const ControlSignal & u,
                         Interval t_span, int substeps)
{
  check_span(x0, u, t_span);
  if (substeps < 1) { throw InvalidArgument("RK4 needs at least one substep per interval"); }

  const Eigen::Index n = model.state_dim;
  Vector k1(n), k2(n), k3(n), k4(n), tmp(n), k_end(n);
  Trajectory traj(t_span.lo, x0, u.at(t_span.lo));
  Vector x = x0;
  const auto & f = model.vector_field;

  for_each_piece(u, t_span, [&](double a, double b, const Vector & ui) {
    // Substep count scales with the covered fraction of a full interval.
    const int pieces =
      std::max(1, static_cast<int>(std::ceil(substeps * (b - a) / u.sampling - 1e-9)));
    const double h = (b - a) / pieces;
    for (int s = 0; s < pieces; ++s) {
      const double t = a + s * h;
      f(x, ui, k1);
      tmp = x + 0.5 * h * k1;
      f(tmp, ui, k2);
      tmp = x + 0.5 * h * k2;
      f(tmp, ui, k3);
      tmp = x + h * k3;
      f(tmp, ui, k4);
      Vector x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      f(x_next, ui, k_end);
      traj.append(s + 1 == pieces ? b : t + h, x_next, ui, k1, k_end);
      x = std::move(x_next);
    }
  });
  return traj;
}

double equilibrium_residual(const PlantModel & model)
{
  return model.eval(model.equilibrium_state, model.equilibrium_input).norm();
}

PlantModel augment_with_cost(const PlantModel & model, const StageCost & cost,
                             double penalty_weight)
{
  PlantModel aug = model;
  const Eigen::Index n = model.state_dim;
  aug.name = model.name + "+cost";
  aug.state_dim = n + 1;

  auto field = model.vector_field;
  auto box = model.state_constraints;
  auto stage = cost.evaluate;
  aug.vector_field = [field, box, stage, penalty_weight, n](const Vector & z, const Vector & u,
                                                            Vector & dz) {
    // head() of a VectorXd is not a VectorXd; copy into the plant's state type.
    thread_local Vector x;
    thread_local Vector dx;
    x = z.head(n);
    dx.resize(n);
    field(x, u, dx);
    dz.head(n) = dx;
    double running = stage(x, u);
    if (penalty_weight > 0.0) { running += penalty_weight * box.squared_violation(x); }
    dz[n] = running;
  };

  const double inf = std::numeric_limits<double>::infinity();
  aug.state_constraints.lower.conservativeResize(n + 1);
  aug.state_constraints.upper.conservativeResize(n + 1);
  aug.state_constraints.lower[n] = -inf;
  aug.state_constraints.upper[n] = inf;
  aug.equilibrium_state.conservativeResize(n + 1);
  aug.equilibrium_state[n] = 0.0;
  return aug;
}

}  // namespace ncsmpc
