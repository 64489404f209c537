#include "ncsmpc/mpc.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "ncsmpc/errors.hpp"
#include "ncsmpc/log.hpp"
#include "ncsmpc/optimizer.hpp"

namespace ncsmpc {

namespace {

std::size_t whole_steps(double duration, double sampling, const char * what)
{
  const double cells = duration / sampling;
  const double rounded = std::round(cells);
  if (!std::isfinite(cells) || rounded < 0.0 || std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells))
  {
    std::ostringstream os;
    os << what << " " << duration << " is not a whole number of sampling intervals ("
       << sampling << ")";
    throw InvalidArgument(os.str());
  }
  return static_cast<std::size_t>(rounded);
}

/// Affine map between inputs and optimizer coordinates, u = offset + scale * z.
struct InputScaling
{
  Vector offset;
  Vector scale;
  Vector z_lower;
  Vector z_upper;

  InputScaling(const PlantModel & model)
  {
    const Eigen::Index m = model.input_dim;
    offset.resize(m);
    scale.resize(m);
    z_lower.resize(m);
    z_upper.resize(m);
    const double inf = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      const double lo = model.input_constraints.lower[j];
      const double hi = model.input_constraints.upper[j];
      if (std::isfinite(lo) && std::isfinite(hi) && hi > lo) {
        offset[j] = lo;
        scale[j] = hi - lo;
        z_lower[j] = 0.0;
        z_upper[j] = 1.0;
      } else {
        offset[j] = model.equilibrium_input[j];
        scale[j] = 1.0;
        z_lower[j] = std::isfinite(lo) ? lo - offset[j] : -inf;
        z_upper[j] = std::isfinite(hi) ? hi - offset[j] : inf;
      }
    }
  }

  Vector to_z(const Vector & flat, std::size_t count) const
  {
    const Eigen::Index m = offset.size();
    Vector z(flat.size());
    for (std::size_t i = 0; i < count; ++i) {
      const Eigen::Index k = static_cast<Eigen::Index>(i) * m;
      z.segment(k, m) = (flat.segment(k, m) - offset).cwiseQuotient(scale);
    }
    return z;
  }

  Vector to_u(const Vector & z, std::size_t count) const
  {
    const Eigen::Index m = offset.size();
    Vector flat(z.size());
    for (std::size_t i = 0; i < count; ++i) {
      const Eigen::Index k = static_cast<Eigen::Index>(i) * m;
      flat.segment(k, m) = offset + scale.cwiseProduct(z.segment(k, m));
    }
    return flat;
  }

  Vector replicate(const Vector & v, std::size_t count) const
  {
    Vector out(v.size() * static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
      out.segment(static_cast<Eigen::Index>(i) * v.size(), v.size()) = v;
    }
    return out;
  }
};

}  // namespace

void OcpSpec::validate() const
{
  if (!(control_sampling > 0.0) || !std::isfinite(control_sampling)) {
    throw InvalidArgument("control sampling must be positive");
  }
  if (!(prediction_horizon >= 0.0) || !std::isfinite(prediction_horizon)) {
    throw InvalidArgument("prediction horizon must be nonnegative");
  }
  whole_steps(prediction_horizon, control_sampling, "prediction horizon");
  if (!(optimizer_tolerance > 0.0) || !(integration_tolerance > 0.0)) {
    throw InvalidArgument("tolerances must be positive");
  }
  if (!(state_penalty_weight >= 0.0)) {
    throw InvalidArgument("state penalty weight must be nonnegative");
  }
  if (shooting_substeps < 1 || max_iterations < 1) {
    throw InvalidArgument("shooting substeps and iteration limit must be positive");
  }
  if (!stage_cost.evaluate) { throw InvalidArgument("OCP has no stage cost"); }
}

std::size_t OcpSpec::horizon_steps() const
{
  return whole_steps(prediction_horizon, control_sampling, "prediction horizon");
}

std::size_t OcpSpec::steps_for(double duration) const
{
  return whole_steps(duration, control_sampling, "duration");
}

double cost_functional(const PlantModel & model, const OcpSpec & spec, const Vector & x0,
                       const ControlSignal & u)
{
  spec.validate();
  if (spec.prediction_horizon == 0.0) { return 0.0; }
  const PlantModel aug = augment_with_cost(model, spec.stage_cost, spec.state_penalty_weight);
  Vector z0(model.state_dim + 1);
  z0.head(model.state_dim) = x0;
  z0[model.state_dim] = 0.0;
  const Interval span{u.start_time, u.start_time + spec.prediction_horizon};
  const Trajectory traj = integrate(aug, z0, u, span, spec.integration_tolerance);
  return traj.back()[model.state_dim];
}

double shooting_cost(const PlantModel & model, const OcpSpec & spec, const Vector & x0,
                     const ControlSignal & u)
{
  const std::size_t steps = spec.horizon_steps();
  if (u.size() < steps) { throw InvalidArgument("control signal shorter than the horizon"); }
  const Eigen::Index n = model.state_dim;
  const auto & f = model.vector_field;
  const auto & ell = spec.stage_cost.evaluate;
  const Box & box = model.state_constraints;
  const double w = spec.state_penalty_weight;
  const double h = spec.control_sampling / spec.shooting_substeps;

  const auto running = [&](const Vector & x, const Vector & ui) {
    double r = ell(x, ui);
    if (w > 0.0) { r += w * box.squared_violation(x); }
    return r;
  };

  Vector x = x0;
  Vector k1(n), k2(n), k3(n), k4(n), tmp(n);
  double J = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const Vector & ui = u.values[i];
    for (int s = 0; s < spec.shooting_substeps; ++s) {
      f(x, ui, k1);
      const double c1 = running(x, ui);
      tmp = x + 0.5 * h * k1;
      f(tmp, ui, k2);
      const double c2 = running(tmp, ui);
      tmp = x + 0.5 * h * k2;
      f(tmp, ui, k3);
      const double c3 = running(tmp, ui);
      tmp = x + h * k3;
      f(tmp, ui, k4);
      const double c4 = running(tmp, ui);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      J += (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    }
  }
  return J;
}

OcpSolution solve_ocp(const PlantModel & model, const OcpSpec & spec, const Vector & x0,
                      const std::optional<ControlSignal> & warm_start, double start_time)
{
  spec.validate();
  if (!x0.allFinite() || x0.size() != model.state_dim) {
    throw InvalidArgument("OCP initial state must be finite with the model's dimension");
  }
  const std::size_t steps = spec.horizon_steps();
  if (steps == 0) { throw InvalidArgument("OCP needs a positive prediction horizon"); }
  const Eigen::Index m = model.input_dim;

  ControlSignal initial;
  if (warm_start) {
    if (warm_start->size() < steps || warm_start->input_dim() != m) {
      throw InvalidArgument("warm start does not match the horizon or input dimension");
    }
    initial = warm_start->slice(0, steps);
  } else {
    initial = ControlSignal::constant(start_time, spec.control_sampling, steps,
                                      model.equilibrium_input);
  }
  initial.start_time = start_time;
  initial.sampling = spec.control_sampling;
  initial.project(model.input_constraints.lower, model.input_constraints.upper);

  const InputScaling scaling(model);
  const Vector z_lower = scaling.replicate(scaling.z_lower, steps);
  const Vector z_upper = scaling.replicate(scaling.z_upper, steps);

  ControlSignal work = initial;
  const auto objective = [&](const Vector & z) {
    const Vector flat = scaling.to_u(z, steps);
    for (std::size_t i = 0; i < steps; ++i) {
      work.values[i] = flat.segment(static_cast<Eigen::Index>(i) * m, m);
    }
    try {
      return shooting_cost(model, spec, x0, work);
    } catch (const DomainError &) {
      return std::numeric_limits<double>::infinity();
    }
  };

  BoxOptimizerOptions opt;
  opt.tolerance = spec.optimizer_tolerance;
  opt.max_iterations = spec.max_iterations;
  const BoxOptimizerResult res =
    minimize_box(objective, scaling.to_z(initial.flatten(), steps), z_lower, z_upper, opt);

  OcpSolution sol;
  sol.control =
    ControlSignal::unflatten(start_time, spec.control_sampling, m, scaling.to_u(res.x, steps));
  sol.control.project(model.input_constraints.lower, model.input_constraints.upper);
  sol.shooting_value = res.value;
  sol.converged = res.converged;
  sol.iterations = res.iterations;
  sol.evaluations = res.evaluations;
  sol.projected_gradient_norm = res.projected_gradient_norm;
  sol.value = cost_functional(model, spec, x0, sol.control);
  sol.predicted_trajectory =
    integrate(model, x0, sol.control, {start_time, start_time + spec.prediction_horizon},
              spec.integration_tolerance);
  if (!res.converged) {
    log::warn("OCP solve did not converge (", res.status, ", |pg|=", res.projected_gradient_norm,
              ", J=", res.value, ")");
  }
  return sol;
}

std::optional<double> RunRecords::value_after(std::size_t n) const
{
  if (n + 1 < steps.size()) { return steps[n + 1].value; }
  if (n + 1 == steps.size()) { return final_value; }
  throw InvalidArgument("step index out of range");
}

double stage_integral_along(const PlantModel & model, const StageCost & cost, const Vector & x0,
                            const ControlSignal & u, Interval span, double tol)
{
  if (span.hi == span.lo) { return 0.0; }
  const PlantModel aug = augment_with_cost(model, cost, 0.0);
  Vector z0(model.state_dim + 1);
  z0.head(model.state_dim) = x0;
  z0[model.state_dim] = 0.0;
  return integrate(aug, z0, u, span, tol).back()[model.state_dim];
}

RunRecords mpc_closed_loop(const PlantModel & model, const OcpSpec & spec, const Vector & x0,
                           const std::vector<double> & horizon_schedule, double duration)
{
  model.validate();
  spec.validate();
  if (!(duration >= 0.0)) { throw InvalidArgument("duration must be nonnegative"); }
  const std::size_t horizon = spec.horizon_steps();

  RunRecords run;
  run.trajectory = Trajectory(0.0, x0, model.equilibrium_input);
  Vector x = x0;
  std::size_t elapsed = 0;  // in sampling intervals
  std::optional<ControlSignal> warm;
  const double eps = 1e-9 * spec.control_sampling;

  for (std::size_t n = 0; static_cast<double>(elapsed) * spec.control_sampling < duration - eps;
       ++n) {
    if (n >= horizon_schedule.size()) {
      throw InvalidArgument("horizon schedule does not cover the requested duration");
    }
    const std::size_t delta_steps = spec.steps_for(horizon_schedule[n]);
    if (delta_steps == 0 || delta_steps > horizon) {
      std::ostringstream os;
      os << "control horizon " << horizon_schedule[n] << " at step " << n
         << " must lie in (0, T]";
      throw InvalidArgument(os.str());
    }
    const double t = static_cast<double>(elapsed) * spec.control_sampling;

    OcpSolution sol;
    try {
      sol = solve_ocp(model, spec, x, warm, t);
    } catch (const std::exception & e) {
      std::ostringstream os;
      os << "closed loop step " << n << " (t=" << t << "): " << e.what();
      throw IntegrationError(os.str());
    }

    StepRecord rec;
    rec.index = n;
    rec.time = t;
    rec.state = x;
    rec.value = sol.value;
    rec.converged = sol.converged;
    rec.delta = static_cast<double>(delta_steps) * spec.control_sampling;
    rec.applied = sol.control.slice(0, delta_steps);

    const double t_next = static_cast<double>(elapsed + delta_steps) * spec.control_sampling;
    const Trajectory piece =
      integrate(model, x, rec.applied, {t, t_next}, spec.integration_tolerance);
    rec.stage_integral = stage_integral_along(model, spec.stage_cost, x, rec.applied, {t, t_next},
                                              spec.integration_tolerance);
    run.trajectory.extend(piece);
    x = piece.back();
    log::info("step ", n, " t=", t, " V=", sol.value, " delta=", rec.delta,
              " iters=", sol.iterations);

    warm = sol.control.shifted(delta_steps, model.equilibrium_input);
    elapsed += delta_steps;
    run.steps.push_back(std::move(rec));
  }

  run.final_time = static_cast<double>(elapsed) * spec.control_sampling;
  run.final_state = x;
  const OcpSolution last = solve_ocp(model, spec, x, warm, run.final_time);
  run.final_value = last.value;
  run.final_converged = last.converged;
  return run;
}

std::vector<double> random_horizon_schedule(double lo, double hi, double sampling,
                                            double duration, std::uint64_t seed)
{
  if (!(sampling > 0.0) || !(lo > 0.0) || !(hi >= lo)) {
    throw InvalidArgument("random schedule needs 0 < lo <= hi and positive sampling");
  }
  const auto first = static_cast<long long>(std::ceil(lo / sampling - 1e-9));
  const auto last  = static_cast<long long>(std::floor(hi / sampling + 1e-9));
  if (last < first || first < 1) {
    throw InvalidArgument("no sampling-grid multiple inside the requested horizon range");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long long> pick(first, last);
  std::vector<double> schedule;
  long long covered = 0;
  const auto needed = static_cast<long long>(std::ceil(duration / sampling - 1e-9));
  while (covered < needed) {
    const long long k = pick(rng);
    schedule.push_back(static_cast<double>(k) * sampling);
    covered += k;
  }
  return schedule;
}

}  // namespace ncsmpc
