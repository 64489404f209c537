#include "ncsmpc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "ncsmpc/errors.hpp"

namespace ncsmpc {

namespace {

struct Pair
{
  Vector s;
  Vector y;
};

class FiniteDifferenceGradient
{
public:
  FiniteDifferenceGradient(const std::function<double(const Vector &)> & f, const Vector & lower,
                           const Vector & upper, double step)
  : f_(f), lower_(lower), upper_(upper), step_(step)
  {}

  Vector operator()(const Vector & x, double fx, bool central, int & evaluations) const
  {
    const Eigen::Index n = x.size();
    Vector g(n);
    Vector probe = x;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h    = step_;
      const bool room_up   = x[i] + 2 * h <= upper_[i];
      const bool room_down = x[i] - 2 * h >= lower_[i];
      const auto eval_at = [&](double xi) {
        probe[i] = xi;
        ++evaluations;
        return f_(probe);
      };
      if (central && room_up && room_down) {
        g[i] = (eval_at(x[i] + h) - eval_at(x[i] - h)) / (2 * h);
      } else if (central && room_up) {
        g[i] = (-3 * fx + 4 * eval_at(x[i] + h) - eval_at(x[i] + 2 * h)) / (2 * h);
      } else if (central && room_down) {
        g[i] = (3 * fx - 4 * eval_at(x[i] - h) + eval_at(x[i] - 2 * h)) / (2 * h);
      } else if (x[i] + h <= upper_[i]) {
        g[i] = (eval_at(x[i] + h) - fx) / h;
      } else {
        g[i] = (fx - eval_at(x[i] - h)) / h;
      }
      probe[i] = x[i];
    }
    return g;
  }

private:
  const std::function<double(const Vector &)> & f_;
  const Vector & lower_;
  const Vector & upper_;
  double step_;
};

double projected_gradient_norm(const Vector & x, const Vector & g, const Vector & lower,
                               const Vector & upper)
{
  return ((x - g).cwiseMax(lower).cwiseMin(upper) - x).lpNorm<Eigen::Infinity>();
}

/// 1 for variables free to move along -g, 0 for those pinned at a bound.
Vector free_mask(const Vector & x, const Vector & g, const Vector & lower, const Vector & upper)
{
  Vector mask = Vector::Ones(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double eps = 1e-12 * std::max(1.0, upper[i] - lower[i]);
    if ((x[i] <= lower[i] + eps && g[i] > 0) || (x[i] >= upper[i] - eps && g[i] < 0)) {
      mask[i] = 0.0;
    }
  }
  return mask;
}

/// Two-loop recursion restricted to the free subspace.
Vector lbfgs_direction(const Vector & g, const Vector & mask, const std::deque<Pair> & memory,
                       double fallback_scale)
{
  Vector q = g.cwiseProduct(mask);
  const std::size_t m = memory.size();
  std::vector<double> alpha(m, 0.0);
  std::vector<double> rho(m, 0.0);
  double scale = fallback_scale;
  bool have_scale = false;

  for (std::size_t k = m; k-- > 0;) {
    const Vector s = memory[k].s.cwiseProduct(mask);
    const Vector y = memory[k].y.cwiseProduct(mask);
    const double sy = s.dot(y);
    if (!(sy > 1e-14 * s.norm() * y.norm()) || sy <= 0.0) { continue; }
    rho[k] = 1.0 / sy;
    alpha[k] = rho[k] * s.dot(q);
    q -= alpha[k] * y;
    if (!have_scale) {
      scale = sy / y.squaredNorm();
      have_scale = true;
    }
  }
  Vector r = scale * q;
  for (std::size_t k = 0; k < m; ++k) {
    if (rho[k] == 0.0) { continue; }
    const Vector s = memory[k].s.cwiseProduct(mask);
    const Vector y = memory[k].y.cwiseProduct(mask);
    const double beta = rho[k] * y.dot(r);
    r += s * (alpha[k] - beta);
  }
  return -r.cwiseProduct(mask);
}

}  // namespace

BoxOptimizerResult minimize_box(const std::function<double(const Vector &)> & f, Vector x0,
                                const Vector & lower, const Vector & upper,
                                const BoxOptimizerOptions & options)
{
  if (x0.size() != lower.size() || x0.size() != upper.size()) {
    throw InvalidArgument("optimizer bounds and start point differ in size");
  }
  if ((lower.array() > upper.array()).any()) { throw InvalidArgument("empty optimizer box"); }
  if (!(options.tolerance > 0.0) || options.max_iterations < 1 || options.memory < 1 ||
      !(options.fd_step > 0.0))
  {
    throw InvalidArgument("invalid optimizer options");
  }

  BoxOptimizerResult res;
  const FiniteDifferenceGradient gradient(f, lower, upper, options.fd_step);

  Vector x = x0.cwiseMax(lower).cwiseMin(upper);
  double fx = f(x);
  ++res.evaluations;
  if (!std::isfinite(fx)) {
    res.x = x;
    res.value = fx;
    res.status = "objective not finite at start point";
    return res;
  }

  bool central = false;
  Vector g = gradient(x, fx, central, res.evaluations);
  double pg = projected_gradient_norm(x, g, lower, upper);
  const double pg_initial = pg;
  std::deque<Pair> memory;

  const auto threshold = [&](double value) {
    return options.tolerance * std::max(1.0, std::abs(value));
  };

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (!central && pg <= std::max(1e-3 * pg_initial, 100.0 * threshold(fx))) {
      central = true;
      g = gradient(x, fx, central, res.evaluations);
      pg = projected_gradient_norm(x, g, lower, upper);
    }
    if (pg <= threshold(fx)) {
      res.converged = true;
      res.status = "projected gradient below tolerance";
      break;
    }

    const Vector mask = free_mask(x, g, lower, upper);
    const double gmax = std::max(g.lpNorm<Eigen::Infinity>(), 1e-300);
    Vector d = lbfgs_direction(g, mask, memory, 0.1 / gmax);
    if (!(g.dot(d) < 0.0) || !d.allFinite()) {
      d = -(0.1 / gmax) * g.cwiseProduct(mask);
      memory.clear();
    }

    double t = 1.0;
    bool accepted = false;
    Vector x_new;
    double f_new = fx;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = (x + t * d).cwiseMax(lower).cwiseMin(upper);
      f_new = f(x_new);
      ++res.evaluations;
      const double decrease = g.dot(x_new - x);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * decrease) {
        accepted = (x_new - x).lpNorm<Eigen::Infinity>() > 0.0;
        break;
      }
      t *= 0.5;
    }

    if (!accepted) {
      if (!central) {
        central = true;
        memory.clear();
        g = gradient(x, fx, central, res.evaluations);
        pg = projected_gradient_norm(x, g, lower, upper);
        continue;
      }
      if (!memory.empty()) {
        memory.clear();
        continue;
      }
      // No representable decrease along steepest descent: accept small projected
      // gradients as stationary to working precision.
      if (pg <= 100.0 * threshold(fx)) {
        res.converged = true;
        res.status = "no further decrease at working precision";
      } else {
        res.status = "line search failed";
      }
      break;
    }

    Vector g_new = gradient(x_new, f_new, central, res.evaluations);
    Pair pair{x_new - x, g_new - g};
    if (pair.s.dot(pair.y) > 1e-14 * pair.s.norm() * pair.y.norm()) {
      memory.push_back(std::move(pair));
      if (static_cast<int>(memory.size()) > options.memory) { memory.pop_front(); }
    }
    x = std::move(x_new);
    fx = f_new;
    g = std::move(g_new);
    pg = projected_gradient_norm(x, g, lower, upper);
  }

  if (res.status.empty()) { res.status = "iteration limit reached"; }
  res.x = std::move(x);
  res.value = fx;
  res.projected_gradient_norm = pg;
  return res;
}

}  // namespace ncsmpc
