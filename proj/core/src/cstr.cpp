#include "ncsmpc/cstr.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ncsmpc/errors.hpp"

namespace ncsmpc {

namespace {

constexpr double kStateWeight = (350.0 / 0.5) * (350.0 / 0.5);
constexpr double kInputWeight = 1e-3;

void cstr_rhs(const CstrParameters & p, double x1, double x2, double u, double & dx1, double & dx2)
{
  if (!(x2 > 0.0)) {
    std::ostringstream os;
    os << "CSTR temperature must be positive (x2=" << x2 << ")";
    throw DomainError(os.str());
  }
  const double reaction = p.k0 * x1 * std::exp(-p.Ea / x2);
  dx1 = p.q * (p.x1f - x1) / p.V - reaction;
  dx2 = p.q * (p.x2f - x2) / p.V + p.h / (p.rho * p.c) * reaction +
        p.alpha_ht / (p.V * p.rho * p.c) * (u - x2);
}

}  // namespace

void CstrParameters::validate() const
{
  for (double v : {q, V, k0, Ea, h, rho, c, alpha_ht, x1f, x2f}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("CSTR parameters must be finite and strictly positive");
    }
  }
}

Vector cstr_vector_field(const Vector & x, double u, const CstrParameters & p)
{
  if (x.size() != 2) { throw InvalidArgument("CSTR state must have two components"); }
  Vector dx(2);
  cstr_rhs(p, x[0], x[1], u, dx[0], dx[1]);
  return dx;
}

double cstr_stage_cost(const Vector & x, double u)
{
  const double d1 = x[0] - 0.5;
  const double d2 = x[1] - 350.0;
  const double du = u - 300.0;
  return kStateWeight * d1 * d1 + d2 * d2 + kInputWeight * du * du;
}

PlantModel make_cstr_model(const CstrParameters & p)
{
  p.validate();
  const double inf = std::numeric_limits<double>::infinity();
  PlantModel model;
  model.name = "cstr";
  model.state_dim = 2;
  model.input_dim = 1;
  model.vector_field = [p](const Vector & x, const Vector & u, Vector & dx) {
    cstr_rhs(p, x[0], x[1], u[0], dx[0], dx[1]);
  };
  model.state_constraints = Box{Vector{{0.0, 0.0}}, Vector{{1.0, inf}}};
  model.input_constraints = Box{Vector{{250.0}}, Vector{{450.0}}};
  model.equilibrium_state = cstr_target_state();
  model.equilibrium_input = cstr_target_input();
  return model;
}

StageCost make_cstr_stage_cost()
{
  StageCost cost;
  cost.evaluate = [](const Vector & x, const Vector & u) { return cstr_stage_cost(x, u[0]); };
  // The input term vanishes at u = u*, which lies inside U.
  cost.evaluate_min_over_inputs = [](const Vector & x) { return cstr_stage_cost(x, 300.0); };
  return cost;
}

}  // namespace ncsmpc
