#include <cmath>

#include <gtest/gtest.h>

#include "models.hpp"
#include "ncsmpc/cstr.hpp"
#include "ncsmpc/dynamics.hpp"
#include "ncsmpc/errors.hpp"

using namespace ncsmpc;
using ncsmpc::testing::quadratic_cost;
using ncsmpc::testing::scalar_linear;

namespace {

ControlSignal zero_input(double sampling, std::size_t n)
{
  return ControlSignal::constant(0.0, sampling, n, Vector::Zero(1));
}

}  // namespace

TEST(CstrVectorField, NearEquilibriumAtTarget)
{
  const Vector f = cstr_vector_field(cstr_target_state(), 300.0);
  EXPECT_NEAR(f[0], 3.4e-5, 1e-5);
  EXPECT_LT(std::abs(f[1]), 1e-2);
  EXPECT_LE(f.norm(), 0.05);
}

TEST(CstrVectorField, NoReactionAtZeroConcentration)
{
  const CstrParameters p;
  const Vector f = cstr_vector_field(Vector{{0.0, 350.0}}, 300.0, p);
  EXPECT_DOUBLE_EQ(f[0], p.q * p.x1f / p.V);
}

TEST(CstrVectorField, CoolantInputEntersLinearly)
{
  const Vector a = cstr_vector_field(cstr_target_state(), 300.0);
  const Vector b = cstr_vector_field(cstr_target_state(), 350.0);
  EXPECT_NEAR(b[1] - a[1], 5e4 / 23900.0 * 50.0, 1e-9);
  EXPECT_NEAR(b[1] - a[1], 104.6, 0.05);
  EXPECT_EQ(a[0], b[0]);
}

TEST(CstrVectorField, RejectsNonPositiveTemperature)
{
  EXPECT_THROW(cstr_vector_field(Vector{{0.5, 0.0}}, 300.0), DomainError);
  EXPECT_THROW(cstr_vector_field(Vector{{0.5, -3.0}}, 300.0), DomainError);
  CstrParameters bad;
  bad.V = 0.0;
  EXPECT_THROW(make_cstr_model(bad), InvalidArgument);
}

TEST(CstrStageCost, Values)
{
  EXPECT_EQ(cstr_stage_cost(cstr_target_state(), 300.0), 0.0);
  EXPECT_NEAR(cstr_stage_cost(Vector{{0.6, 350.0}}, 300.0), 4900.0, 1e-8);
  EXPECT_NEAR(cstr_stage_cost(Vector{{0.5, 351.0}}, 310.0), 1.1, 1e-12);
  const StageCost c = make_cstr_stage_cost();
  for (double x1 : {0.0, 0.3, 0.9}) {
    for (double x2 : {300.0, 350.0, 420.0}) {
      for (double u : {250.0, 300.0, 450.0}) { EXPECT_GE(c(Vector{{x1, x2}}, Vector{{u}}), 0.0); }
    }
  }
}

TEST(EquilibriumResidual, CstrTarget)
{
  const PlantModel m = make_cstr_model();
  EXPECT_LE(equilibrium_residual(m), 0.05);
  EXPECT_EQ(equilibrium_residual(scalar_linear(-1.0, 0.0)), 0.0);

  PlantModel off = m;
  off.equilibrium_state = Vector{{0.35, 370.0}};
  EXPECT_GT(equilibrium_residual(off), 1.0);
}

TEST(Integrate, ExponentialDecay)
{
  const PlantModel m = scalar_linear(-1.0, 0.0);
  const Trajectory tr = integrate(m, Vector::Ones(1), zero_input(0.1, 10), {0.0, 1.0}, 1e-8);
  EXPECT_NEAR(tr.back()[0], std::exp(-1.0), 1e-6);
  EXPECT_NEAR(tr.end_time(), 1.0, 1e-15);
  EXPECT_NEAR(tr.dense_eval(0.537)[0], std::exp(-0.537), 1e-6);
}

TEST(Integrate, EmptySpanReturnsInitialState)
{
  const PlantModel m = make_cstr_model();
  const Vector x0{{0.35, 370.0}};
  const ControlSignal u = ControlSignal::constant(0.0, 0.01, 5, cstr_target_input());
  const Trajectory tr = integrate(m, x0, u, {0.02, 0.02}, 1e-6);
  ASSERT_EQ(tr.size(), 1u);
  EXPECT_EQ(tr.front(), x0);
}

TEST(Integrate, CstrDriftFromTargetIsSmall)
{
  const PlantModel m = make_cstr_model();
  const ControlSignal u = ControlSignal::constant(0.0, 0.01, 100, cstr_target_input());
  const Trajectory tr = integrate(m, cstr_target_state(), u, {0.0, 1.0}, 1e-6);
  EXPECT_LE((tr.back() - cstr_target_state()).norm(), 0.05);
}

TEST(Integrate, RestartsAtInputSwitches)
{
  // dx/dt = u with a step from 0 to 1 at t = 0.35: x(1) = 0.65 exactly.
  const PlantModel m = scalar_linear(0.0, 1.0);
  ControlSignal u = zero_input(0.05, 20);
  for (std::size_t i = 7; i < 20; ++i) { u.values[i][0] = 1.0; }
  const Trajectory tr = integrate(m, Vector::Zero(1), u, {0.0, 1.0}, 1e-6);
  EXPECT_NEAR(tr.back()[0], 0.65, 1e-12);
  bool hit_switch = false;
  for (double t : tr.sample_times()) { hit_switch |= std::abs(t - 0.35) < 1e-12; }
  EXPECT_TRUE(hit_switch);
}

TEST(Integrate, AdditiveOverSubintervals)
{
  const PlantModel m = make_cstr_model();
  ControlSignal u = ControlSignal::constant(0.0, 0.01, 50, cstr_target_input());
  for (std::size_t i = 0; i < u.size(); ++i) { u.values[i][0] = 300.0 + 40.0 * std::sin(0.3 * i); }
  const Vector x0{{0.35, 370.0}};
  const double tol = 1e-6;
  const Trajectory whole = integrate(m, x0, u, {0.0, 0.5}, tol);
  const Trajectory first = integrate(m, x0, u, {0.0, 0.23}, tol);
  const Trajectory second = integrate(m, first.back(), u, {0.23, 0.5}, tol);
  const Vector diff = whole.back() - second.back();
  EXPECT_LE(std::abs(diff[0]), 10 * tol * std::max(1.0, std::abs(whole.back()[0])));
  EXPECT_LE(std::abs(diff[1]), 10 * tol * whole.back()[1]);
}

TEST(Integrate, BitIdenticalOnRepeat)
{
  const PlantModel m = make_cstr_model();
  const ControlSignal u = ControlSignal::constant(0.0, 0.01, 30, Vector{{320.0}});
  const Trajectory a = integrate(m, Vector{{0.35, 370.0}}, u, {0.0, 0.3}, 1e-6);
  const Trajectory b = integrate(m, Vector{{0.35, 370.0}}, u, {0.0, 0.3}, 1e-6);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.sample_times()[i], b.sample_times()[i]);
    EXPECT_EQ(a.states()[i], b.states()[i]);
  }
}

TEST(Integrate, RejectsUncoveredSpan)
{
  const PlantModel m = scalar_linear(-1.0, 0.0);
  EXPECT_THROW(integrate(m, Vector::Ones(1), zero_input(0.1, 5), {0.0, 1.0}, 1e-6), InvalidArgument);
  EXPECT_THROW(integrate(m, Vector::Ones(1), zero_input(0.1, 5), {0.3, 0.1}, 1e-6), InvalidArgument);
}

TEST(IntegrateRk4, FourthOrderConvergence)
{
  const PlantModel m = scalar_linear(-1.0, 0.0);
  const double exact = std::exp(-1.0);
  const double e1 = std::abs(integrate_rk4(m, Vector::Ones(1), zero_input(0.1, 10), {0.0, 1.0}, 1).back()[0] - exact);
  const double e2 = std::abs(integrate_rk4(m, Vector::Ones(1), zero_input(0.05, 20), {0.0, 1.0}, 1).back()[0] - exact);
  EXPECT_GE(e1 / e2, 16.0 * 0.95);
  EXPECT_GT(e2, 0.0);
}

TEST(AugmentWithCost, IntegratesStageCost)
{
  // dx/dt = 0, l = x^2 + u^2, x0 = 1, u = 0 over 2 time units.
  const PlantModel m = scalar_linear(0.0, 0.0);
  const PlantModel aug = augment_with_cost(m, quadratic_cost(), 1e6);
  ASSERT_EQ(aug.state_dim, 2);
  const Trajectory tr = integrate(aug, Vector{{1.0, 0.0}}, zero_input(0.1, 20), {0.0, 2.0}, 1e-8);
  EXPECT_NEAR(tr.back()[1], 2.0, 1e-10);
}

TEST(AugmentWithCost, PenalizesStateBoxViolation)
{
  PlantModel m = scalar_linear(0.0, 0.0);
  m.state_constraints = ncsmpc::testing::scalar_box(-0.5, 0.5);
  StageCost zero;
  zero.evaluate = [](const Vector &, const Vector &) { return 0.0; };
  const PlantModel aug = augment_with_cost(m, zero, 10.0);
  const Trajectory tr = integrate(aug, Vector{{1.0, 0.0}}, zero_input(0.1, 10), {0.0, 1.0}, 1e-8);
  EXPECT_NEAR(tr.back()[1], 10.0 * 0.25, 1e-10);
}

TEST(Box, ContainsAndViolation)
{
  const Box b{Vector{{0.0, 0.0}}, Vector{{1.0, std::numeric_limits<double>::infinity()}}};
  EXPECT_TRUE(b.contains(Vector{{0.5, 1e9}}));
  EXPECT_FALSE(b.contains(Vector{{1.5, 1.0}}));
  EXPECT_NEAR(b.squared_violation(Vector{{1.5, -2.0}}), 0.25 + 4.0, 1e-15);
  EXPECT_EQ(b.squared_violation(Vector{{0.2, 3.0}}), 0.0);
}

TEST(PlantModelValidate, RejectsEmptyBoxes)
{
  PlantModel m = scalar_linear(-1.0, 1.0);
  EXPECT_NO_THROW(m.validate());
  m.input_constraints = ncsmpc::testing::scalar_box(1.0, -1.0);
  EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(ControlSignal, ShiftSliceAndLookup)
{
  ControlSignal u{0.0, 0.1, {}};
  for (int i = 0; i < 5; ++i) { u.values.push_back(Vector::Constant(1, i)); }
  EXPECT_EQ(u.at(0.25)[0], 2.0);
  EXPECT_EQ(u.at(0.3)[0], 3.0);  // switch points belong to the later interval
  EXPECT_THROW(u.at(0.6), InvalidArgument);

  const ControlSignal s = u.shifted(2, Vector::Constant(1, -1.0));
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s.values[0][0], 2.0);
  EXPECT_EQ(s.values[4][0], -1.0);

  const ControlSignal sl = u.slice(1, 2);
  EXPECT_NEAR(sl.start_time, 0.1, 1e-15);
  EXPECT_EQ(sl.values[1][0], 2.0);

  const ControlSignal back = ControlSignal::unflatten(0.0, 0.1, 1, u.flatten());
  EXPECT_TRUE(back == u);
}
