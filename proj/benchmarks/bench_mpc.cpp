#include <benchmark/benchmark.h>

#include "ncsmpc/cstr.hpp"
#include "ncsmpc/mpc.hpp"

using namespace ncsmpc;

namespace {

OcpSpec cstr_spec()
{
  OcpSpec s;
  s.prediction_horizon = 0.3;
  s.control_sampling = 0.01;
  s.stage_cost = make_cstr_stage_cost();
  return s;
}

}  // namespace

static void BM_IntegrateCstr(benchmark::State & state)
{
  const PlantModel m = make_cstr_model();
  const ControlSignal u = ControlSignal::constant(0.0, 0.01, 30, Vector{{320.0}});
  const Vector x0{{0.35, 370.0}};
  for (auto _ : state) { benchmark::DoNotOptimize(integrate(m, x0, u, {0.0, 0.3}, 1e-6)); }
}
BENCHMARK(BM_IntegrateCstr);

static void BM_ShootingCost(benchmark::State & state)
{
  const PlantModel m = make_cstr_model();
  const OcpSpec s = cstr_spec();
  const ControlSignal u = ControlSignal::constant(0.0, 0.01, 30, Vector{{320.0}});
  const Vector x0{{0.35, 370.0}};
  for (auto _ : state) { benchmark::DoNotOptimize(shooting_cost(m, s, x0, u)); }
}
BENCHMARK(BM_ShootingCost);

static void BM_SolveOcpCold(benchmark::State & state)
{
  const PlantModel m = make_cstr_model();
  const OcpSpec s = cstr_spec();
  const Vector x0{{0.35, 370.0}};
  for (auto _ : state) { benchmark::DoNotOptimize(solve_ocp(m, s, x0)); }
}
BENCHMARK(BM_SolveOcpCold)->Unit(benchmark::kMillisecond);
