#include <benchmark/benchmark.h>

#include "ncsmpc/bounds.hpp"

using namespace ncsmpc;

static void BM_AlphaContinuous(benchmark::State & state)
{
  double d = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(alpha_continuous({2.5, 1.3}, {1.0, d}));
    d = d < 0.9 ? d + 1e-6 : 0.1;
  }
}
BENCHMARK(BM_AlphaContinuous);

static void BM_AlphaDiscrete(benchmark::State & state)
{
  const int k = static_cast<int>(state.range(0));
  for (auto _ : state) { benchmark::DoNotOptimize(alpha_discrete({2.0, 1.0}, {0.1, 20, 5, k})); }
  state.SetComplexityN(20LL << k);
}
BENCHMARK(BM_AlphaDiscrete)->DenseRange(0, 12, 4)->Complexity(benchmark::oN);

static void BM_StabilityGrid(benchmark::State & state)
{
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(stability_grid(1.0, 0.5, {1.0, 4.0}, {0.01, 0.99}, n));
  }
}
BENCHMARK(BM_StabilityGrid)->Arg(50)->Arg(200);
