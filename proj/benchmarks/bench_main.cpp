#include <benchmark/benchmark.h>

#include "riccati/cascade.hpp"
#include "riccati/grid.hpp"
#include "riccati/monte_carlo.hpp"

using namespace riccati;

static void BM_Philox(benchmark::State& state) {
  Substream s(1, 2);
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(s.exponential(i++));
}
BENCHMARK(BM_Philox);

static void BM_LeafCount(benchmark::State& state) {
  const CascadeParams params{1.5, 7};
  const ClockSource clocks = ClockSource::exponential();
  const int depth = static_cast<int>(state.range(0));
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sample_truncated_leaf_count(params, 2.0, depth, clocks, derive_stream(params, i++)));
  }
}
BENCHMARK(BM_LeafCount)->Arg(10)->Arg(20);

static void BM_Convolve(benchmark::State& state) {
  const UniformGrid g(8.0, 8.0 / static_cast<double>(state.range(0)));
  const GridFunction f = GridFunction::constant(g, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(convolve_kernel(f, 1.5, g));
}
BENCHMARK(BM_Convolve)->Arg(400)->Arg(800)->Arg(1600);

static void BM_PicardV0(benchmark::State& state) {
  const UniformGrid g(8.0, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(picard_v0(1.5, g, 5));
}
BENCHMARK(BM_PicardV0);

static void BM_IterateQn(benchmark::State& state) {
  const UniformGrid g(8.0, 0.01);
  const GridFunction q0 = GridFunction::constant(g, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(iterate_qn(3.0, g, 10, q0));
}
BENCHMARK(BM_IterateQn);

static void BM_VCurve(benchmark::State& state) {
  const UniformGrid g(8.0, 0.01);
  const GridFunction v0 = picard_v0(1.5, g, 5);
  const auto points = time_points(8.0, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_v_curve(1.5, points, 10, v0, {1000, 10, 3, 1}));
  }
}
BENCHMARK(BM_VCurve)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
