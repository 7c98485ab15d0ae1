// Serial reference kernels against their OpenMP versions.
//   ./cocoedit_bench --benchmark_filter=Ssim

#include <random>

#include <benchmark/benchmark.h>

#include "oracles.hpp"

#include "cocoedit/grid.hpp"
#include "cocoedit/metrics.hpp"

using namespace cocoedit;

namespace {

struct Inputs {
  Grid2D a, b;
  EditMask region;
};

Inputs make_inputs(std::size_t n) {
  std::mt19937_64 rng(n);
  Inputs in{oracle::random_grid(rng, n, n), oracle::random_grid(rng, n, n),
            oracle::random_mask(rng, n, n, 0.7)};
  return in;
}

void BM_ConvolveSerial(benchmark::State& st) {
  const auto in = make_inputs(st.range(0));
  const auto w = gaussian_window();
  for (auto _ : st) benchmark::DoNotOptimize(serial::convolve_same(in.a, w));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}

void BM_ConvolveOpenMP(benchmark::State& st) {
  const auto in = make_inputs(st.range(0));
  const auto w = gaussian_window();
  for (auto _ : st) benchmark::DoNotOptimize(convolve_same(in.a, w));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}

void BM_SsimSerial(benchmark::State& st) {
  const auto in = make_inputs(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(serial::masked_ssim(in.a, in.b, in.region));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}

void BM_SsimOpenMP(benchmark::State& st) {
  const auto in = make_inputs(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(masked_ssim(in.a, in.b, in.region));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}

}  // namespace

BENCHMARK(BM_ConvolveSerial)->Arg(64)->Arg(256)->Arg(512)->UseRealTime();
BENCHMARK(BM_ConvolveOpenMP)->Arg(64)->Arg(256)->Arg(512)->UseRealTime();
BENCHMARK(BM_SsimSerial)->Arg(64)->Arg(256)->Arg(512)->UseRealTime();
BENCHMARK(BM_SsimOpenMP)->Arg(64)->Arg(256)->Arg(512)->UseRealTime();

BENCHMARK_MAIN();
