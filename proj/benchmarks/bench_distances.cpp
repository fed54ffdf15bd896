// Temporal-distance kernel costs: the DTW O(n^2) vs FFT O(n log n) gap is
// what drives the full-scale switch to spectral distances.

#include <benchmark/benchmark.h>

#include <vector>

#include "odsage/graphs.hpp"
#include "odsage/rng.hpp"

namespace {

std::vector<double> random_series(int len, uint64_t seed) {
  odsage::Rng rng(seed);
  std::vector<double> s(len);
  for (double& v : s) v = rng.poisson(3.0);
  return s;
}

void BM_DtwDistance(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  const auto a = random_series(len, 1);
  const auto b = random_series(len, 2);
  for (auto _ : state) benchmark::DoNotOptimize(odsage::dtw_distance(a, b));
  state.SetComplexityN(len);
}
BENCHMARK(BM_DtwDistance)->RangeMultiplier(2)->Range(64, 2048)->Complexity();

void BM_FftDistance(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  const auto a = random_series(len, 1);
  const auto b = random_series(len, 2);
  for (auto _ : state) benchmark::DoNotOptimize(odsage::fft_distance(a, b));
  state.SetComplexityN(len);
}
BENCHMARK(BM_FftDistance)->RangeMultiplier(2)->Range(64, 2048)->Complexity();

void BM_TemporalMatrixDtw(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<std::vector<double>> series(n);
  for (int i = 0; i < n; ++i) series[i] = random_series(128, i);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        odsage::temporal_distance_matrix(series, odsage::TemporalMethod::dtw));
}
BENCHMARK(BM_TemporalMatrixDtw)->Arg(32)->Arg(64)->Arg(128);

void BM_TemporalMatrixFft(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<std::vector<double>> series(n);
  for (int i = 0; i < n; ++i) series[i] = random_series(128, i);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        odsage::temporal_distance_matrix(series, odsage::TemporalMethod::fft));
}
BENCHMARK(BM_TemporalMatrixFft)->Arg(32)->Arg(64)->Arg(128)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
