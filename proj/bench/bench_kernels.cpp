// Serial reference vs OpenMP kernels. Run with --benchmark_counters_tabular=true.

#include <benchmark/benchmark.h>

#include <random>

#include "adaptsr/calibration.hpp"
#include "adaptsr/gating.hpp"
#include "adaptsr/parallel.hpp"
#include "adaptsr/quality.hpp"
#include "adaptsr/simharness.hpp"

using namespace adaptsr;

namespace {

GrayImage noise(std::size_t w, std::size_t h, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(w * h);
  for (auto& v : px) v = u(g);
  return GrayImage(w, h, std::move(px));
}

const std::vector<PredictionRecord>& stream() {
  static const auto recs = sample_stream(Scenario{}, 1429, 24, 42);
  return recs;
}

// Thread count for the parallel variants: 0 keeps the runtime default.
void threads_from(const benchmark::State& state) {
  set_num_threads(static_cast<int>(state.range(1)));
}

void BM_LaplacianSerial(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto img = noise(side, side, 1);
  for (auto _ : state) benchmark::DoNotOptimize(reference::laplacian_variance(img));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}

void BM_LaplacianParallel(benchmark::State& state) {
  threads_from(state);
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto img = noise(side, side, 1);
  for (auto _ : state) benchmark::DoNotOptimize(laplacian_variance(img));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}

void BM_SsimSerial(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto a = noise(side, side, 2), b = noise(side, side, 3);
  for (auto _ : state) benchmark::DoNotOptimize(reference::ssim(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}

void BM_SsimParallel(benchmark::State& state) {
  threads_from(state);
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto a = noise(side, side, 2), b = noise(side, side, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}

BootstrapOptions bootstrap_options(const benchmark::State& state) {
  BootstrapOptions opt;
  opt.n_resamples = static_cast<int>(state.range(0));
  opt.seed = 7;
  return opt;
}

void BM_BootstrapSerial(benchmark::State& state) {
  const MetricSpec ece_metric{MetricKind::ece, -1, 10};
  const auto opt = bootstrap_options(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::bootstrap_distribution(stream(), ece_metric, opt));
  }
}

void BM_BootstrapParallel(benchmark::State& state) {
  threads_from(state);
  const MetricSpec ece_metric{MetricKind::ece, -1, 10};
  const auto opt = bootstrap_options(state);
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_distribution(stream(), ece_metric, opt));
}

double grid_step(const benchmark::State& state) { return 1.0 / static_cast<double>(state.range(0)); }

void BM_ThresholdSearchSerial(benchmark::State& state) {
  const UtilityParams u;
  const auto costs = CostProfile::defaults();
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::optimize_thresholds(stream(), u, costs, grid_step(state)));
  }
}

void BM_ThresholdSearchParallel(benchmark::State& state) {
  threads_from(state);
  const UtilityParams u;
  const auto costs = CostProfile::defaults();
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimize_thresholds(stream(), u, costs, grid_step(state)));
  }
}

void BM_LosoSerial(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.n_resamples = 100;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::run_experiment(stream(), Policy::gate_adaptive, cfg, 42));
  }
}

void BM_LosoParallel(benchmark::State& state) {
  threads_from(state);
  ExperimentConfig cfg;
  cfg.n_resamples = 100;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_experiment(stream(), Policy::gate_adaptive, cfg, 42));
  }
}

}  // namespace

BENCHMARK(BM_LaplacianSerial)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LaplacianParallel)->ArgsProduct({{256, 1024}, {1, 2, 4, 0}})->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_SsimSerial)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SsimParallel)->ArgsProduct({{256, 1024}, {1, 2, 4, 0}})->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_BootstrapSerial)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BootstrapParallel)->ArgsProduct({{200}, {1, 2, 4, 0}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ThresholdSearchSerial)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ThresholdSearchParallel)->ArgsProduct({{20, 50}, {1, 2, 4, 0}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LosoSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LosoParallel)->ArgsProduct({{0}, {1, 2, 4, 0}})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
