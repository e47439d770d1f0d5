#include <benchmark/benchmark.h>

#include "daisy/recommender.hpp"
#include "synthetic.hpp"

namespace {

using namespace daisy;

void BM_ItemKnnFit(benchmark::State& state) {
  const auto log = bench::synthetic_log(2000, 1000, 25);
  ItemKnnConfig config;
  config.neighbors = 100;
  config.threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_itemknn(log, config));
}
BENCHMARK(BM_ItemKnnFit)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_RandomizedSvd(benchmark::State& state) {
  const auto matrix = to_matrix(bench::synthetic_log(2000, 1000, 25));
  const auto rank = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(randomized_svd(matrix, rank));
}
BENCHMARK(BM_RandomizedSvd)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SlimFit(benchmark::State& state) {
  const auto log = bench::synthetic_log(1000, 400, 20);
  SlimConfig config;
  config.threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_slim(log, config));
}
BENCHMARK(BM_SlimFit)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
