#include <benchmark/benchmark.h>

#include "daisy/factorization.hpp"
#include "daisy/negsample.hpp"
#include "synthetic.hpp"

namespace {

using namespace daisy;

void BM_SampleNegatives(benchmark::State& state) {
  const auto log = bench::synthetic_log(1000, 5000, 50);
  const auto positives = to_matrix(log);
  const PopularityTable table(log, 1.0);
  const SamplerConfig config{static_cast<SamplerKind>(state.range(0)), 4, 1.0};
  Rng rng(1);
  UserIndex user = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_negatives(user, 4, positives, table, config, rng));
    user = (user + 1) % 1000;
  }
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_SampleNegatives)
    ->Arg(static_cast<int>(SamplerKind::uniform))
    ->Arg(static_cast<int>(SamplerKind::high_pop))
    ->Arg(static_cast<int>(SamplerKind::uniform_low_pop));

// One epoch over 50k positives.
void BM_MfEpoch(benchmark::State& state) {
  const auto log = bench::synthetic_log(2000, 1000, 25);
  TrainConfig config;
  config.epochs_max = 1;
  config.factors = static_cast<std::size_t>(state.range(0));
  config.loss = static_cast<LossKind>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(train_factor_model(ModelKind::mf, log, nullptr, config));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(log.size()));
}
BENCHMARK(BM_MfEpoch)
    ->Args({16, static_cast<int>(LossKind::bpr_log)})
    ->Args({64, static_cast<int>(LossKind::bpr_log)})
    ->Args({16, static_cast<int>(LossKind::ce)})
    ->Unit(benchmark::kMillisecond);

void BM_FmEpoch(benchmark::State& state) {
  const auto log = bench::synthetic_log(2000, 1000, 25);
  TrainConfig config;
  config.epochs_max = 1;
  config.factors = 16;
  for (auto _ : state) benchmark::DoNotOptimize(train_factor_model(ModelKind::fm, log, nullptr, config));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(log.size()));
}
BENCHMARK(BM_FmEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
