#include <benchmark/benchmark.h>

#include <numeric>

#include "daisy/analysis.hpp"
#include "daisy/metrics.hpp"
#include "daisy/recommender.hpp"
#include "daisy/split.hpp"
#include "synthetic.hpp"

namespace {

using namespace daisy;

void BM_EvaluateUser(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<ItemIndex> ranked(n);
  std::iota(ranked.begin(), ranked.end(), 0u);
  std::vector<ItemIndex> truth;
  for (ItemIndex i = 0; i < 2 * n; i += 7) truth.push_back(i);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_user(ranked, truth, n));
}
BENCHMARK(BM_EvaluateUser)->Arg(10)->Arg(50);

// Ranking 1000 candidates per user with MostPop and scoring six cutoffs.
void BM_EvaluateAll(benchmark::State& state) {
  const auto log = bench::synthetic_log(500, 3000, 30);
  SplitConfig config = parse_split_method("tloo");
  const auto split = make_split(log, config);
  const auto eval = make_eval_set(split.test, split.candidates);
  const auto model = fit_mostpop(split.full_train());
  const std::vector<std::size_t> cutoffs = {1, 5, 10, 20, 30, 50};
  const auto threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_all(*model, eval, cutoffs, {}, false, threads));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(eval.truth.size()));
}
BENCHMARK(BM_EvaluateAll)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_KendallTauB(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> x(n), y(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = static_cast<double>(uniform_index(rng, 50));
    y[k] = x[k] + static_cast<double>(uniform_index(rng, 20));
  }
  for (auto _ : state) benchmark::DoNotOptimize(kendall_tau_b(x, y));
}
BENCHMARK(BM_KendallTauB)->Arg(100)->Arg(10000);

}  // namespace
