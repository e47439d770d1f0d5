#include <doctest.h>

#include <cmath>
#include <mutex>
#include <set>
#include <numeric>

#include "daisy/error.hpp"
#include "daisy/tune.hpp"
#include "fixtures.hpp"
#include "stats.hpp"

using namespace daisy;

namespace {

SearchSpace space_of(const char* text) { return SearchSpace::from_json(nlohmann::json::parse(text)); }

// Scores items by a fixed per-item value.
class TableModel final : public Recommender {
 public:
  TableModel(std::size_t users, std::vector<double> item_scores) : users_(users), scores_(std::move(item_scores)) {}
  ModelKind kind() const noexcept override { return ModelKind::mostpop; }
  std::size_t num_users() const noexcept override { return users_; }
  std::size_t num_items() const noexcept override { return scores_.size(); }
  double score(UserIndex, ItemIndex i) const override { return i < scores_.size() ? scores_[i] : 0.0; }
  void save(ModelArchive&) const override {}

 private:
  std::size_t users_;
  std::vector<double> scores_;
};

struct FitCall {
  std::size_t train_size = 0;
  bool has_validation = false;
  std::set<ItemIndex> validation_items;
  Params params;
  std::uint64_t seed = 0;
  std::optional<int> fixed_epochs;
};

// "good" = 1 ranks the validation targets first, 0 ranks them last.
class ScriptedTrainer final : public ModelTrainer {
 public:
  bool always_diverge = false;
  mutable std::mutex mutex;
  mutable std::vector<FitCall> calls;

  FitOutcome fit(const InteractionLog& train, const EvalSet* validation, const Params& params, std::uint64_t seed,
                 std::optional<int> fixed_epochs) const override {
    if (always_diverge) throw DivergedError("diverged");
    FitCall call{train.size(), validation != nullptr, {}, params, seed, fixed_epochs};
    std::vector<double> scores(train.num_items(), 0.0);
    const double sign = params.count("good") && as_int(params.at("good")) == 1 ? 1.0 : -1.0;
    if (validation)
      for (const auto& [u, items] : validation->truth)
        for (ItemIndex i : items) {
          call.validation_items.insert(i);
          scores[i] += sign;
        }
    {
      std::lock_guard lock(mutex);
      calls.push_back(call);
    }
    return {std::make_unique<TableModel>(train.num_users(), scores), 3, std::nullopt};
  }
};

SplitBundle small_split() {
  SplitConfig config = parse_split_method("tloo");
  config.candidate_size = 50;
  return make_split(daisy::testing::random_log(21, 60, 80, 4, 10), config);
}

std::set<ItemIndex> items_of(const InteractionLog& log) {
  std::set<ItemIndex> out;
  for (const auto& r : log.records()) out.insert(r.item);
  return out;
}

}  // namespace

TEST_SUITE("tune") {
  TEST_CASE("grid sizes and order") {
    const auto two = grid_search(space_of(R"({"lr": [0.1, 0.01, 0.001], "d": [8, 16]})"));
    REQUIRE(two.size() == 6);
    // Dimensions are ordered by name; the first one varies slowest.
    CHECK(as_int(two[0].at("d")) == 8);
    CHECK(as_real(two[0].at("lr")) == 0.1);
    CHECK(as_real(two[1].at("lr")) == 0.01);
    CHECK(as_int(two[3].at("d")) == 16);

    const auto cube = grid_search(space_of(R"({"a": [1, 2, 3, 4], "b": [1, 2, 3, 4], "c": [1, 2, 3, 4]})"));
    CHECK(cube.size() == 64);
    CHECK(grid_search(space_of(R"({"a": ["only"]})")).size() == 1);

    const auto logs = grid_search(space_of(R"({"l2": {"type": "log_uniform", "low": 1e-4, "high": 1, "grid_points": 5}})"));
    REQUIRE(logs.size() == 5);
    CHECK(as_real(logs[0].at("l2")) == doctest::Approx(1e-4));
    CHECK(as_real(logs[2].at("l2")) == doctest::Approx(1e-2));
    CHECK(as_real(logs[4].at("l2")) == doctest::Approx(1.0));

    CHECK_THROWS_AS(grid_search(space_of(R"({"x": {"type": "uniform", "low": 0, "high": 1}})")), TuneError);
  }

  TEST_CASE("random search is seeded") {
    const auto space = space_of(R"({"lr": {"type": "log_uniform", "low": 1e-4, "high": 0.1},
                                    "d": {"type": "int_uniform", "low": 2, "high": 9}, "k": ["x", "y"]})");
    const auto a = random_search(space, 20, 5);
    const auto b = random_search(space, 20, 5);
    CHECK(a == b);
    CHECK(random_search(space, 20, 6) != a);
    CHECK(random_search(space, 1, 5).size() == 1);
    for (const auto& p : a) CHECK(space.contains(p));
  }

  TEST_CASE("log-uniform draws are uniform in the exponent") {
    const auto space = space_of(R"({"lr": {"type": "log_uniform", "low": 1e-4, "high": 0.1}})");
    std::vector<double> exponents;
    for (const auto& p : random_search(space, 10000, 3)) exponents.push_back(std::log10(as_real(p.at("lr"))));
    const double d = daisy::testing::ks_uniform_statistic(exponents, -4.0, -1.0);
    CHECK(daisy::testing::ks_p(d, exponents.size()) > 0.01);
  }

  TEST_CASE("integer draws cover the inclusive range evenly") {
    const auto space = space_of(R"({"d": {"type": "int_uniform", "low": 2, "high": 5}})");
    std::vector<double> counts(4, 0.0);
    for (const auto& p : random_search(space, 20000, 4)) counts[static_cast<std::size_t>(as_int(p.at("d")) - 2)] += 1;
    CHECK(daisy::testing::chi_square_p(counts, {0.25, 0.25, 0.25, 0.25}) > 0.01);
  }

  TEST_CASE("space validation") {
    CHECK_THROWS_AS(space_of(R"({"x": []})"), TuneError);
    CHECK_THROWS_AS(space_of(R"({"x": {"type": "uniform", "low": 1, "high": 1}})"), TuneError);
    CHECK_THROWS_AS(space_of(R"({"x": {"type": "log_uniform", "low": 0, "high": 1}})"), TuneError);
    CHECK_THROWS_AS(space_of(R"({"x": {"type": "beta", "low": 0, "high": 1}})"), TuneError);
    const auto space = space_of(R"({"x": {"type": "uniform", "low": -1, "high": 2, "grid_points": 4}, "k": [1, "a"]})");
    CHECK(SearchSpace::from_json(space.to_json()).to_json() == space.to_json());
  }

  TEST_CASE("TPE stays inside the bounds") {
    const auto space = space_of(R"({"x": {"type": "uniform", "low": -2, "high": 3},
                                    "lr": {"type": "log_uniform", "low": 1e-5, "high": 1e-1},
                                    "d": {"type": "int_uniform", "low": 1, "high": 6}, "k": ["a", "b", "c"]})");
    const auto history = optimize(space, SearchStrategy::tpe, 60, 9, [](const Params& p) {
      return -std::abs(as_real(p.at("x")) - 2.9) - std::abs(std::log10(as_real(p.at("lr"))) + 4.5) +
             (as_string(p.at("k")) == "c" ? 1.0 : 0.0) - 0.1 * static_cast<double>(as_int(p.at("d")));
    });
    REQUIRE(history.size() == 60);
    for (const auto& o : history) CHECK(space.contains(o.params));
  }

  TEST_CASE("TPE start-up matches random search") {
    const auto space = space_of(R"({"x": {"type": "uniform", "low": 0, "high": 1}, "k": ["a", "b"]})");
    TpeConfig config;
    config.n_startup = 15;
    const auto tpe = optimize(space, SearchStrategy::tpe, 15, 77, [](const Params& p) { return as_real(p.at("x")); }, config);
    const auto random = random_search(space, 15, 77);
    REQUIRE(tpe.size() == random.size());
    for (std::size_t k = 0; k < tpe.size(); ++k) CHECK(tpe[k].params == random[k]);
  }

  TEST_CASE("TPE always proposes a lone category") {
    const auto space = space_of(R"({"x": {"type": "uniform", "low": 0, "high": 1}, "k": ["solo"]})");
    for (const auto& o : optimize(space, SearchStrategy::tpe, 30, 1, [](const Params& p) { return as_real(p.at("x")); }))
      CHECK(as_string(o.params.at("k")) == "solo");
  }

  TEST_CASE("TPE converges on a quadratic and beats random search") {
    const auto space = space_of(R"({"x": {"type": "uniform", "low": 0, "high": 1}})");
    const auto f = [](const Params& p) { return -std::pow(as_real(p.at("x")) - 0.3, 2); };
    double tpe_total = 0, random_total = 0;
    int close = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto best = [](const std::vector<Observation>& h) {
        return *std::max_element(h.begin(), h.end(),
                                 [](const Observation& a, const Observation& b) { return a.objective < b.objective; });
      };
      const auto t = best(optimize(space, SearchStrategy::tpe, 30, seed, f));
      const auto r = best(optimize(space, SearchStrategy::random, 30, seed, f));
      tpe_total += t.objective;
      random_total += r.objective;
      if (std::abs(as_real(t.params.at("x")) - 0.3) <= 0.05) ++close;
    }
    CHECK(close >= 18);
    CHECK(tpe_total >= random_total);
  }

  TEST_CASE("trial records round trip through JSON") {
    TrialRecord t;
    t.trial_id = 4;
    t.params = {{"lr", 0.01}, {"d", std::int64_t{16}}, {"loss", std::string("bpr_log")}};
    for (std::size_t k = 0; k < 6; ++k) t.metrics.values[k] = 0.1 * static_cast<double>(k + 1);
    t.objective = t.metrics[Metric::ndcg];
    t.seed = 99;
    t.best_epoch = 7;
    const auto back = trial_from_json(trial_to_json(t));
    CHECK(back.trial_id == 4);
    CHECK(back.params == t.params);
    CHECK(back.metrics.values == t.metrics.values);
    CHECK(back.objective == t.objective);
    CHECK(back.best_epoch == 7);
    CHECK_FALSE(trial_to_json(t).contains("wall_time_ms"));
    CHECK(trial_to_json(t, true).contains("wall_time_ms"));

    t.status = TrialStatus::diverged;
    t.objective = -std::numeric_limits<double>::infinity();
    const auto j = trial_to_json(t);
    CHECK(j["objective"].is_null());
    const auto failed = trial_from_json(j);
    CHECK(failed.status == TrialStatus::diverged);
    CHECK(std::isinf(failed.objective));
    CHECK(failed.objective < 0);
  }

  TEST_CASE("an empty space runs exactly one trial") {
    const auto split = small_split();
    ScriptedTrainer trainer;
    TuneOptions options;
    options.strategy = SearchStrategy::random;
    const auto result = run_tuning(trainer, split, SearchSpace{}, options);
    CHECK(result.trials.size() == 1);
    CHECK(trainer.calls.size() == 2);
    CHECK(result.test_reports.size() == options.report_cutoffs.size());
  }

  TEST_CASE("the best trial feeds the refit and test stays hidden") {
    const auto split = small_split();
    ScriptedTrainer trainer;
    TuneOptions options;
    options.strategy = SearchStrategy::grid;
    options.seed = 3;
    std::vector<std::size_t> seen;
    options.on_trial = [&](const TrialRecord& t) { seen.push_back(t.trial_id); };
    const auto result = run_tuning(trainer, split, space_of(R"({"good": [0, 1]})"), options);
    REQUIRE(result.trials.size() == 2);
    CHECK(seen == std::vector<std::size_t>{0, 1});
    CHECK(result.trials[1].objective > result.trials[0].objective);
    CHECK(result.best.trial_id == 1);
    for (const auto& t : result.trials) CHECK(t.objective == t.metrics[Metric::ndcg]);

    REQUIRE(trainer.calls.size() == 3);
    const auto test_items = items_of(split.test);
    const auto validation_items = items_of(split.validation);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(trainer.calls[k].train_size == split.train.size());
      CHECK(trainer.calls[k].validation_items == validation_items);
    }
    const auto& refit = trainer.calls[2];
    CHECK(refit.params == result.best.params);
    CHECK_FALSE(refit.has_validation);
    CHECK(refit.train_size == split.full_train().size());
    CHECK(refit.seed == result.best.seed);
    CHECK(refit.fixed_epochs == 4);
    (void)test_items;
  }

  TEST_CASE("unsafe tuning selects on the test set") {
    const auto split = small_split();
    ScriptedTrainer trainer;
    TuneOptions options;
    options.strategy = SearchStrategy::grid;
    options.unsafe_tune_on_test = true;
    run_tuning(trainer, split, space_of(R"({"good": [0, 1]})"), options);
    CHECK(trainer.calls[0].train_size == split.full_train().size());
    CHECK(trainer.calls[0].validation_items == items_of(split.test));
  }

  TEST_CASE("every trial diverging is a tuning failure") {
    const auto split = small_split();
    ScriptedTrainer trainer;
    trainer.always_diverge = true;
    TuneOptions options;
    options.strategy = SearchStrategy::random;
    options.n_trials = 3;
    CHECK_THROWS_WITH_AS(run_tuning(trainer, split, space_of(R"({"good": [0, 1]})"), options),
                         doctest::Contains("tuning failed"), TuneError);
  }

  TEST_CASE("trial sequence is reproducible across thread counts") {
    const auto split = small_split();
    const auto space = space_of(R"({"good": [0, 1], "noise": {"type": "uniform", "low": 0, "high": 1}})");
    TuneOptions options;
    options.strategy = SearchStrategy::random;
    options.n_trials = 8;
    options.seed = 12;
    ScriptedTrainer t1, t2;
    const auto a = run_tuning(t1, split, space, options);
    options.threads = 4;
    const auto b = run_tuning(t2, split, space, options);
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t k = 0; k < a.trials.size(); ++k) CHECK(trial_to_json(a.trials[k]) == trial_to_json(b.trials[k]));
    CHECK(a.best.trial_id == b.best.trial_id);
  }
}
