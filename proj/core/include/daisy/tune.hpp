#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "daisy/factorization.hpp"
#include "daisy/metrics.hpp"
#include "daisy/random.hpp"
#include "daisy/recommender.hpp"
#include "daisy/split.hpp"

namespace daisy {

using ParamValue = std::variant<std::int64_t, double, std::string>;
using Params = std::map<std::string, ParamValue>;

double as_real(const ParamValue& v);
std::int64_t as_int(const ParamValue& v);
std::string as_string(const ParamValue& v);
nlohmann::ordered_json params_to_json(const Params& params);
Params params_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Search space

struct Categorical {
  std::vector<ParamValue> values;
};
struct IntUniform {  // inclusive bounds
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};
struct Uniform {
  double lo = 0.0;
  double hi = 1.0;
  std::optional<std::size_t> grid_points;  // required for grid search
};
struct LogUniform {
  double lo = 1e-4;
  double hi = 1e-1;
  std::optional<std::size_t> grid_points;
};

struct Dimension {
  std::string name;
  std::variant<Categorical, IntUniform, Uniform, LogUniform> domain;
};

struct SearchSpace {
  std::vector<Dimension> dimensions;

  bool empty() const noexcept { return dimensions.empty(); }
  /// lo < hi (log-uniform also lo > 0), non-empty categoricals, unique names.
  void validate() const;
  bool contains(const Params& params) const;

  /// {"lr": {"type": "log_uniform", "low": 1e-4, "high": 1e-1}, "d": {"type": "choice", "values": [8, 16]}}
  static SearchSpace from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

SearchSpace load_search_space(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Strategies

enum class SearchStrategy { grid, random, tpe };
SearchStrategy parse_strategy(std::string_view text);
std::string_view strategy_name(SearchStrategy s);

/// Cartesian product with the first dimension varying slowest. Spaces read
/// from JSON order their dimensions by name. Continuous
/// dimensions need `grid_points`.
std::vector<Params> grid_search(const SearchSpace& space);

Params sample_random(const SearchSpace& space, Rng& rng);
std::vector<Params> random_search(const SearchSpace& space, std::size_t n_trials, std::uint64_t seed);

struct TpeConfig {
  std::size_t n_startup = 10;
  double gamma = 0.25;
  std::size_t n_candidates = 24;
};

/// A past trial; objectives are maximised, failed trials carry -inf.
struct Observation {
  Params params;
  double objective = 0.0;
};

/// Tree-structured Parzen estimator. The first `n_startup` proposals are
/// random draws from the same stream random_search uses; afterwards each
/// dimension independently proposes argmax l(x)/g(x) over candidates drawn
/// from l, where l and g are fit to the best γ-quantile and the rest.
class TpeSampler {
 public:
  TpeSampler(SearchSpace space, TpeConfig config, std::uint64_t seed);
  Params propose(std::span<const Observation> history);

 private:
  SearchSpace space_;
  TpeConfig config_;
  Rng rng_;
};

/// Runs a black-box maximisation; used by tests and by tooling that tunes
/// something other than a recommender.
std::vector<Observation> optimize(const SearchSpace& space, SearchStrategy strategy, std::size_t n_trials,
                                  std::uint64_t seed, const std::function<double(const Params&)>& objective,
                                  const TpeConfig& tpe = {});

// ---------------------------------------------------------------------------
// Tuning recommenders

enum class TrialStatus { ok, diverged };

struct TrialRecord {
  std::size_t trial_id = 0;
  Params params;
  MetricValues metrics;  // validation metrics at the tuning cutoff
  std::size_t cutoff = 10;
  Metric objective_metric = Metric::ndcg;
  double objective = 0.0;  // -inf when diverged
  std::uint64_t seed = 0;
  double wall_time_ms = 0.0;
  TrialStatus status = TrialStatus::ok;
  std::optional<int> best_epoch;
};

/// One JSON object; wall time is left out unless requested so that logs are
/// reproducible byte for byte.
nlohmann::ordered_json trial_to_json(const TrialRecord& trial, bool include_wall_time = false);
TrialRecord trial_from_json(const nlohmann::json& j);
std::vector<TrialRecord> read_trials_jsonl(const std::filesystem::path& path);
void write_trials_jsonl(const std::filesystem::path& path, std::span<const TrialRecord> trials,
                        bool include_wall_time = false);

struct FitOutcome {
  std::unique_ptr<Recommender> model;
  std::optional<int> best_epoch;
  std::optional<TrainTrace> trace;
};

/// Builds a model from hyper-parameters. Implementations must only read the
/// data they are handed.
class ModelTrainer {
 public:
  virtual ~ModelTrainer() = default;
  /// `validation` may be null (final refit); `fixed_epochs` pins the epoch
  /// count for iterative models.
  virtual FitOutcome fit(const InteractionLog& train, const EvalSet* validation, const Params& params,
                         std::uint64_t seed, std::optional<int> fixed_epochs) const = 0;
};

struct TuneOptions {
  SearchStrategy strategy = SearchStrategy::tpe;
  std::size_t n_trials = 30;
  std::uint64_t seed = 0;
  Metric objective = Metric::ndcg;
  std::size_t cutoff = 10;
  TpeConfig tpe;
  /// Select hyper-parameters on the test set (for studying leakage only).
  bool unsafe_tune_on_test = false;
  std::vector<std::size_t> report_cutoffs = {1, 5, 10, 20, 30, 50};
  std::size_t threads = 1;  // grid and random trials only
  std::function<void(const TrialRecord&)> on_trial;
};

struct TuneResult {
  TrialRecord best;
  std::vector<TrialRecord> trials;
  std::unique_ptr<Recommender> final_model;
  std::optional<TrainTrace> final_trace;
  std::vector<MetricReport> test_reports;
};

/// Trials fit on the inner training set and score the validation candidates;
/// the best trial's parameters are refit on train ∪ validation and evaluated
/// once on the test candidates. An empty space runs exactly one trial.
TuneResult run_tuning(const ModelTrainer& trainer, const SplitBundle& split, const SearchSpace& space,
                      const TuneOptions& options);

}  // namespace daisy
