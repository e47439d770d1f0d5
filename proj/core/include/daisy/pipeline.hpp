#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "daisy/analysis.hpp"
#include "daisy/factorization.hpp"
#include "daisy/preprocess.hpp"
#include "daisy/recommender.hpp"
#include "daisy/split.hpp"
#include "daisy/tune.hpp"

namespace daisy {

/// Which fields a per-model override may change.
///   hard_strict: loss, initializer, optimizer and search space are global
///   mixed:       initializer and optimizer are global
///   soft_strict, relax: no restriction
enum class EvaluationMode { relax, hard_strict, soft_strict, mixed };
EvaluationMode parse_mode(std::string_view text);
std::string_view mode_name(EvaluationMode mode);

struct BaselineConfig {
  ItemKnnConfig itemknn;
  std::size_t svd_factors = 50;
  RsvdConfig rsvd;
  SlimConfig slim;
};

struct TuningConfig {
  SearchStrategy strategy = SearchStrategy::tpe;
  std::size_t n_trials = 30;
  Metric objective = Metric::ndcg;
  std::size_t cutoff = 10;
  TpeConfig tpe;
  bool unsafe_tune_on_test = false;
  std::optional<SearchSpace> space;  // falls back to default_search_space(model)
};

struct RunConfig {
  std::filesystem::path dataset;  // dataset manifest (see `daisy ingest`)
  PreprocessConfig preprocess;
  SplitConfig split;
  ModelKind model = ModelKind::mostpop;
  TrainConfig train;  // mf / fm; the sampler lives in train.sampler
  BaselineConfig baselines;
  TuningConfig tuning;
  /// Per-model overrides keyed by model name, e.g. {"fm": {"loss": "top1"}}.
  nlohmann::json model_overrides = nlohmann::json::object();
  std::vector<std::size_t> cutoffs = {1, 5, 10, 20, 30, 50};
  std::filesystem::path output = "runs/daisy";
  std::uint64_t seed = 0;
  EvaluationMode mode = EvaluationMode::mixed;
  std::size_t threads = 1;
};

/// Parses a config; `//` comments are allowed. Relative dataset and output
/// paths resolve against `base_dir`. Unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const RunConfig& config);
/// Default config for a model with a comment above each section.
std::string commented_default_config(ModelKind model);

/// Applies DAISY_SEED when set.
void apply_environment(RunConfig& config);

/// Rejects overrides the evaluation mode pins, e.g. "mode forbids per-model loss".
void validate_mode(const RunConfig& config);

/// The config with the active model's overrides folded in.
RunConfig effective_config(const RunConfig& config);

SearchSpace default_search_space(ModelKind model);

/// Builds any supported model from hyper-parameters layered on the config.
class PipelineTrainer final : public ModelTrainer {
 public:
  explicit PipelineTrainer(RunConfig config);
  FitOutcome fit(const InteractionLog& train, const EvalSet* validation, const Params& params, std::uint64_t seed,
                 std::optional<int> fixed_epochs) const override;

 private:
  RunConfig config_;
};

struct StageTiming {
  std::string stage;
  double wall_ms = 0.0;
};

struct RunOutcome {
  nlohmann::ordered_json manifest;
  TuneResult tuning;
};

/// ingest → preprocess → split → tune → retrain → evaluate → analyze, all
/// persisted under config.output; manifest.json is written last. Errors keep
/// their stage tag and partial outputs stay on disk.
RunOutcome run_pipeline(const RunConfig& config);

struct ComparisonRow {
  std::string label;  // model name or run directory
  std::vector<MetricReport> reports;
};

struct Comparison {
  std::vector<std::size_t> cutoffs;
  std::vector<ComparisonRow> rows;
  std::map<std::size_t, MetricMatrix> kendall;  // per cutoff; needs >= 2 rows
};

/// Loads completed run manifests and checks that dataset hash, threshold,
/// filter, split and seed agree; otherwise throws
/// "model-independent factor mismatch: <factor>".
Comparison compare_runs(const std::vector<std::filesystem::path>& manifests);
void write_comparison(const std::filesystem::path& dir, const Comparison& comparison);

std::vector<MetricReport> read_metrics_json(const std::filesystem::path& path);

}  // namespace daisy
