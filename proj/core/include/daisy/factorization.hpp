#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "daisy/dataset.hpp"
#include "daisy/losses.hpp"
#include "daisy/metrics.hpp"
#include "daisy/negsample.hpp"
#include "daisy/optimizer.hpp"
#include "daisy/random.hpp"
#include "daisy/recommender.hpp"
#include "daisy/split.hpp"

namespace daisy {

class ModelArchive;

enum class InitKind { uniform, normal, xavier_uniform, xavier_normal };

InitKind parse_initializer(std::string_view text);
std::string_view initializer_name(InitKind kind);

struct Initializer {
  InitKind kind = InitKind::normal;
  double a = 1.0;       // uniform(0, a)
  double sigma = 0.01;  // normal(0, sigma²)
};

/// User and item embeddings, plus FM biases when enabled, in one flat vector.
///
/// Layout: `stride = dim + (bias ? 1 : 0)`; user u occupies
/// [u·stride, (u+1)·stride), item i the block after all users, and the global
/// bias w0 is the final entry. With biases, the last slot of each block holds
/// w_u (resp. w_i).
class LatentFactors {
 public:
  LatentFactors() = default;
  LatentFactors(std::size_t users, std::size_t items, std::size_t dim, bool with_bias);

  std::size_t num_users() const noexcept { return users_; }
  std::size_t num_items() const noexcept { return items_; }
  std::size_t dim() const noexcept { return dim_; }
  bool has_bias() const noexcept { return bias_; }
  std::size_t stride() const noexcept { return dim_ + (bias_ ? 1 : 0); }

  std::size_t user_offset(UserIndex u) const noexcept { return u * stride(); }
  std::size_t item_offset(ItemIndex i) const noexcept { return (users_ + i) * stride(); }
  std::size_t global_bias_offset() const noexcept { return (users_ + items_) * stride(); }

  std::span<double> user(UserIndex u) { return {params_.data() + user_offset(u), dim_}; }
  std::span<const double> user(UserIndex u) const { return {params_.data() + user_offset(u), dim_}; }
  std::span<double> item(ItemIndex i) { return {params_.data() + item_offset(i), dim_}; }
  std::span<const double> item(ItemIndex i) const { return {params_.data() + item_offset(i), dim_}; }
  double user_bias(UserIndex u) const { return bias_ ? params_[user_offset(u) + dim_] : 0.0; }
  double item_bias(ItemIndex i) const { return bias_ ? params_[item_offset(i) + dim_] : 0.0; }
  double global_bias() const { return bias_ ? params_.back() : 0.0; }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  /// MF: ⟨p_u, q_i⟩.  FM with one-hot user and item: w0 + w_u + w_i + ⟨v_u, v_i⟩.
  double score(UserIndex u, ItemIndex i) const;
  double l2_norm() const;

 private:
  std::size_t users_ = 0, items_ = 0, dim_ = 0;
  bool bias_ = false;
  std::vector<double> params_;
};

/// Draws embeddings from the initializer; biases start at zero. For Xavier,
/// n_in = n_out = dim.
LatentFactors initialize(std::size_t users, std::size_t items, std::size_t dim, const Initializer& init,
                         bool with_bias, Rng& rng);

/// One training example: a (u, i, j) triple for pair-wise losses or a labelled
/// (u, i) point for cross entropy (`neg` unused).
struct TrainExample {
  UserIndex user = 0;
  ItemIndex pos = 0;
  ItemIndex neg = 0;
  double label = 1.0;
};

/// Loss of one example; when `grad` is non-empty (same size as the parameter
/// vector) adds ∂loss/∂θ into it. Regularisation is not included.
double example_loss(const LatentFactors& factors, LossKind loss, const TrainExample& example,
                    std::span<double> grad = {});

struct TrainConfig {
  LossKind loss = LossKind::bpr_log;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 0.01;
  std::size_t batch_size = 256;
  double l1 = 0.0;
  double l2 = 0.0;  // λ
  Initializer initializer;
  std::size_t factors = 16;
  int epochs_max = 200;
  int patience = 5;
  SamplerConfig sampler;
  /// Regularise every parameter each step instead of only the touched rows.
  bool dense_regularization = false;
  std::uint64_t seed = 0;
  std::size_t validation_cutoff = 10;  // NDCG@cutoff drives early stopping
};

enum class StopReason { patience, max_epochs };
std::string_view stop_reason_name(StopReason reason);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean data loss per example
  std::optional<double> validation_ndcg;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  StopReason stop_reason = StopReason::max_epochs;
};

/// One epoch per line: {"epoch":..,"loss":..,"val_ndcg10":..}
void write_trace_jsonl(const std::filesystem::path& path, const TrainTrace& trace);

class FactorModel final : public Recommender {
 public:
  FactorModel(ModelKind kind, LatentFactors factors);

  ModelKind kind() const noexcept override { return kind_; }
  std::size_t num_users() const noexcept override { return factors_.num_users(); }
  std::size_t num_items() const noexcept override { return factors_.num_items(); }
  /// Raw score; the CE probability σ(score) ranks identically.
  double score(UserIndex user, ItemIndex item) const override;
  void save(ModelArchive& archive) const override;

  const LatentFactors& factors() const noexcept { return factors_; }

 private:
  ModelKind kind_;
  LatentFactors factors_;
};

std::unique_ptr<Recommender> load_factor_model(const ModelArchive& archive);

struct TrainResult {
  std::unique_ptr<FactorModel> model;
  TrainTrace trace;
};

/// Trains MF (ModelKind::mf) or FM (ModelKind::fm). Each epoch walks the
/// distinct training positives in a seeded order, draws fresh negatives, and
/// steps the optimizer; with a non-empty `validation` set the returned model
/// is the snapshot of the best NDCG@cutoff epoch and training stops after
/// `patience` epochs without improvement. Without validation, all epochs run
/// and the last parameters are returned. Throws DivergedError on a
/// non-finite loss.
TrainResult train_factor_model(ModelKind kind, const InteractionLog& train, const EvalSet* validation,
                               const TrainConfig& config);

TrainResult train_mf(const SplitBundle& split, const TrainConfig& config);
TrainResult train_fm(const SplitBundle& split, const TrainConfig& config);

}  // namespace daisy
