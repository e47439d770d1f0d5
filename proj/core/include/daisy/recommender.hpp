#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "daisy/dataset.hpp"

namespace daisy {

enum class ModelKind : std::uint32_t { mostpop = 1, itemknn = 2, puresvd = 3, slim = 4, mf = 5, fm = 6 };

ModelKind parse_model_kind(std::string_view text);
std::string_view model_kind_name(ModelKind kind);

class ModelArchive;

/// Row-major dense matrix.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

/// A fitted top-N recommender. Instances are immutable once built and safe
/// to share across threads.
class Recommender {
 public:
  virtual ~Recommender() = default;

  virtual ModelKind kind() const noexcept = 0;
  virtual std::size_t num_users() const noexcept = 0;
  virtual std::size_t num_items() const noexcept = 0;

  /// Preference estimate; items or users outside the fitted shape score 0.
  virtual double score(UserIndex user, ItemIndex item) const = 0;
  virtual void score_items(UserIndex user, std::span<const ItemIndex> items, std::span<double> out) const;

  /// Candidates by descending score, ties by ascending item index; at most n.
  std::vector<ItemIndex> recommend(UserIndex user, std::span<const ItemIndex> candidates, std::size_t n) const;

  virtual void save(ModelArchive& archive) const = 0;
};

void save_model(const std::filesystem::path& path, const Recommender& model);
std::unique_ptr<Recommender> load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// MostPop

class MostPop final : public Recommender {
 public:
  explicit MostPop(std::vector<double> counts, std::size_t n_users);

  ModelKind kind() const noexcept override { return ModelKind::mostpop; }
  std::size_t num_users() const noexcept override { return n_users_; }
  std::size_t num_items() const noexcept override { return counts_.size(); }
  double score(UserIndex user, ItemIndex item) const override;
  void save(ModelArchive& archive) const override;

 private:
  std::vector<double> counts_;
  std::size_t n_users_;
};

/// Scores every item by its number of training records.
std::unique_ptr<MostPop> fit_mostpop(const InteractionLog& train);

// ---------------------------------------------------------------------------
// ItemKNN

/// Per-item neighbour lists, each sorted by descending similarity (ties by
/// ascending neighbour index), self excluded, at most K long.
struct ItemSimilarityStore {
  std::vector<std::size_t> offsets{0};
  std::vector<ItemIndex> neighbors;
  std::vector<double> similarities;

  std::size_t num_items() const noexcept { return offsets.size() - 1; }
  std::span<const ItemIndex> neighbors_of(ItemIndex i) const {
    return {neighbors.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  std::span<const double> similarities_of(ItemIndex i) const {
    return {similarities.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  /// Stored similarity of j in i's list, 0 when absent.
  double similarity(ItemIndex i, ItemIndex j) const;
};

/// Cosine similarity of binary item columns, truncated to the top `k`
/// neighbours per item. Items with empty columns have no neighbours.
ItemSimilarityStore cosine_item_similarity(const CsrMatrix& user_items, std::size_t k,
                                           std::size_t threads = 1);

/// `item,neighbor,similarity` lines with dense indices.
void write_similarity_triples(const std::filesystem::path& path, const ItemSimilarityStore& store);

class ItemKnn final : public Recommender {
 public:
  ItemKnn(CsrMatrix history, ItemSimilarityStore store, bool normalize);

  ModelKind kind() const noexcept override { return ModelKind::itemknn; }
  std::size_t num_users() const noexcept override { return history_.rows; }
  std::size_t num_items() const noexcept override { return history_.cols; }
  double score(UserIndex user, ItemIndex item) const override;
  void save(ModelArchive& archive) const override;

  const ItemSimilarityStore& similarities() const noexcept { return store_; }

 private:
  CsrMatrix history_;
  ItemSimilarityStore store_;
  bool normalize_;
};

struct ItemKnnConfig {
  std::size_t neighbors = 100;
  bool normalize = false;  // divide the score by the sum of i's neighbour similarities
  std::size_t threads = 1;
};

std::unique_ptr<ItemKnn> fit_itemknn(const InteractionLog& train, const ItemKnnConfig& config = {});

// ---------------------------------------------------------------------------
// PureSVD

struct RsvdConfig {
  std::size_t oversampling = 10;
  std::size_t power_iterations = 4;  // always run
  /// Further power iterations run until the leading right singular subspace
  /// moves by less than `tolerance` (Frobenius), up to this many in total.
  std::size_t max_power_iterations = 30;
  double tolerance = 1e-12;
  std::uint64_t seed = 0;
};

/// A ≈ U diag(sigma) Vᵀ with U: m×f, V: n×f, sigma non-increasing.
struct TruncatedSvd {
  DenseMatrix u;
  std::vector<double> sigma;
  DenseMatrix v;
};

/// Randomized range finder with re-orthonormalised power iterations, followed
/// by an exact SVD of the small projected matrix. When f exceeds what the
/// matrix supports, the trailing directions are zero.
TruncatedSvd randomized_svd(const CsrMatrix& matrix, std::size_t rank, const RsvdConfig& config = {});

class PureSvd final : public Recommender {
 public:
  PureSvd(DenseMatrix user_factors, DenseMatrix item_factors);

  ModelKind kind() const noexcept override { return ModelKind::puresvd; }
  std::size_t num_users() const noexcept override { return user_factors_.rows; }
  std::size_t num_items() const noexcept override { return item_factors_.rows; }
  double score(UserIndex user, ItemIndex item) const override;
  void save(ModelArchive& archive) const override;

 private:
  DenseMatrix user_factors_;  // U_f diag(sigma_f)
  DenseMatrix item_factors_;  // V_f
};

std::unique_ptr<PureSvd> fit_puresvd(const InteractionLog& train, std::size_t factors,
                                     const RsvdConfig& config = {});

// ---------------------------------------------------------------------------
// SLIM

struct CdConfig {
  double tolerance = 1e-4;  // stop once the largest coordinate change is below this
  int max_sweeps = 100;
};

struct SlimColumn {
  std::vector<ItemIndex> support;  // nonzero rows k of W(:, j), ascending
  std::vector<double> weights;
  std::vector<double> objective_per_sweep;  // filled when requested
  int sweeps = 0;
};

/// min_w ½‖a_j − A w‖² + (l2/2)‖w‖² + l1‖w‖₁  s.t. w ≥ 0, w_j = 0, by cyclic
/// coordinate descent over the items that co-occur with j (every other
/// coordinate provably stays at zero).
SlimColumn solve_slim_column(const CsrMatrix& user_items, const CsrMatrix& item_users, ItemIndex j,
                             double l1, double l2, const CdConfig& cd, bool record_objective = false);

/// The column objective for a dense weight vector; used by tests and tooling.
double slim_column_objective(const CsrMatrix& item_users, ItemIndex j, std::span<const double> w, double l1,
                             double l2);

class Slim final : public Recommender {
 public:
  /// W stored by column: W(:, i) as (k, weight) pairs sorted by k.
  Slim(CsrMatrix history, CsrMatrix weights_by_column);

  ModelKind kind() const noexcept override { return ModelKind::slim; }
  std::size_t num_users() const noexcept override { return history_.rows; }
  std::size_t num_items() const noexcept override { return history_.cols; }
  double score(UserIndex user, ItemIndex item) const override;
  void save(ModelArchive& archive) const override;

  /// W(k, i); zero outside the stored support.
  double weight(ItemIndex k, ItemIndex i) const;
  const CsrMatrix& weights_by_column() const noexcept { return columns_; }

 private:
  CsrMatrix history_;
  CsrMatrix columns_;
};

struct SlimConfig {
  double l1 = 0.001;
  double l2 = 0.01;
  CdConfig cd;
  std::size_t threads = 1;
};

std::unique_ptr<Slim> fit_slim(const InteractionLog& train, const SlimConfig& config = {});

}  // namespace daisy
