#include "daisy/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <string>

#include "daisy/error.hpp"
#include "daisy/model_io.hpp"

namespace daisy {
namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEpochStream = 2;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double normal_draw(Rng& rng) {
  const double u1 = 1.0 - uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double sign(double x) { return (x > 0) - (x < 0); }

// Accumulates a mini-batch gradient and applies it to the touched blocks.
class BatchStepper {
 public:
  BatchStepper(LatentFactors& factors, const TrainConfig& config)
      : factors_(factors),
        config_(config),
        optimizer_(OptimizerConfig{config.optimizer, config.learning_rate}, factors.parameters().size()),
        grad_(factors.parameters().size(), 0.0),
        touched_(factors.num_users() + factors.num_items() + 1, 0) {}

  std::span<double> grad() { return grad_; }

  void touch_example(const TrainExample& ex, bool pair) {
    mark(ex.user);
    mark(factors_.num_users() + ex.pos);
    if (pair) mark(factors_.num_users() + ex.neg);
    if (factors_.has_bias()) mark(factors_.num_users() + factors_.num_items());
    ++examples_;
  }

  std::size_t pending() const noexcept { return examples_; }

  void flush() {
    if (examples_ == 0) return;
    if (config_.dense_regularization)
      for (std::size_t b = 0; b < touched_.size(); ++b) mark(b);
    std::sort(touched_list_.begin(), touched_list_.end());
    optimizer_.begin_step();
    const double scale = 1.0 / static_cast<double>(examples_);
    auto params = factors_.parameters();
    for (auto block : touched_list_) {
      const auto [offset, len] = block_range(block);
      buffer_.resize(len);
      for (std::size_t k = 0; k < len; ++k) {
        const double theta = params[offset + k];
        buffer_[k] = scale * grad_[offset + k] + config_.l2 * theta + config_.l1 * sign(theta);
        grad_[offset + k] = 0.0;
      }
      optimizer_.apply(offset, params, buffer_);
      touched_[block] = 0;
    }
    touched_list_.clear();
    examples_ = 0;
  }

 private:
  void mark(std::size_t block) {
    if (!touched_[block]) {
      touched_[block] = 1;
      touched_list_.push_back(block);
    }
  }

  std::pair<std::size_t, std::size_t> block_range(std::size_t block) const {
    const std::size_t stride = factors_.stride();
    if (block == factors_.num_users() + factors_.num_items()) return {factors_.global_bias_offset(), 1};
    return {block * stride, stride};
  }

  LatentFactors& factors_;
  const TrainConfig& config_;
  Optimizer optimizer_;
  std::vector<double> grad_;
  std::vector<char> touched_;
  std::vector<std::size_t> touched_list_;
  std::vector<double> buffer_;
  std::size_t examples_ = 0;
};

// Adds d(score_ui)/dθ · coeff into grad.
void add_score_gradient(const LatentFactors& f, UserIndex u, ItemIndex i, double coeff, std::span<double> grad) {
  const std::size_t d = f.dim();
  const auto pu = f.user(u);
  const auto qi = f.item(i);
  const std::size_t uo = f.user_offset(u), io = f.item_offset(i);
  for (std::size_t k = 0; k < d; ++k) {
    grad[uo + k] += coeff * qi[k];
    grad[io + k] += coeff * pu[k];
  }
  if (f.has_bias()) {
    grad[uo + d] += coeff;
    grad[io + d] += coeff;
    grad[f.global_bias_offset()] += coeff;
  }
}

}  // namespace

InitKind parse_initializer(std::string_view text) {
  if (text == "uniform") return InitKind::uniform;
  if (text == "normal") return InitKind::normal;
  if (text == "xavier_uniform") return InitKind::xavier_uniform;
  if (text == "xavier_normal") return InitKind::xavier_normal;
  throw ConfigError("unknown initializer '" + std::string(text) + "'");
}

std::string_view initializer_name(InitKind kind) {
  switch (kind) {
    case InitKind::uniform: return "uniform";
    case InitKind::normal: return "normal";
    case InitKind::xavier_uniform: return "xavier_uniform";
    case InitKind::xavier_normal: return "xavier_normal";
  }
  return "normal";
}

std::string_view stop_reason_name(StopReason reason) {
  return reason == StopReason::patience ? "patience" : "max_epochs";
}

LatentFactors::LatentFactors(std::size_t users, std::size_t items, std::size_t dim, bool with_bias)
    : users_(users), items_(items), dim_(dim), bias_(with_bias) {
  if (dim == 0) throw ConfigError("latent dimension must be >= 1");
  params_.assign((users + items) * stride() + (with_bias ? 1 : 0), 0.0);
}

double LatentFactors::score(UserIndex u, ItemIndex i) const {
  double s = dot(user(u), item(i));
  if (bias_) s += global_bias() + user_bias(u) + item_bias(i);
  return s;
}

double LatentFactors::l2_norm() const {
  double s = 0.0;
  for (double x : params_) s += x * x;
  return std::sqrt(s);
}

LatentFactors initialize(std::size_t users, std::size_t items, std::size_t dim, const Initializer& init,
                         bool with_bias, Rng& rng) {
  LatentFactors f(users, items, dim, with_bias);
  const double fan = 2.0 * static_cast<double>(dim);  // n_in + n_out
  auto draw = [&]() {
    switch (init.kind) {
      case InitKind::uniform: return init.a * uniform_unit(rng);
      case InitKind::normal: return init.sigma * normal_draw(rng);
      case InitKind::xavier_uniform: {
        const double bound = std::sqrt(6.0) / std::sqrt(fan);
        return -bound + 2.0 * bound * uniform_unit(rng);
      }
      case InitKind::xavier_normal: return std::sqrt(2.0 / fan) * normal_draw(rng);
    }
    return 0.0;
  };
  for (std::size_t u = 0; u < users; ++u)
    for (auto& x : f.user(static_cast<UserIndex>(u))) x = draw();
  for (std::size_t i = 0; i < items; ++i)
    for (auto& x : f.item(static_cast<ItemIndex>(i))) x = draw();
  return f;
}

double example_loss(const LatentFactors& factors, LossKind loss, const TrainExample& ex, std::span<double> grad) {
  if (objective_style(loss) == ObjectiveStyle::point) {
    const auto r = cross_entropy(factors.score(ex.user, ex.pos), ex.label);
    if (!grad.empty()) add_score_gradient(factors, ex.user, ex.pos, r.d_score, grad);
    return r.value;
  }
  const auto r = pair_loss(loss, factors.score(ex.user, ex.pos), factors.score(ex.user, ex.neg));
  if (!grad.empty()) {
    add_score_gradient(factors, ex.user, ex.pos, r.d_pos, grad);
    add_score_gradient(factors, ex.user, ex.neg, r.d_neg, grad);
  }
  return r.value;
}

void write_trace_jsonl(const std::filesystem::path& path, const TrainTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("train", "cannot write " + path.string());
  for (const auto& e : trace.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["val_ndcg10"] = e.validation_ndcg ? nlohmann::ordered_json(*e.validation_ndcg) : nlohmann::ordered_json();
    out << j.dump() << '\n';
  }
}

FactorModel::FactorModel(ModelKind kind, LatentFactors factors) : kind_(kind), factors_(std::move(factors)) {
  if (kind_ != ModelKind::mf && kind_ != ModelKind::fm) throw ModelError("factor model must be mf or fm");
}

double FactorModel::score(UserIndex user, ItemIndex item) const {
  if (user >= factors_.num_users() || item >= factors_.num_items()) return 0.0;
  return factors_.score(user, item);
}

void FactorModel::save(ModelArchive& archive) const {
  archive.put_indices("factors.shape",
                      {factors_.num_users(), factors_.num_items(), factors_.dim(), factors_.has_bias() ? 1u : 0u});
  const auto p = factors_.parameters();
  archive.put_reals("factors", std::vector<double>(p.begin(), p.end()));
}

std::unique_ptr<Recommender> load_factor_model(const ModelArchive& archive) {
  const auto& shape = archive.indices("factors.shape");
  if (shape.size() != 4) throw ModelError("bad factor shape");
  LatentFactors f(shape[0], shape[1], shape[2], shape[3] != 0);
  const auto& values = archive.reals("factors");
  if (values.size() != f.parameters().size()) throw ModelError("factor payload size mismatch");
  std::copy(values.begin(), values.end(), f.parameters().begin());
  return std::make_unique<FactorModel>(archive.kind(), std::move(f));
}

TrainResult train_factor_model(ModelKind kind, const InteractionLog& train, const EvalSet* validation,
                               const TrainConfig& config) {
  if (kind != ModelKind::mf && kind != ModelKind::fm) throw ConfigError("train_factor_model needs mf or fm");
  if (train.empty()) throw ConfigError("empty training set");
  if (config.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (config.l1 < 0 || config.l2 < 0) throw ConfigError("regularisation weights must be >= 0");
  if (config.epochs_max < 1) throw ConfigError("epochs_max must be >= 1");

  const bool pair = objective_style(config.loss) == ObjectiveStyle::pair;
  SamplerConfig sampler = config.sampler;
  if (sampler.negatives_per_positive == 0) sampler.negatives_per_positive = pair ? 1 : 4;

  const CsrMatrix positives = to_matrix(train);
  const PopularityTable popularity(train, sampler.popularity_exponent);
  std::vector<std::pair<UserIndex, ItemIndex>> pairs;
  pairs.reserve(positives.nnz());
  for (std::size_t u = 0; u < positives.rows; ++u)
    for (auto i : positives.row(u)) pairs.emplace_back(static_cast<UserIndex>(u), i);

  Rng init_rng(derive_seed(config.seed, kInitStream));
  LatentFactors factors = initialize(train.num_users(), train.num_items(), config.factors, config.initializer,
                                     kind == ModelKind::fm, init_rng);
  BatchStepper stepper(factors, config);
  const std::size_t per_positive =
      static_cast<std::size_t>(sampler.negatives_per_positive) + (pair ? 0 : 1);
  const std::size_t batch = config.optimizer == OptimizerKind::gd    ? pairs.size() * per_positive
                            : config.optimizer == OptimizerKind::sgd ? 1
                                                                     : config.batch_size;
  Rng rng(derive_seed(config.seed, kEpochStream));
  const bool validate = validation != nullptr && !validation->empty();
  const std::size_t cutoffs[] = {config.validation_cutoff};

  TrainTrace trace;
  LatentFactors best = factors;
  double best_metric = -1.0;
  std::vector<std::size_t> order(pairs.size());

  for (int epoch = 0; epoch < config.epochs_max; ++epoch) {
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    shuffle(std::span<std::size_t>(order), rng);

    double loss_sum = 0.0;
    std::size_t n_examples = 0;
    auto consume = [&](const TrainExample& ex) {
      const double value = example_loss(factors, config.loss, ex, stepper.grad());
      if (!std::isfinite(value)) throw DivergedError("diverged: non-finite loss");
      loss_sum += value;
      ++n_examples;
      stepper.touch_example(ex, pair);
      if (stepper.pending() >= batch) stepper.flush();
    };
    for (auto k : order) {
      const auto [u, i] = pairs[k];
      const auto negatives =
          sample_negatives(u, sampler.negatives_per_positive, positives, popularity, sampler, rng);
      if (pair) {
        for (auto j : negatives) consume(TrainExample{u, i, j, 1.0});
      } else {
        consume(TrainExample{u, i, 0, 1.0});
        for (auto j : negatives) consume(TrainExample{u, j, 0, 0.0});
      }
    }
    stepper.flush();

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, n_examples));
    if (!std::isfinite(record.loss) || !std::isfinite(factors.l2_norm())) throw DivergedError("diverged");

    if (validate) {
      const FactorModel snapshot(kind, factors);
      const double metric = evaluate_all(snapshot, *validation, cutoffs).front().mean[Metric::ndcg];
      record.validation_ndcg = metric;
      if (metric > best_metric) {
        best_metric = metric;
        best = factors;
        trace.best_epoch = epoch;
      }
    } else {
      trace.best_epoch = epoch;
    }
    trace.epochs.push_back(record);

    if (validate && epoch - trace.best_epoch > config.patience) {
      trace.stop_reason = StopReason::patience;
      break;
    }
  }
  if (!validate) best = std::move(factors);
  return TrainResult{std::make_unique<FactorModel>(kind, std::move(best)), std::move(trace)};
}

TrainResult train_mf(const SplitBundle& split, const TrainConfig& config) {
  const EvalSet validation = make_eval_set(split.validation, split.validation_candidates);
  return train_factor_model(ModelKind::mf, split.train, &validation, config);
}

TrainResult train_fm(const SplitBundle& split, const TrainConfig& config) {
  const EvalSet validation = make_eval_set(split.validation, split.validation_candidates);
  return train_factor_model(ModelKind::fm, split.train, &validation, config);
}

}  // namespace daisy
