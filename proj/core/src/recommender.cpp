#include "daisy/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "daisy/error.hpp"
#include "daisy/model_io.hpp"

namespace daisy {

ModelKind parse_model_kind(std::string_view text) {
  if (text == "mostpop") return ModelKind::mostpop;
  if (text == "itemknn") return ModelKind::itemknn;
  if (text == "puresvd") return ModelKind::puresvd;
  if (text == "slim") return ModelKind::slim;
  if (text == "mf" || text == "bprmf") return ModelKind::mf;
  if (text == "fm" || text == "bprfm") return ModelKind::fm;
  throw ModelError("unknown model '" + std::string(text) + "'");
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::mostpop: return "mostpop";
    case ModelKind::itemknn: return "itemknn";
    case ModelKind::puresvd: return "puresvd";
    case ModelKind::slim: return "slim";
    case ModelKind::mf: return "mf";
    case ModelKind::fm: return "fm";
  }
  return "unknown";
}

void Recommender::score_items(UserIndex user, std::span<const ItemIndex> items, std::span<double> out) const {
  for (std::size_t k = 0; k < items.size(); ++k) out[k] = score(user, items[k]);
}

std::vector<ItemIndex> Recommender::recommend(UserIndex user, std::span<const ItemIndex> candidates,
                                              std::size_t n) const {
  std::vector<double> scores(candidates.size());
  score_items(user, candidates, scores);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  // NaN sorts last so a broken score cannot reorder valid ones.
  auto key = [&](std::size_t k) { return std::isnan(scores[k]) ? -INFINITY : scores[k]; };
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = key(a), sb = key(b);
    if (sa != sb) return sa > sb;
    return candidates[a] < candidates[b];
  };
  const std::size_t take = std::min(n, candidates.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
  std::vector<ItemIndex> ranked(take);
  for (std::size_t k = 0; k < take; ++k) ranked[k] = candidates[order[k]];
  return ranked;
}

MostPop::MostPop(std::vector<double> counts, std::size_t n_users) : counts_(std::move(counts)), n_users_(n_users) {}

double MostPop::score(UserIndex, ItemIndex item) const {
  return item < counts_.size() ? counts_[item] : 0.0;
}

void MostPop::save(ModelArchive& archive) const { archive.put_reals("counts", counts_); }

std::unique_ptr<MostPop> fit_mostpop(const InteractionLog& train) {
  if (train.empty()) throw ModelError("cannot fit MostPop on an empty training set");
  std::vector<double> counts(train.num_items(), 0.0);
  for (const auto& r : train.records())
    if (r.value > 0) counts[r.item] += 1.0;
  return std::make_unique<MostPop>(std::move(counts), train.num_users());
}

}  // namespace daisy
