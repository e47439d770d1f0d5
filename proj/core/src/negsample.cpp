#include "daisy/negsample.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "daisy/error.hpp"

namespace daisy {
namespace {

constexpr double kZeroCountFloor = 0.5;
// Rejection attempts before falling back to an explicit complement scan.
constexpr int kMaxRejections = 64;

enum class Source { uniform, high, low };

std::vector<double> cumulative(const std::vector<double>& weights) {
  std::vector<double> c(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    total += weights[i];
    c[i] = total;
  }
  return c;
}

ItemIndex draw_from_complement(std::span<const std::uint32_t> positives, std::size_t n_items, Source source,
                               const PopularityTable& table, Rng& rng) {
  double total = 0.0;
  std::vector<std::pair<ItemIndex, double>> pool;
  for (std::size_t i = 0; i < n_items; ++i) {
    const auto item = static_cast<ItemIndex>(i);
    if (std::binary_search(positives.begin(), positives.end(), item)) continue;
    const double w = source == Source::high  ? table.high_weight(item)
                     : source == Source::low ? table.low_weight(item)
                                             : 1.0;
    total += w;
    pool.emplace_back(item, total);
  }
  const double x = uniform_unit(rng) * total;
  auto it = std::upper_bound(pool.begin(), pool.end(), x,
                             [](double v, const auto& entry) { return v < entry.second; });
  if (it == pool.end()) --it;
  return it->first;
}

ItemIndex draw_one(std::span<const std::uint32_t> positives, std::size_t n_items, Source source,
                   const PopularityTable& table, Rng& rng) {
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    ItemIndex item = 0;
    switch (source) {
      case Source::uniform: item = static_cast<ItemIndex>(uniform_index(rng, n_items)); break;
      case Source::high: item = table.draw_high(rng); break;
      case Source::low: item = table.draw_low(rng); break;
    }
    if (!std::binary_search(positives.begin(), positives.end(), item)) return item;
  }
  return draw_from_complement(positives, n_items, source, table, rng);
}

}  // namespace

SamplerKind parse_sampler_kind(std::string_view text) {
  if (text == "uniform") return SamplerKind::uniform;
  if (text == "high_pop") return SamplerKind::high_pop;
  if (text == "low_pop") return SamplerKind::low_pop;
  if (text == "uniform_high_pop") return SamplerKind::uniform_high_pop;
  if (text == "uniform_low_pop") return SamplerKind::uniform_low_pop;
  throw SamplingError("unknown sampler '" + std::string(text) + "'");
}

std::string_view sampler_kind_name(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::uniform: return "uniform";
    case SamplerKind::high_pop: return "high_pop";
    case SamplerKind::low_pop: return "low_pop";
    case SamplerKind::uniform_high_pop: return "uniform_high_pop";
    case SamplerKind::uniform_low_pop: return "uniform_low_pop";
  }
  return "uniform";
}

PopularityTable::PopularityTable(const InteractionLog& train, double alpha)
    : counts_(train.num_items(), 0) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw SamplingError("popularity exponent must be >= 0");
  for (const auto& r : train.records())
    if (r.value > 0) ++counts_[r.item];
  high_weight_.resize(counts_.size());
  low_weight_.resize(counts_.size());
  for (std::size_t j = 0; j < counts_.size(); ++j) {
    const auto c = static_cast<double>(counts_[j]);
    high_weight_[j] = std::pow(c > 0 ? c : kZeroCountFloor, alpha);
    low_weight_[j] = 1.0 / std::pow(c + 1.0, alpha);
  }
  high_cumulative_ = cumulative(high_weight_);
  low_cumulative_ = cumulative(low_weight_);
}

ItemIndex PopularityTable::draw(const std::vector<double>& cumulative, Rng& rng) {
  const double x = uniform_unit(rng) * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  if (it == cumulative.end()) --it;
  return static_cast<ItemIndex>(it - cumulative.begin());
}

std::vector<ItemIndex> sample_negatives(UserIndex user, int k, const CsrMatrix& train_positives,
                                        const PopularityTable& table, const SamplerConfig& config,
                                        Rng& rng) {
  if (k < 1) throw SamplingError("number of negatives must be >= 1");
  const std::size_t n_items = table.num_items();
  const auto positives = user < train_positives.rows ? train_positives.row(user)
                                                     : std::span<const std::uint32_t>{};
  if (positives.size() >= n_items) throw SamplingError("no negatives available");

  std::vector<ItemIndex> out;
  out.reserve(static_cast<std::size_t>(k));
  auto draw_n = [&](int n, Source source) {
    for (int d = 0; d < n; ++d) out.push_back(draw_one(positives, n_items, source, table, rng));
  };
  switch (config.kind) {
    case SamplerKind::uniform: draw_n(k, Source::uniform); break;
    case SamplerKind::high_pop: draw_n(k, Source::high); break;
    case SamplerKind::low_pop: draw_n(k, Source::low); break;
    case SamplerKind::uniform_high_pop:
    case SamplerKind::uniform_low_pop: {
      const Source pop = config.kind == SamplerKind::uniform_high_pop ? Source::high : Source::low;
      draw_n(k / 2, Source::uniform);
      draw_n(k / 2, pop);
      // Odd k: the spare draw picks its source with a fair coin so the
      // expected mix stays half and half even at one negative per positive.
      if (k % 2 == 1) draw_n(1, uniform_unit(rng) < 0.5 ? Source::uniform : pop);
      break;
    }
  }
  return out;
}

}  // namespace daisy
