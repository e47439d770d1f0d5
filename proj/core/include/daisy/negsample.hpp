#pragma once

#include <string_view>
#include <vector>

#include "daisy/dataset.hpp"
#include "daisy/random.hpp"

namespace daisy {

enum class SamplerKind { uniform, high_pop, low_pop, uniform_high_pop, uniform_low_pop };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::uniform;
  int negatives_per_positive = 0;  // 0: 1 for pair-wise losses, 4 for point-wise
  double popularity_exponent = 1.0;
};

SamplerKind parse_sampler_kind(std::string_view text);
std::string_view sampler_kind_name(SamplerKind kind);

/// Item popularity over the training records with cumulative weights for
/// the two popularity-biased draws.
///   high: w_j = max(c_j, 0.5)^alpha      low: w_j = 1 / (c_j + 1)^alpha
class PopularityTable {
 public:
  PopularityTable(const InteractionLog& train, double alpha);

  std::span<const std::size_t> counts() const noexcept { return counts_; }
  double high_weight(ItemIndex item) const { return high_weight_[item]; }
  double low_weight(ItemIndex item) const { return low_weight_[item]; }
  std::size_t num_items() const noexcept { return counts_.size(); }

  ItemIndex draw_high(Rng& rng) const { return draw(high_cumulative_, rng); }
  ItemIndex draw_low(Rng& rng) const { return draw(low_cumulative_, rng); }

 private:
  static ItemIndex draw(const std::vector<double>& cumulative, Rng& rng);

  std::vector<std::size_t> counts_;
  std::vector<double> high_weight_, low_weight_;
  std::vector<double> high_cumulative_, low_cumulative_;
};

/// Draws `k` negatives for `user`, each from the items the user has not
/// interacted with in `train_positives`. Hybrid kinds split the draws half
/// uniform, half popularity-biased.
std::vector<ItemIndex> sample_negatives(UserIndex user, int k, const CsrMatrix& train_positives,
                                        const PopularityTable& table, const SamplerConfig& config,
                                        Rng& rng);

}  // namespace daisy
