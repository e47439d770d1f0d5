#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "daisy/error.hpp"
#include "daisy/tune.hpp"

namespace daisy {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_draw(Rng& rng) {
  const double u1 = 1.0 - uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Mixture of Gaussians truncated to [lo, hi], one per observation.
class ParzenEstimator {
 public:
  /// One kernel per observation plus a broad prior kernel at the midpoint
  /// (sigma = range), so the good-set density never collapses onto a cluster.
  ParzenEstimator(const std::vector<double>& points, double lo, double hi) : lo_(lo), hi_(hi) {
    const double range = hi - lo;
    means_ = points;
    means_.push_back(0.5 * (lo + hi));
    std::vector<std::size_t> order(means_.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return means_[a] < means_[b]; });
    const double floor = range / std::min(100.0, 1.0 + static_cast<double>(means_.size()));
    sigmas_.assign(means_.size(), range);
    for (std::size_t r = 0; r < order.size(); ++r) {
      const std::size_t k = order[r];
      if (k + 1 == means_.size()) continue;  // prior keeps sigma = range
      const double left = r == 0 ? 0.0 : means_[k] - means_[order[r - 1]];
      const double right = r + 1 == order.size() ? 0.0 : means_[order[r + 1]] - means_[k];
      sigmas_[k] = std::clamp(std::max(left, right), floor, range);
    }
    mass_.resize(means_.size());
    for (std::size_t k = 0; k < means_.size(); ++k)
      mass_[k] = normal_cdf((hi - means_[k]) / sigmas_[k]) - normal_cdf((lo - means_[k]) / sigmas_[k]);
  }

  double density(double x) const {
    double total = 0.0;
    for (std::size_t k = 0; k < means_.size(); ++k) {
      const double z = (x - means_[k]) / sigmas_[k];
      total += std::exp(-0.5 * z * z) / (sigmas_[k] * std::sqrt(2.0 * std::numbers::pi) * mass_[k]);
    }
    return total / static_cast<double>(means_.size());
  }

  double sample(Rng& rng) const {
    const auto k = static_cast<std::size_t>(uniform_index(rng, means_.size()));
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double x = means_[k] + sigmas_[k] * normal_draw(rng);
      if (x >= lo_ && x <= hi_) return x;
    }
    return std::clamp(means_[k], lo_, hi_);
  }

 private:
  double lo_, hi_;
  std::vector<double> means_, sigmas_, mass_;
};

struct NumericView {
  double lo, hi;
  bool log_scale = false;
  bool integer = false;
};

NumericView numeric_view(const Dimension& dim) {
  if (const auto* d = std::get_if<Uniform>(&dim.domain)) return {d->lo, d->hi};
  if (const auto* d = std::get_if<LogUniform>(&dim.domain)) return {std::log(d->lo), std::log(d->hi), true};
  const auto& d = std::get<IntUniform>(dim.domain);
  return {static_cast<double>(d.lo) - 0.5, static_cast<double>(d.hi) + 0.5, false, true};
}

double to_internal(const NumericView& view, const ParamValue& v) {
  const double x = as_real(v);
  return view.log_scale ? std::log(x) : x;
}

ParamValue from_internal(const NumericView& view, const Dimension& dim, double x) {
  if (view.integer) {
    const auto& d = std::get<IntUniform>(dim.domain);
    return std::clamp<std::int64_t>(std::llround(x), d.lo, d.hi);
  }
  if (view.log_scale) {
    const auto& d = std::get<LogUniform>(dim.domain);
    return std::clamp(std::exp(x), d.lo, d.hi);
  }
  return std::clamp(x, view.lo, view.hi);
}

std::size_t category_index(const Categorical& c, const ParamValue& v) {
  for (std::size_t k = 0; k < c.values.size(); ++k)
    if (c.values[k] == v) return k;
  return c.values.size();
}

}  // namespace

TpeSampler::TpeSampler(SearchSpace space, TpeConfig config, std::uint64_t seed)
    : space_(std::move(space)), config_(config), rng_(seed) {
  space_.validate();
  if (!(config_.gamma > 0.0 && config_.gamma < 1.0)) throw TuneError("TPE gamma must lie in (0, 1)");
  if (config_.n_candidates == 0) throw TuneError("TPE needs at least one candidate");
}

Params TpeSampler::propose(std::span<const Observation> history) {
  if (history.size() < config_.n_startup || history.size() < 2) return sample_random(space_, rng_);
  const bool degenerate = std::all_of(history.begin(), history.end(), [&](const Observation& o) {
    return o.objective == history.front().objective;
  });
  if (degenerate) return sample_random(space_, rng_);

  std::vector<std::size_t> order(history.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return history[a].objective > history[b].objective; });
  const auto n_good = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config_.gamma * static_cast<double>(history.size()))));

  Params proposal;
  for (const auto& dim : space_.dimensions) {
    if (const auto* cat = std::get_if<Categorical>(&dim.domain)) {
      const std::size_t c = cat->values.size();
      std::vector<double> good(c, 1.0), bad(c, 1.0);  // add-one smoothing
      double good_total = static_cast<double>(c), bad_total = static_cast<double>(c);
      for (std::size_t r = 0; r < order.size(); ++r) {
        const auto it = history[order[r]].params.find(dim.name);
        if (it == history[order[r]].params.end()) continue;
        const auto k = category_index(*cat, it->second);
        if (k >= c) continue;
        if (r < n_good) {
          good[k] += 1.0;
          good_total += 1.0;
        } else {
          bad[k] += 1.0;
          bad_total += 1.0;
        }
      }
      std::vector<double> cumulative(c);
      double acc = 0.0;
      for (std::size_t k = 0; k < c; ++k) cumulative[k] = acc += good[k];
      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < config_.n_candidates; ++s) {
        const double x = uniform_unit(rng_) * acc;
        const auto k = std::min<std::size_t>(
            static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), x) - cumulative.begin()),
            c - 1);
        const double score = std::log(good[k] / good_total) - std::log(bad[k] / bad_total);
        if (score > best_score) {
          best_score = score;
          best = k;
        }
      }
      proposal[dim.name] = cat->values[best];
      continue;
    }

    const auto view = numeric_view(dim);
    std::vector<double> good_points, bad_points;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto it = history[order[r]].params.find(dim.name);
      if (it == history[order[r]].params.end()) continue;
      (r < n_good ? good_points : bad_points).push_back(to_internal(view, it->second));
    }
    if (good_points.empty() || bad_points.empty()) {
      proposal[dim.name] = sample_random(SearchSpace{{dim}}, rng_).at(dim.name);
      continue;
    }
    const ParzenEstimator l(good_points, view.lo, view.hi);
    const ParzenEstimator g(bad_points, view.lo, view.hi);
    double best_x = 0.0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < config_.n_candidates; ++s) {
      const double x = l.sample(rng_);
      const double score = std::log(l.density(x) + 1e-300) - std::log(g.density(x) + 1e-300);
      if (score > best_score) {
        best_score = score;
        best_x = x;
      }
    }
    proposal[dim.name] = from_internal(view, dim, best_x);
  }
  return proposal;
}

}  // namespace daisy
