#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "daisy/dataset.hpp"
#include "daisy/split.hpp"

namespace daisy {

class Recommender;

/// Metric order used by every table and matrix the toolkit emits.
enum class Metric { precision = 0, recall, hr, map, mrr, ndcg };
inline constexpr std::array<Metric, 6> kAllMetrics = {Metric::precision, Metric::recall, Metric::hr,
                                                     Metric::map,       Metric::mrr,    Metric::ndcg};

std::string_view metric_name(Metric m);
/// Case-insensitive; accepts "precision", "HR", "ndcg", ...
Metric parse_metric(std::string_view text);

struct MetricValues {
  std::array<double, 6> values{};

  double& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
  double operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
};

enum class MapNormalizer { min_truth_cutoff, truth_size };

struct MetricOptions {
  MapNormalizer map_normalizer = MapNormalizer::min_truth_cutoff;
};

/// Six top-N metrics for one user. `ranked` is the recommendation list (only
/// its first n entries count), `truth` the user's test items sorted ascending.
/// Returns nullopt when `truth` is empty: such users are left out of means.
std::optional<MetricValues> evaluate_user(std::span<const ItemIndex> ranked, std::span<const ItemIndex> truth,
                                          std::size_t n, const MetricOptions& options = {});

/// Target items and candidate lists for a set of users.
struct EvalSet {
  CandidateMap candidates;
  std::map<UserIndex, std::vector<ItemIndex>> truth;  // sorted, distinct

  bool empty() const noexcept { return truth.empty(); }
};

EvalSet make_eval_set(const InteractionLog& targets, const CandidateMap& candidates);

struct MetricReport {
  std::size_t cutoff = 0;
  MetricValues mean;
  std::size_t users = 0;
  std::vector<std::pair<UserIndex, MetricValues>> per_user;  // filled on request
};

/// Ranks each user's candidates once at max(cutoffs) and scores every cutoff.
/// Means use compensated summation in user order, so results do not depend
/// on the thread count.
std::vector<MetricReport> evaluate_all(const Recommender& model, const EvalSet& eval,
                                       std::span<const std::size_t> cutoffs, const MetricOptions& options = {},
                                       bool keep_per_user = false, std::size_t threads = 1);

/// Shortest round-trip decimal form; used for every numeric text output.
std::string format_real(double value);

/// `metric,N,value` rows.
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricReport> reports);
void write_metrics_json(const std::filesystem::path& path, std::span<const MetricReport> reports);
/// `user,N,metric,value` rows for reports that kept per-user values.
void write_per_user_csv(const std::filesystem::path& path, std::span<const MetricReport> reports);

}  // namespace daisy
