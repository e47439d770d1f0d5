#include "daisy/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "daisy/error.hpp"
#include "daisy/parallel.hpp"
#include "daisy/recommender.hpp"

namespace daisy {
namespace {

// Neumaier summation.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      carry += (sum - t) + x;
    else
      carry += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::precision: return "Precision";
    case Metric::recall: return "Recall";
    case Metric::hr: return "HR";
    case Metric::map: return "MAP";
    case Metric::mrr: return "MRR";
    case Metric::ndcg: return "NDCG";
  }
  return "?";
}

Metric parse_metric(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto m : kAllMetrics) {
    std::string name(metric_name(m));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    if (name == lower) return m;
  }
  throw ConfigError("unknown metric '" + std::string(text) + "'");
}

std::optional<MetricValues> evaluate_user(std::span<const ItemIndex> ranked, std::span<const ItemIndex> truth,
                                          std::size_t n, const MetricOptions& options) {
  if (truth.empty()) return std::nullopt;
  if (n == 0) throw ConfigError("cutoff N must be >= 1");
  const std::size_t depth = std::min(n, ranked.size());

  std::size_t hits = 0;
  std::size_t first_hit = 0;  // 1-based, 0 = none
  double precision_sum = 0.0;
  double dcg = 0.0;
  for (std::size_t j = 0; j < depth; ++j) {
    if (!std::binary_search(truth.begin(), truth.end(), ranked[j])) continue;
    ++hits;
    if (first_hit == 0) first_hit = j + 1;
    precision_sum += static_cast<double>(hits) / static_cast<double>(j + 1);
    dcg += 1.0 / std::log2(static_cast<double>(j + 2));
  }
  const std::size_t ideal_hits = std::min(truth.size(), n);
  double idcg = 0.0;
  for (std::size_t j = 0; j < ideal_hits; ++j) idcg += 1.0 / std::log2(static_cast<double>(j + 2));
  const double map_norm = options.map_normalizer == MapNormalizer::min_truth_cutoff
                              ? static_cast<double>(ideal_hits)
                              : static_cast<double>(truth.size());

  MetricValues v;
  v[Metric::precision] = static_cast<double>(hits) / static_cast<double>(n);
  v[Metric::recall] = static_cast<double>(hits) / static_cast<double>(truth.size());
  v[Metric::hr] = hits > 0 ? 1.0 : 0.0;
  v[Metric::map] = precision_sum / map_norm;
  v[Metric::mrr] = first_hit > 0 ? 1.0 / static_cast<double>(first_hit) : 0.0;
  v[Metric::ndcg] = dcg / idcg;
  return v;
}

EvalSet make_eval_set(const InteractionLog& targets, const CandidateMap& candidates) {
  EvalSet eval;
  for (const auto& r : targets.records()) eval.truth[r.user].push_back(r.item);
  for (auto& [user, items] : eval.truth) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    auto it = candidates.find(user);
    if (it == candidates.end())
      throw ConfigError("no candidate list for evaluated user " + std::to_string(user));
    eval.candidates.emplace(user, it->second);
  }
  return eval;
}

std::vector<MetricReport> evaluate_all(const Recommender& model, const EvalSet& eval,
                                       std::span<const std::size_t> cutoffs, const MetricOptions& options,
                                       bool keep_per_user, std::size_t threads) {
  if (cutoffs.empty()) throw ConfigError("no metric cutoffs given");
  const std::size_t depth = *std::max_element(cutoffs.begin(), cutoffs.end());
  std::vector<UserIndex> users;
  users.reserve(eval.truth.size());
  for (const auto& [u, t] : eval.truth)
    if (!t.empty()) users.push_back(u);

  // per_user_values[k][c] = metrics of users[k] at cutoffs[c]
  std::vector<std::vector<MetricValues>> per_user_values(users.size());
  parallel_for(
      users.size(),
      [&](std::size_t k) {
        const UserIndex u = users[k];
        const auto cand = eval.candidates.find(u);
        if (cand == eval.candidates.end())
          throw ConfigError("no candidate list for evaluated user " + std::to_string(u));
        const auto ranked = model.recommend(u, cand->second, depth);
        const auto& truth = eval.truth.at(u);
        auto& row = per_user_values[k];
        row.reserve(cutoffs.size());
        for (auto n : cutoffs) row.push_back(*evaluate_user(ranked, truth, n, options));
      },
      threads);

  std::vector<MetricReport> reports(cutoffs.size());
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    auto& report = reports[c];
    report.cutoff = cutoffs[c];
    report.users = users.size();
    std::array<CompensatedSum, 6> sums{};
    for (std::size_t k = 0; k < users.size(); ++k) {
      const auto& v = per_user_values[k][c];
      for (std::size_t m = 0; m < 6; ++m) sums[m].add(v.values[m]);
      if (keep_per_user) report.per_user.emplace_back(users[k], v);
    }
    if (!users.empty())
      for (std::size_t m = 0; m < 6; ++m) report.mean.values[m] = sums[m].value() / static_cast<double>(users.size());
  }
  return reports;
}

std::string format_real(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricReport> reports) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("eval", "cannot write " + path.string());
  out << "metric,N,value\n";
  for (const auto& r : reports)
    for (auto m : kAllMetrics) out << metric_name(m) << ',' << r.cutoff << ',' << format_real(r.mean[m]) << '\n';
}

void write_metrics_json(const std::filesystem::path& path, std::span<const MetricReport> reports) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json entry;
    entry["N"] = r.cutoff;
    entry["users"] = r.users;
    for (auto m : kAllMetrics) entry[std::string(metric_name(m))] = r.mean[m];
    j.push_back(entry);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("eval", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_per_user_csv(const std::filesystem::path& path, std::span<const MetricReport> reports) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("eval", "cannot write " + path.string());
  out << "user,N,metric,value\n";
  for (const auto& r : reports)
    for (const auto& [u, v] : r.per_user)
      for (auto m : kAllMetrics)
        out << u << ',' << r.cutoff << ',' << metric_name(m) << ',' << format_real(v[m]) << '\n';
}

}  // namespace daisy
