#include "daisy/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "daisy/error.hpp"

namespace daisy {
namespace {

bool usable(const TrialRecord& t) {
  return std::all_of(t.metrics.values.begin(), t.metrics.values.end(), [](double v) { return std::isfinite(v); });
}

// Counts pairs (a, b) with a before b and key[a] > key[b], sorting by key.
std::uint64_t merge_count(std::vector<double>& key, std::vector<double>& scratch, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(key, scratch, lo, mid) + merge_count(key, scratch, mid, hi);
  std::size_t i = lo, j = mid, out = lo;
  while (i < mid && j < hi) {
    if (key[j] < key[i]) {
      swaps += mid - i;
      scratch[out++] = key[j++];
    } else {
      scratch[out++] = key[i++];
    }
  }
  while (i < mid) scratch[out++] = key[i++];
  while (j < hi) scratch[out++] = key[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            key.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

std::uint64_t tied_pairs(std::span<const double> sorted) {
  std::uint64_t total = 0;
  std::size_t run = 1;
  for (std::size_t k = 1; k <= sorted.size(); ++k) {
    if (k < sorted.size() && sorted[k] == sorted[k - 1]) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

std::string cell_text(const std::optional<double>& v, const char* missing) {
  return v ? format_real(*v) : std::string(missing);
}

}  // namespace

CoOptimalityMatrix co_optimality(std::span<const std::vector<TrialRecord>> runs) {
  CoOptimalityMatrix result;
  std::array<std::array<double, 6>, 6> hits{};
  for (const auto& run : runs) {
    std::vector<const TrialRecord*> trials;
    bool rejected = false;
    for (const auto& t : run) {
      if (t.status == TrialStatus::diverged) continue;
      if (!usable(t)) {
        rejected = true;
        break;
      }
      trials.push_back(&t);
    }
    if (rejected || trials.empty()) {
      ++result.rejected;
      continue;
    }
    std::stable_sort(trials.begin(), trials.end(),
                     [](const TrialRecord* a, const TrialRecord* b) { return a->trial_id < b->trial_id; });
    MetricValues best;
    best.values.fill(-std::numeric_limits<double>::infinity());
    for (const auto* t : trials)
      for (std::size_t m = 0; m < 6; ++m) best.values[m] = std::max(best.values[m], t->metrics.values[m]);
    for (std::size_t m = 0; m < 6; ++m) {
      const auto* winner = *std::find_if(trials.begin(), trials.end(),
                                         [&](const TrialRecord* t) { return t->metrics.values[m] == best.values[m]; });
      for (std::size_t m2 = 0; m2 < 6; ++m2)
        if (winner->metrics.values[m2] == best.values[m2]) hits[m][m2] += 1.0;
    }
    ++result.runs;
  }
  if (result.runs == 0) throw AnalysisError("no usable runs for co-optimality");
  for (std::size_t m = 0; m < 6; ++m)
    for (std::size_t m2 = 0; m2 < 6; ++m2) result.cells[m][m2] = hits[m][m2] / static_cast<double>(result.runs);
  return result;
}

std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw AnalysisError("kendall_tau_b needs equal-length inputs");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t k = 0; k < n; ++k) {
    xs[k] = x[order[k]];
    ys[k] = y[order[k]];
  }
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 = tied_pairs(xs);
  std::uint64_t n3 = 0;
  {
    std::size_t run = 1;
    for (std::size_t k = 1; k <= n; ++k) {
      if (k < n && xs[k] == xs[k - 1] && ys[k] == ys[k - 1]) {
        ++run;
      } else {
        n3 += run * (run - 1) / 2;
        run = 1;
      }
    }
  }
  std::vector<double> scratch(n);
  const std::uint64_t swaps = merge_count(ys, scratch, 0, n);  // ys is sorted afterwards
  const std::uint64_t n2 = tied_pairs(ys);
  if (n0 == n1 || n0 == n2) return std::nullopt;
  const double numerator = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                           static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
  const double denominator =
      std::sqrt(static_cast<double>(n0 - n1)) * std::sqrt(static_cast<double>(n0 - n2));
  return std::clamp(numerator / denominator, -1.0, 1.0);
}

MetricMatrix kendall_matrix(std::span<const MetricValues> table) {
  if (table.size() < 2) throw AnalysisError("Kendall matrix needs at least two methods");
  MetricMatrix out{};
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = a; b < 6; ++b) {
      std::vector<double> xa, xb;
      for (const auto& row : table) {
        if (std::isnan(row.values[a]) || std::isnan(row.values[b])) continue;
        xa.push_back(row.values[a]);
        xb.push_back(row.values[b]);
      }
      std::optional<double> tau;
      if (a == b) {
        // Undefined for a constant column like every other cell in its row.
        if (kendall_tau_b(xa, xb)) tau = 1.0;
      } else {
        tau = kendall_tau_b(xa, xb);
      }
      out[a][b] = tau;
      out[b][a] = tau;
    }
  }
  return out;
}

void write_matrix_csv(const std::filesystem::path& path, const MetricMatrix& matrix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AnalysisError("cannot write " + path.string());
  out << "metric";
  for (Metric m : kAllMetrics) out << ',' << metric_name(m);
  out << '\n';
  for (std::size_t r = 0; r < 6; ++r) {
    out << metric_name(kAllMetrics[r]);
    for (std::size_t c = 0; c < 6; ++c) out << ',' << cell_text(matrix[r][c], "NA");
    out << '\n';
  }
}

void write_heatmap_data(const std::filesystem::path& path, const MetricMatrix& matrix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AnalysisError("cannot write " + path.string());
  out << "#";
  for (Metric m : kAllMetrics) out << ' ' << metric_name(m);
  out << '\n';
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) out << r << ' ' << c << ' ' << cell_text(matrix[r][c], "NaN") << '\n';
    out << '\n';
  }
}

}  // namespace daisy
