#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "daisy/metrics.hpp"
#include "daisy/tune.hpp"

namespace daisy {

/// 6×6 matrix in kAllMetrics order; empty cells are undefined values.
using MetricMatrix = std::array<std::array<std::optional<double>, 6>, 6>;

struct CoOptimalityMatrix {
  MetricMatrix cells{};
  std::size_t runs = 0;      // runs counted in the denominator
  std::size_t rejected = 0;  // runs dropped for missing metrics
};

/// For each run and metric m, the trial maximising m (lowest trial_id on
/// ties) scores a hit in (m, m') when its m' equals the run's best m'.
/// Diverged trials are skipped; a run with an ok trial lacking a finite
/// metric, or with no ok trial at all, is rejected.
CoOptimalityMatrix co_optimality(std::span<const std::vector<TrialRecord>> runs);

/// Tie-corrected Kendall rank correlation; nullopt when either side is
/// constant or fewer than two points are given.
std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// τ-b between every pair of metric columns over the methods in `table`.
/// NaN cells are missing; each pair uses the methods where both are present.
MetricMatrix kendall_matrix(std::span<const MetricValues> table);

/// Header `metric,Precision,...`, one row per metric, NA for missing cells.
void write_matrix_csv(const std::filesystem::path& path, const MetricMatrix& matrix);
/// `row col value` triples with blank lines between rows (gnuplot `matrix`
/// style heatmap input); missing cells are written as NaN.
void write_heatmap_data(const std::filesystem::path& path, const MetricMatrix& matrix);

}  // namespace daisy
