#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "daisy/tune.hpp"

namespace daisy::testing {

/// τ-b by enumerating every pair.
inline std::optional<double> kendall_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  double concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
  for (std::size_t a = 0; a < x.size(); ++a)
    for (std::size_t b = a + 1; b < x.size(); ++b) {
      const double dx = x[a] - x[b], dy = y[a] - y[b];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        tied_x += 1;
      } else if (dy == 0) {
        tied_y += 1;
      } else if ((dx > 0) == (dy > 0)) {
        concordant += 1;
      } else {
        discordant += 1;
      }
    }
  const double denom = std::sqrt((concordant + discordant + tied_x) * (concordant + discordant + tied_y));
  if (denom == 0) return std::nullopt;
  return (concordant - discordant) / denom;
}

/// Co-optimality counted cell by cell over runs of ok trials with finite metrics.
inline std::array<std::array<double, 6>, 6> co_optimality_recount(const std::vector<std::vector<TrialRecord>>& runs) {
  std::array<std::array<double, 6>, 6> hits{};
  for (const auto& run : runs) {
    for (std::size_t m = 0; m < 6; ++m) {
      for (std::size_t m2 = 0; m2 < 6; ++m2) {
        const TrialRecord* winner = nullptr;
        double best_m2 = -INFINITY;
        for (const auto& t : run) {
          best_m2 = std::max(best_m2, t.metrics.values[m2]);
          if (!winner || t.metrics.values[m] > winner->metrics.values[m] ||
              (t.metrics.values[m] == winner->metrics.values[m] && t.trial_id < winner->trial_id))
            winner = &t;
        }
        if (winner->metrics.values[m2] == best_m2) hits[m][m2] += 1;
      }
    }
  }
  for (auto& row : hits)
    for (double& v : row) v /= static_cast<double>(runs.size());
  return hits;
}

}  // namespace daisy::testing
