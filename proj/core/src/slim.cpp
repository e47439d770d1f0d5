#include <algorithm>
#include <cmath>

#include "daisy/error.hpp"
#include "daisy/model_io.hpp"
#include "daisy/parallel.hpp"
#include "daisy/recommender.hpp"

namespace daisy {
namespace {

// Items sharing at least one user with j, excluding j, ascending.
std::vector<ItemIndex> co_occurring(const CsrMatrix& user_items, const CsrMatrix& item_users, ItemIndex j) {
  std::vector<ItemIndex> items;
  for (auto u : item_users.row(j))
    for (auto k : user_items.row(u))
      if (k != j) items.push_back(k);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

}  // namespace

double slim_column_objective(const CsrMatrix& item_users, ItemIndex j, std::span<const double> w, double l1,
                             double l2) {
  const std::size_t m = item_users.cols;
  std::vector<double> residual(m, 0.0);
  for (auto u : item_users.row(j)) residual[u] = 1.0;
  double penalty = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] == 0.0) continue;
    for (auto u : item_users.row(k)) residual[u] -= w[k];
    penalty += 0.5 * l2 * w[k] * w[k] + l1 * std::abs(w[k]);
  }
  double fit = 0.0;
  for (double r : residual) fit += r * r;
  return 0.5 * fit + penalty;
}

SlimColumn solve_slim_column(const CsrMatrix& user_items, const CsrMatrix& item_users, ItemIndex j, double l1,
                             double l2, const CdConfig& cd, bool record_objective) {
  if (l1 < 0 || l2 < 0) throw ModelError("SLIM penalties must be >= 0");
  SlimColumn col;
  col.support = co_occurring(user_items, item_users, j);
  const std::size_t s = col.support.size();
  std::vector<double> w(s, 0.0);
  std::vector<double> residual(item_users.cols, 0.0);  // a_j - A w
  for (auto u : item_users.row(j)) residual[u] = 1.0;

  auto objective = [&] {
    double fit = 0.0, penalty = 0.0;
    for (double r : residual) fit += r * r;
    for (double x : w) penalty += 0.5 * l2 * x * x + l1 * x;
    return 0.5 * fit + penalty;
  };
  if (record_objective) col.objective_per_sweep.push_back(objective());

  for (int sweep = 0; sweep < cd.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t c = 0; c < s; ++c) {
      const auto users = item_users.row(col.support[c]);
      const double sq_norm = static_cast<double>(users.size());
      double rho = sq_norm * w[c];
      for (auto u : users) rho += residual[u];
      const double denom = sq_norm + l2;
      const double updated = denom > 0.0 ? std::max(0.0, (rho - l1) / denom) : 0.0;
      const double delta = updated - w[c];
      if (delta != 0.0) {
        for (auto u : users) residual[u] -= delta;
        w[c] = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    col.sweeps = sweep + 1;
    if (record_objective) col.objective_per_sweep.push_back(objective());
    if (max_change < cd.tolerance) break;
  }

  for (std::size_t c = 0; c < s; ++c) {
    if (w[c] > 0.0) {
      col.support[col.weights.size()] = col.support[c];
      col.weights.push_back(w[c]);
    }
  }
  col.support.resize(col.weights.size());
  return col;
}

Slim::Slim(CsrMatrix history, CsrMatrix weights_by_column)
    : history_(std::move(history)), columns_(std::move(weights_by_column)) {
  if (columns_.rows != history_.cols) throw ModelError("SLIM weight matrix does not match the item count");
}

double Slim::weight(ItemIndex k, ItemIndex i) const {
  if (i >= columns_.rows) return 0.0;
  const auto rows = columns_.row(i);
  auto it = std::lower_bound(rows.begin(), rows.end(), k);
  if (it == rows.end() || *it != k) return 0.0;
  return columns_.row_values(i)[static_cast<std::size_t>(it - rows.begin())];
}

double Slim::score(UserIndex user, ItemIndex item) const {
  if (user >= history_.rows || item >= columns_.rows) return 0.0;
  const auto seen = history_.row(user);
  const auto support = columns_.row(item);
  const auto weights = columns_.row_values(item);
  double total = 0.0;
  std::size_t a = 0, b = 0;
  while (a < seen.size() && b < support.size()) {
    if (seen[a] < support[b]) {
      ++a;
    } else if (support[b] < seen[a]) {
      ++b;
    } else {
      total += weights[b];
      ++a;
      ++b;
    }
  }
  return total;
}

void Slim::save(ModelArchive& archive) const {
  archive.put_csr("history", history_);
  archive.put_csr("weights", columns_);
}

std::unique_ptr<Slim> fit_slim(const InteractionLog& train, const SlimConfig& config) {
  auto history = to_matrix(train);
  const CsrMatrix item_users = history.transpose();
  const std::size_t n = history.cols;
  std::vector<SlimColumn> cols(n);
  parallel_for(
      n,
      [&](std::size_t j) {
        cols[j] = solve_slim_column(history, item_users, static_cast<ItemIndex>(j), config.l1, config.l2, config.cd);
      },
      config.threads);

  CsrMatrix w;
  w.rows = n;
  w.cols = n;
  w.row_ptr.assign(1, 0);
  for (const auto& c : cols) {
    w.col_idx.insert(w.col_idx.end(), c.support.begin(), c.support.end());
    w.values.insert(w.values.end(), c.weights.begin(), c.weights.end());
    w.row_ptr.push_back(w.col_idx.size());
  }
  return std::make_unique<Slim>(std::move(history), std::move(w));
}

}  // namespace daisy
