#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "daisy/error.hpp"
#include "daisy/model_io.hpp"
#include "daisy/random.hpp"
#include "daisy/recommender.hpp"

namespace daisy {
namespace {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

SparseRows to_eigen(const CsrMatrix& m) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(m.nnz());
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto cols = m.row(r);
    const auto vals = m.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k)
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(cols[k]), vals[k]);
  }
  SparseRows s(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
  s.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

// Box-Muller on our own uniform source keeps the sketch reproducible across
// standard library implementations.
Eigen::MatrixXd gaussian_sketch(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; r += 2) {
      const double u1 = 1.0 - uniform_unit(rng);
      const double u2 = uniform_unit(rng);
      const double radius = std::sqrt(-2.0 * std::log(u1));
      g(r, c) = radius * std::cos(2.0 * std::numbers::pi * u2);
      if (r + 1 < rows) g(r + 1, c) = radius * std::sin(2.0 * std::numbers::pi * u2);
    }
  }
  return g;
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace

TruncatedSvd randomized_svd(const CsrMatrix& matrix, std::size_t rank, const RsvdConfig& config) {
  if (rank == 0) throw ModelError("SVD rank must be >= 1");
  const auto m = static_cast<Eigen::Index>(matrix.rows);
  const auto n = static_cast<Eigen::Index>(matrix.cols);
  if (m == 0 || n == 0) throw ModelError("SVD of an empty matrix");
  const SparseRows a = to_eigen(matrix);
  const Eigen::Index sketch = std::min<Eigen::Index>(static_cast<Eigen::Index>(rank + config.oversampling), std::min(m, n));

  Rng rng(config.seed);
  Eigen::MatrixXd q = orthonormal_basis(a * gaussian_sketch(n, sketch, rng));
  auto power_step = [&] {
    const Eigen::MatrixXd z = orthonormal_basis(a.transpose() * q);
    q = orthonormal_basis(a * z);
  };
  const auto kept = std::min<Eigen::Index>(static_cast<Eigen::Index>(rank), sketch);
  auto leading_right = [&] {
    const Eigen::MatrixXd b = (a.transpose() * q).transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinV);
    return Eigen::MatrixXd(svd.matrixV().leftCols(kept));
  };

  std::size_t it = 0;
  for (; it < config.power_iterations; ++it) power_step();
  // The sketch spans the whole range when it is as wide as the matrix.
  if (config.tolerance > 0.0 && sketch < std::min(m, n)) {
    Eigen::MatrixXd previous = leading_right();
    for (; it < config.max_power_iterations; ++it) {
      power_step();
      Eigen::MatrixXd current = leading_right();
      const double drift = (current - previous * (previous.transpose() * current)).norm();
      previous = std::move(current);
      if (drift < config.tolerance) break;
    }
  }

  const Eigen::MatrixXd b = (a.transpose() * q).transpose();  // sketch × n
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd u = q * svd.matrixU();
  const Eigen::MatrixXd& v = svd.matrixV();
  const auto& s = svd.singularValues();

  TruncatedSvd out;
  out.u = DenseMatrix(matrix.rows, rank);
  out.v = DenseMatrix(matrix.cols, rank);
  out.sigma.assign(rank, 0.0);
  for (Eigen::Index c = 0; c < kept; ++c) {
    out.sigma[c] = s(c);
    for (Eigen::Index r = 0; r < m; ++r) out.u(r, c) = u(r, c);
    for (Eigen::Index r = 0; r < n; ++r) out.v(r, c) = v(r, c);
  }
  return out;
}

PureSvd::PureSvd(DenseMatrix user_factors, DenseMatrix item_factors)
    : user_factors_(std::move(user_factors)), item_factors_(std::move(item_factors)) {
  if (user_factors_.cols != item_factors_.cols) throw ModelError("PureSVD factor widths differ");
}

double PureSvd::score(UserIndex user, ItemIndex item) const {
  if (user >= user_factors_.rows || item >= item_factors_.rows) return 0.0;
  const auto p = user_factors_.row(user);
  const auto q = item_factors_.row(item);
  double s = 0.0;
  for (std::size_t f = 0; f < p.size(); ++f) s += p[f] * q[f];
  return s;
}

void PureSvd::save(ModelArchive& archive) const {
  archive.put_dense("user_factors", user_factors_);
  archive.put_dense("item_factors", item_factors_);
}

std::unique_ptr<PureSvd> fit_puresvd(const InteractionLog& train, std::size_t factors, const RsvdConfig& config) {
  const auto matrix = to_matrix(train);
  auto svd = randomized_svd(matrix, factors, config);
  for (std::size_t r = 0; r < svd.u.rows; ++r)
    for (std::size_t c = 0; c < factors; ++c) svd.u(r, c) *= svd.sigma[c];
  return std::make_unique<PureSvd>(std::move(svd.u), std::move(svd.v));
}

}  // namespace daisy
