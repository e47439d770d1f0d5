#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "daisy/dataset.hpp"
#include "daisy/recommender.hpp"

namespace daisy {

/// Versioned binary container for fitted models.
///
/// Layout (all integers and reals little-endian):
///   "DAISYMDL"  8-byte magic
///   u32 format version, u32 model kind, u64 rows (users), u64 cols (items)
///   u64 section count, then per section:
///     u32 name length, name bytes, u8 type (0 = f64, 1 = u64), u64 count, payload
class ModelArchive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  ModelArchive() = default;
  ModelArchive(ModelKind kind, std::uint64_t rows, std::uint64_t cols) : kind_(kind), rows_(rows), cols_(cols) {}

  ModelKind kind() const noexcept { return kind_; }
  std::uint64_t rows() const noexcept { return rows_; }
  std::uint64_t cols() const noexcept { return cols_; }

  void put_reals(const std::string& name, std::vector<double> values);
  void put_indices(const std::string& name, std::vector<std::uint64_t> values);
  const std::vector<double>& reals(const std::string& name) const;
  const std::vector<std::uint64_t>& indices(const std::string& name) const;

  void put_dense(const std::string& name, const DenseMatrix& m);
  DenseMatrix dense(const std::string& name) const;
  void put_csr(const std::string& name, const CsrMatrix& m);
  CsrMatrix csr(const std::string& name) const;

  void write(std::ostream& out) const;
  static ModelArchive read(std::istream& in);

 private:
  ModelKind kind_ = ModelKind::mostpop;
  std::uint64_t rows_ = 0;
  std::uint64_t cols_ = 0;
  std::map<std::string, std::vector<double>> reals_;
  std::map<std::string, std::vector<std::uint64_t>> indices_;
};

}  // namespace daisy
