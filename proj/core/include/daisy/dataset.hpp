#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace daisy {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

/// One feedback record. Users and items are held as dense indices into the
/// owning log's index maps; raw identifiers are recovered through the maps.
struct Interaction {
  UserIndex user = 0;
  ItemIndex item = 0;
  double value = 1.0;
  std::int64_t timestamp = 0;  // meaningful only when the log has timestamps

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Bijection between raw identifiers and dense indices [0, size()).
/// Indices are handed out in first-appearance order.
class IndexMap {
 public:
  std::uint32_t get_or_insert(std::string_view raw);
  std::optional<std::uint32_t> find(std::string_view raw) const;
  const std::string& raw(std::uint32_t index) const { return raw_ids_.at(index); }
  std::size_t size() const noexcept { return raw_ids_.size(); }
  std::span<const std::string> raw_ids() const noexcept { return raw_ids_; }

  friend bool operator==(const IndexMap& a, const IndexMap& b) { return a.raw_ids_ == b.raw_ids_; }

 private:
  std::vector<std::string> raw_ids_;
  std::unordered_map<std::string, std::uint32_t> lookup_;
};

/// Immutable interaction log plus the user/item index maps it refers to.
/// Logs derived by splitting share their parent's maps, so a user index means
/// the same user in train, validation and test.
class InteractionLog {
 public:
  InteractionLog() = default;
  InteractionLog(std::vector<Interaction> records, std::shared_ptr<const IndexMap> users,
                 std::shared_ptr<const IndexMap> items, bool has_timestamps);

  std::span<const Interaction> records() const noexcept { return records_; }
  const Interaction& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  std::size_t num_users() const noexcept { return users_ ? users_->size() : 0; }
  std::size_t num_items() const noexcept { return items_ ? items_->size() : 0; }
  const IndexMap& users() const { return *users_; }
  const IndexMap& items() const { return *items_; }
  const std::shared_ptr<const IndexMap>& user_map() const noexcept { return users_; }
  const std::shared_ptr<const IndexMap>& item_map() const noexcept { return items_; }
  bool has_timestamps() const noexcept { return has_timestamps_; }

  /// Same index maps, the records at `indices` in the given order.
  InteractionLog subset(std::span<const std::size_t> indices) const;
  /// Same index maps, new records.
  InteractionLog with_records(std::vector<Interaction> records) const;
  /// Drops unused users/items and rebuilds dense maps in first-appearance order.
  InteractionLog reindexed() const;

 private:
  std::vector<Interaction> records_;
  std::shared_ptr<const IndexMap> users_;
  std::shared_ptr<const IndexMap> items_;
  bool has_timestamps_ = false;
};

/// A column is addressed either by zero-based position or by header name.
using ColumnRef = std::variant<std::size_t, std::string>;

struct ColumnSchema {
  ColumnRef user = std::size_t{0};
  ColumnRef item = std::size_t{1};
  std::optional<ColumnRef> value;
  std::optional<ColumnRef> timestamp;
  bool header = false;
};

/// Reads a delimited text file. Throws DatasetError naming the line number
/// of the first malformed row.
InteractionLog ingest(const std::filesystem::path& path, const ColumnSchema& schema, char delimiter);

/// Writes `user<d>item<d>value[<d>timestamp]` rows with raw identifiers.
void write_log(const std::filesystem::path& path, const InteractionLog& log, char delimiter = ',');

/// Describes a dataset file so it can be re-ingested and verified later.
struct DatasetManifest {
  std::filesystem::path path;  // absolute, or relative to the manifest file
  ColumnSchema schema;
  char delimiter = ',';
  std::string sha256;
};

DatasetManifest make_manifest(const std::filesystem::path& data_path, ColumnSchema schema,
                              char delimiter);
DatasetManifest load_manifest(const std::filesystem::path& manifest_path);
void save_manifest(const std::filesystem::path& manifest_path, const DatasetManifest& manifest);
/// Ingests the manifest's file after checking its content hash.
InteractionLog ingest(const DatasetManifest& manifest);

/// Compressed sparse rows over users; column indices strictly increasing
/// within each row.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return col_idx.size(); }
  std::span<const std::uint32_t> row(std::size_t r) const {
    return {col_idx.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
  bool contains(std::size_t r, std::uint32_t c) const;
  CsrMatrix transpose() const;
};

/// Binary user-item matrix: entry 1 wherever a positive (value > 0) record
/// exists; duplicates collapse. Throws DatasetError("empty dataset").
CsrMatrix to_matrix(const InteractionLog& log);

}  // namespace daisy
