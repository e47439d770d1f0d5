#include "daisy/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "daisy/error.hpp"
#include "daisy/hashing.hpp"

namespace daisy {

std::uint32_t IndexMap::get_or_insert(std::string_view raw) {
  auto it = lookup_.find(std::string(raw));
  if (it != lookup_.end()) return it->second;
  const auto index = static_cast<std::uint32_t>(raw_ids_.size());
  raw_ids_.emplace_back(raw);
  lookup_.emplace(raw_ids_.back(), index);
  return index;
}

std::optional<std::uint32_t> IndexMap::find(std::string_view raw) const {
  auto it = lookup_.find(std::string(raw));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

InteractionLog::InteractionLog(std::vector<Interaction> records, std::shared_ptr<const IndexMap> users,
                               std::shared_ptr<const IndexMap> items, bool has_timestamps)
    : records_(std::move(records)),
      users_(users ? std::move(users) : std::make_shared<const IndexMap>()),
      items_(items ? std::move(items) : std::make_shared<const IndexMap>()),
      has_timestamps_(has_timestamps) {
  for (const auto& r : records_) {
    if (r.user >= users_->size() || r.item >= items_->size())
      throw DatasetError("interaction refers to an unknown user or item index");
    if (!std::isfinite(r.value)) throw DatasetError("interaction value is not finite");
    if (has_timestamps_ && r.timestamp < 0) throw DatasetError("negative timestamp");
  }
}

InteractionLog InteractionLog::subset(std::span<const std::size_t> indices) const {
  std::vector<Interaction> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(records_.at(i));
  return with_records(std::move(picked));
}

InteractionLog InteractionLog::with_records(std::vector<Interaction> records) const {
  return InteractionLog(std::move(records), users_, items_, has_timestamps_);
}

InteractionLog InteractionLog::reindexed() const {
  auto users = std::make_shared<IndexMap>();
  auto items = std::make_shared<IndexMap>();
  std::vector<Interaction> out;
  out.reserve(records_.size());
  for (auto r : records_) {
    r.user = users->get_or_insert(users_->raw(r.user));
    r.item = items->get_or_insert(items_->raw(r.item));
    out.push_back(r);
  }
  return InteractionLog(std::move(out), std::move(users), std::move(items), has_timestamps_);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::size_t resolve_column(const ColumnRef& ref, const std::vector<std::string_view>& header,
                           const char* role) {
  if (const auto* index = std::get_if<std::size_t>(&ref)) return *index;
  const auto& name = std::get<std::string>(ref);
  if (header.empty())
    throw DatasetError(std::string("column '") + name + "' for " + role +
                       " is named but the file has no header");
  for (std::size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) == name) return i;
  throw DatasetError(std::string("header has no column '") + name + "' for " + role);
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw DatasetError("malformed row at line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

InteractionLog ingest(const std::filesystem::path& path, const ColumnSchema& schema, char delimiter) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header_storage;
  std::vector<std::string_view> header;
  if (schema.header) {
    if (!std::getline(in, line)) throw DatasetError("empty dataset");
    ++line_no;
    for (auto f : split_fields(line, delimiter)) header_storage.emplace_back(trim(f));
    for (const auto& h : header_storage) header.push_back(h);
  }

  const std::size_t user_col = resolve_column(schema.user, header, "user");
  const std::size_t item_col = resolve_column(schema.item, header, "item");
  const std::optional<std::size_t> value_col =
      schema.value ? std::optional(resolve_column(*schema.value, header, "value")) : std::nullopt;
  const std::optional<std::size_t> ts_col =
      schema.timestamp ? std::optional(resolve_column(*schema.timestamp, header, "timestamp"))
                       : std::nullopt;
  std::size_t needed = std::max(user_col, item_col);
  if (value_col) needed = std::max(needed, *value_col);
  if (ts_col) needed = std::max(needed, *ts_col);

  auto users = std::make_shared<IndexMap>();
  auto items = std::make_shared<IndexMap>();
  std::vector<Interaction> records;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, delimiter);
    if (fields.size() <= needed)
      malformed(line_no, "expected at least " + std::to_string(needed + 1) + " columns, got " +
                             std::to_string(fields.size()));
    const auto user = trim(fields[user_col]);
    const auto item = trim(fields[item_col]);
    if (user.empty() || item.empty()) malformed(line_no, "empty user or item identifier");

    Interaction rec;
    if (value_col) {
      const auto text = trim(fields[*value_col]);
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), rec.value);
      if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(rec.value))
        malformed(line_no, "value '" + std::string(text) + "' is not a finite number");
    }
    if (ts_col) {
      const auto text = trim(fields[*ts_col]);
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), rec.timestamp);
      if (ec != std::errc() || ptr != text.data() + text.size())
        malformed(line_no, "timestamp '" + std::string(text) + "' is not an integer");
      if (rec.timestamp < 0) malformed(line_no, "negative timestamp");
    }
    rec.user = users->get_or_insert(user);
    rec.item = items->get_or_insert(item);
    records.push_back(rec);
  }
  return InteractionLog(std::move(records), std::move(users), std::move(items), ts_col.has_value());
}

void write_log(const std::filesystem::path& path, const InteractionLog& log, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  std::array<char, 64> buf{};
  for (const auto& r : log.records()) {
    out << log.users().raw(r.user) << delimiter << log.items().raw(r.item) << delimiter;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), r.value);
    out.write(buf.data(), ptr - buf.data());
    if (log.has_timestamps()) out << delimiter << r.timestamp;
    out << '\n';
  }
  if (!out) throw DatasetError("write failed for " + path.string());
}

namespace {

nlohmann::json column_to_json(const ColumnRef& ref) {
  if (const auto* index = std::get_if<std::size_t>(&ref)) return *index;
  return std::get<std::string>(ref);
}

ColumnRef column_from_json(const nlohmann::json& j) {
  if (j.is_number_unsigned() || j.is_number_integer()) return j.get<std::size_t>();
  if (j.is_string()) return j.get<std::string>();
  throw DatasetError("column reference must be an index or a header name");
}

}  // namespace

DatasetManifest make_manifest(const std::filesystem::path& data_path, ColumnSchema schema,
                              char delimiter) {
  DatasetManifest m;
  m.path = data_path;
  m.schema = std::move(schema);
  m.delimiter = delimiter;
  m.sha256 = sha256_file(data_path);
  return m;
}

void save_manifest(const std::filesystem::path& manifest_path, const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["path"] = m.path.generic_string();
  j["delimiter"] = std::string(1, m.delimiter);
  j["header"] = m.schema.header;
  nlohmann::ordered_json columns;
  columns["user"] = column_to_json(m.schema.user);
  columns["item"] = column_to_json(m.schema.item);
  if (m.schema.value) columns["value"] = column_to_json(*m.schema.value);
  if (m.schema.timestamp) columns["timestamp"] = column_to_json(*m.schema.timestamp);
  j["columns"] = columns;
  j["sha256"] = m.sha256;
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + manifest_path.string());
  out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DatasetError("cannot open manifest " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
    DatasetManifest m;
    std::filesystem::path p = j.at("path").get<std::string>();
    m.path = p.is_absolute() ? p : manifest_path.parent_path() / p;
    const auto delim = j.value("delimiter", std::string(","));
    if (delim.size() != 1) throw DatasetError("delimiter must be a single character");
    m.delimiter = delim == "\\t" ? '\t' : delim[0];
    m.schema.header = j.value("header", false);
    const auto& cols = j.at("columns");
    m.schema.user = column_from_json(cols.at("user"));
    m.schema.item = column_from_json(cols.at("item"));
    if (cols.contains("value")) m.schema.value = column_from_json(cols["value"]);
    if (cols.contains("timestamp")) m.schema.timestamp = column_from_json(cols["timestamp"]);
    m.sha256 = j.value("sha256", std::string());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError("invalid manifest " + manifest_path.string() + ": " + e.what());
  }
}

InteractionLog ingest(const DatasetManifest& manifest) {
  if (!manifest.sha256.empty()) {
    const auto actual = sha256_file(manifest.path);
    if (actual != manifest.sha256)
      throw DatasetError("content hash mismatch for " + manifest.path.string());
  }
  return ingest(manifest.path, manifest.schema, manifest.delimiter);
}

bool CsrMatrix::contains(std::size_t r, std::uint32_t c) const {
  const auto cols_in_row = row(r);
  return std::binary_search(cols_in_row.begin(), cols_in_row.end(), c);
}

CsrMatrix CsrMatrix::transpose() const {
  CsrMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (auto c : col_idx) ++t.row_ptr[c + 1];
  for (std::size_t c = 0; c < cols; ++c) t.row_ptr[c + 1] += t.row_ptr[c];
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
  // Rows are visited in increasing order, so each transposed row stays sorted.
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const auto dst = cursor[col_idx[k]]++;
      t.col_idx[dst] = static_cast<std::uint32_t>(r);
      t.values[dst] = values[k];
    }
  }
  return t;
}

CsrMatrix to_matrix(const InteractionLog& log) {
  if (log.empty()) throw DatasetError("empty dataset");
  CsrMatrix m;
  m.rows = log.num_users();
  m.cols = log.num_items();
  std::vector<std::vector<std::uint32_t>> rows(m.rows);
  for (const auto& r : log.records())
    if (r.value > 0) rows[r.user].push_back(r.item);
  m.row_ptr.assign(m.rows + 1, 0);
  for (std::size_t u = 0; u < m.rows; ++u) {
    auto& items = rows[u];
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    m.col_idx.insert(m.col_idx.end(), items.begin(), items.end());
    m.row_ptr[u + 1] = m.col_idx.size();
  }
  m.values.assign(m.col_idx.size(), 1.0);
  return m;
}

}  // namespace daisy
