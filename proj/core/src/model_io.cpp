#include "daisy/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "daisy/error.hpp"
#include "daisy/factorization.hpp"

namespace daisy {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

constexpr char kMagic[8] = {'D', 'A', 'I', 'S', 'Y', 'M', 'D', 'L'};

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ModelError("truncated model file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void ModelArchive::put_reals(const std::string& name, std::vector<double> values) {
  reals_[name] = std::move(values);
}

void ModelArchive::put_indices(const std::string& name, std::vector<std::uint64_t> values) {
  indices_[name] = std::move(values);
}

const std::vector<double>& ModelArchive::reals(const std::string& name) const {
  auto it = reals_.find(name);
  if (it == reals_.end()) throw ModelError("model file lacks section '" + name + "'");
  return it->second;
}

const std::vector<std::uint64_t>& ModelArchive::indices(const std::string& name) const {
  auto it = indices_.find(name);
  if (it == indices_.end()) throw ModelError("model file lacks section '" + name + "'");
  return it->second;
}

void ModelArchive::put_dense(const std::string& name, const DenseMatrix& m) {
  put_indices(name + ".shape", {m.rows, m.cols});
  put_reals(name, m.data);
}

DenseMatrix ModelArchive::dense(const std::string& name) const {
  const auto& shape = indices(name + ".shape");
  if (shape.size() != 2) throw ModelError("bad shape for '" + name + "'");
  DenseMatrix m(shape[0], shape[1]);
  const auto& data = reals(name);
  if (data.size() != m.data.size()) throw ModelError("size mismatch for '" + name + "'");
  m.data = data;
  return m;
}

void ModelArchive::put_csr(const std::string& name, const CsrMatrix& m) {
  put_indices(name + ".shape", {m.rows, m.cols});
  put_indices(name + ".row_ptr", std::vector<std::uint64_t>(m.row_ptr.begin(), m.row_ptr.end()));
  put_indices(name + ".col_idx", std::vector<std::uint64_t>(m.col_idx.begin(), m.col_idx.end()));
  put_reals(name + ".values", m.values);
}

CsrMatrix ModelArchive::csr(const std::string& name) const {
  const auto& shape = indices(name + ".shape");
  if (shape.size() != 2) throw ModelError("bad shape for '" + name + "'");
  CsrMatrix m;
  m.rows = shape[0];
  m.cols = shape[1];
  const auto& ptr = indices(name + ".row_ptr");
  const auto& idx = indices(name + ".col_idx");
  m.row_ptr.assign(ptr.begin(), ptr.end());
  m.col_idx.assign(idx.begin(), idx.end());
  m.values = reals(name + ".values");
  if (m.row_ptr.size() != m.rows + 1 || m.values.size() != m.col_idx.size() || m.row_ptr.back() != m.nnz())
    throw ModelError("inconsistent sparse section '" + name + "'");
  return m;
}

void ModelArchive::write(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(kind_));
  write_le<std::uint64_t>(out, rows_);
  write_le<std::uint64_t>(out, cols_);
  write_le<std::uint64_t>(out, reals_.size() + indices_.size());
  auto header = [&](const std::string& name, std::uint8_t type, std::uint64_t count) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint8_t>(out, type);
    write_le<std::uint64_t>(out, count);
  };
  for (const auto& [name, values] : reals_) {
    header(name, 0, values.size());
    for (double v : values) write_le(out, v);
  }
  for (const auto& [name, values] : indices_) {
    header(name, 1, values.size());
    for (auto v : values) write_le(out, v);
  }
}

ModelArchive ModelArchive::read(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ModelError("not a model file (bad magic)");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kVersion) throw ModelError("unsupported model format version " + std::to_string(version));
  ModelArchive ar;
  ar.kind_ = static_cast<ModelKind>(read_le<std::uint32_t>(in));
  ar.rows_ = read_le<std::uint64_t>(in);
  ar.cols_ = read_le<std::uint64_t>(in);
  const auto sections = read_le<std::uint64_t>(in);
  for (std::uint64_t s = 0; s < sections; ++s) {
    const auto name_len = read_le<std::uint32_t>(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw ModelError("truncated model file");
    const auto type = read_le<std::uint8_t>(in);
    const auto count = read_le<std::uint64_t>(in);
    if (type == 0) {
      std::vector<double> values(count);
      for (auto& v : values) v = read_le<double>(in);
      ar.reals_[name] = std::move(values);
    } else if (type == 1) {
      std::vector<std::uint64_t> values(count);
      for (auto& v : values) v = read_le<std::uint64_t>(in);
      ar.indices_[name] = std::move(values);
    } else {
      throw ModelError("unknown section type in model file");
    }
  }
  return ar;
}

void save_model(const std::filesystem::path& path, const Recommender& model) {
  ModelArchive ar(model.kind(), model.num_users(), model.num_items());
  model.save(ar);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write " + path.string());
  ar.write(out);
  if (!out) throw ModelError("write failed for " + path.string());
}

std::unique_ptr<Recommender> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open " + path.string());
  const auto ar = ModelArchive::read(in);
  switch (ar.kind()) {
    case ModelKind::mostpop:
      return std::make_unique<MostPop>(ar.reals("counts"), static_cast<std::size_t>(ar.rows()));
    case ModelKind::itemknn: {
      ItemSimilarityStore store;
      const auto& offsets = ar.indices("sim.offsets");
      const auto& nbrs = ar.indices("sim.neighbor");
      store.offsets.assign(offsets.begin(), offsets.end());
      store.neighbors.assign(nbrs.begin(), nbrs.end());
      store.similarities = ar.reals("sim.value");
      const auto& flags = ar.indices("normalize");
      return std::make_unique<ItemKnn>(ar.csr("history"), std::move(store), !flags.empty() && flags[0] != 0);
    }
    case ModelKind::puresvd:
      return std::make_unique<PureSvd>(ar.dense("user_factors"), ar.dense("item_factors"));
    case ModelKind::slim:
      return std::make_unique<Slim>(ar.csr("history"), ar.csr("weights"));
    case ModelKind::mf:
    case ModelKind::fm:
      return load_factor_model(ar);
  }
  throw ModelError("unknown model kind in model file");
}

}  // namespace daisy
