#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "daisy/dataset.hpp"
#include "daisy/random.hpp"

namespace daisy::testing {

struct Raw {
  std::string user;
  std::string item;
  double value = 1.0;
  std::int64_t ts = 0;
};

inline InteractionLog make_log(const std::vector<Raw>& rows, bool has_ts = true) {
  auto users = std::make_shared<IndexMap>();
  auto items = std::make_shared<IndexMap>();
  std::vector<Interaction> records;
  for (const auto& r : rows)
    records.push_back({users->get_or_insert(r.user), items->get_or_insert(r.item), r.value, r.ts});
  return InteractionLog(std::move(records), users, items, has_ts);
}

/// Log over users "u0".."u{n-1}" and items "i0".."i{m-1}" (all registered,
/// even without records) from dense-index records.
inline InteractionLog indexed_log(std::size_t n_users, std::size_t n_items, std::vector<Interaction> records,
                                  bool has_ts = true) {
  auto users = std::make_shared<IndexMap>();
  auto items = std::make_shared<IndexMap>();
  for (std::size_t u = 0; u < n_users; ++u) users->get_or_insert("u" + std::to_string(u));
  for (std::size_t i = 0; i < n_items; ++i) items->get_or_insert("i" + std::to_string(i));
  return InteractionLog(std::move(records), users, items, has_ts);
}

/// Each user gets between min_per_user and max_per_user distinct items;
/// timestamps are a random permutation of 0..N-1 (so all distinct) unless
/// `tied` is set, in which case they are drawn from a small range.
inline InteractionLog random_log(std::uint64_t seed, std::size_t n_users, std::size_t n_items,
                                 std::size_t min_per_user, std::size_t max_per_user, bool tied = false) {
  Rng rng(seed);
  std::vector<Interaction> records;
  std::vector<ItemIndex> items(n_items);
  for (std::size_t i = 0; i < n_items; ++i) items[i] = static_cast<ItemIndex>(i);
  for (std::size_t u = 0; u < n_users; ++u) {
    const auto k = min_per_user + uniform_index(rng, max_per_user - min_per_user + 1);
    shuffle(std::span<ItemIndex>(items), rng);
    for (std::size_t j = 0; j < std::min<std::size_t>(k, n_items); ++j)
      records.push_back({static_cast<UserIndex>(u), items[j], 1.0 + static_cast<double>(uniform_index(rng, 5)), 0});
  }
  std::vector<std::int64_t> ts(records.size());
  for (std::size_t k = 0; k < ts.size(); ++k)
    ts[k] = tied ? static_cast<std::int64_t>(uniform_index(rng, 8)) : static_cast<std::int64_t>(k);
  if (!tied) shuffle(std::span<std::int64_t>(ts), rng);
  for (std::size_t k = 0; k < ts.size(); ++k) records[k].timestamp = ts[k];
  shuffle(std::span<Interaction>(records), rng);
  return indexed_log(n_users, n_items, std::move(records));
}

/// Two user communities, each drawing `in_share` of its items from its own
/// half of the catalogue. Every user has `per_user` distinct items and every
/// record a distinct timestamp in random order.
inline InteractionLog two_communities(std::uint64_t seed, std::size_t n_users = 200, std::size_t n_items = 200,
                                      std::size_t per_user = 20, double in_share = 0.9) {
  Rng rng(seed);
  std::vector<Interaction> records;
  const std::size_t half = n_items / 2;
  for (std::size_t u = 0; u < n_users; ++u) {
    const std::size_t base = (u % 2 == 0) ? 0 : half;
    std::vector<bool> taken(n_items, false);
    std::size_t have = 0;
    while (have < per_user) {
      std::size_t item = 0;
      if (uniform_unit(rng) < in_share) {
        // Zipf-like preference inside the community.
        const double x = uniform_unit(rng);
        item = base + static_cast<std::size_t>(static_cast<double>(half) * x * x);
      } else {
        item = uniform_index(rng, n_items);
      }
      if (taken[item]) continue;
      taken[item] = true;
      ++have;
      records.push_back({static_cast<UserIndex>(u), static_cast<ItemIndex>(item), 1.0, 0});
    }
  }
  std::vector<std::int64_t> ts(records.size());
  for (std::size_t k = 0; k < ts.size(); ++k) ts[k] = static_cast<std::int64_t>(k);
  shuffle(std::span<std::int64_t>(ts), rng);
  for (std::size_t k = 0; k < ts.size(); ++k) records[k].timestamp = ts[k];
  return indexed_log(n_users, n_items, std::move(records));
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(DAISY_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Writes `log` as user,item,value,timestamp CSV plus a dataset manifest in
/// `dir`; returns the manifest path.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir, const InteractionLog& log) {
  std::filesystem::create_directories(dir);
  const auto data = dir / "data.csv";
  write_log(data, log);
  ColumnSchema schema;
  schema.value = std::size_t{2};
  schema.timestamp = std::size_t{3};
  const auto manifest = dir / "dataset.json";
  save_manifest(manifest, make_manifest(data, schema, ','));
  return manifest;
}

}  // namespace daisy::testing
