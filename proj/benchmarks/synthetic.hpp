#pragma once

#include <memory>
#include <string>
#include <vector>

#include "daisy/dataset.hpp"
#include "daisy/random.hpp"

namespace daisy::bench {

/// `per_user` distinct items per user with a mild popularity skew.
inline InteractionLog synthetic_log(std::size_t users, std::size_t items, std::size_t per_user, std::uint64_t seed = 1) {
  Rng rng(seed);
  auto user_map = std::make_shared<IndexMap>();
  auto item_map = std::make_shared<IndexMap>();
  for (std::size_t u = 0; u < users; ++u) user_map->get_or_insert("u" + std::to_string(u));
  for (std::size_t i = 0; i < items; ++i) item_map->get_or_insert("i" + std::to_string(i));
  std::vector<Interaction> records;
  std::int64_t ts = 0;
  for (std::size_t u = 0; u < users; ++u) {
    std::vector<bool> taken(items, false);
    for (std::size_t k = 0; k < per_user && k < items;) {
      const double x = uniform_unit(rng);
      const auto i = static_cast<std::size_t>(x * x * static_cast<double>(items));
      if (taken[i]) continue;
      taken[i] = true;
      records.push_back({static_cast<UserIndex>(u), static_cast<ItemIndex>(i), 1.0, ts++});
      ++k;
    }
  }
  return InteractionLog(std::move(records), user_map, item_map, true);
}

}  // namespace daisy::bench
