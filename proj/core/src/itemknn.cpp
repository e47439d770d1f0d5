#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "daisy/error.hpp"
#include "daisy/model_io.hpp"
#include "daisy/parallel.hpp"
#include "daisy/recommender.hpp"

namespace daisy {

double ItemSimilarityStore::similarity(ItemIndex i, ItemIndex j) const {
  const auto nbrs = neighbors_of(i);
  const auto sims = similarities_of(i);
  for (std::size_t k = 0; k < nbrs.size(); ++k)
    if (nbrs[k] == j) return sims[k];
  return 0.0;
}

ItemSimilarityStore cosine_item_similarity(const CsrMatrix& user_items, std::size_t k, std::size_t threads) {
  if (k == 0) throw ModelError("ItemKNN needs at least one neighbour");
  const CsrMatrix item_users = user_items.transpose();
  const std::size_t n = item_users.rows;
  std::vector<std::vector<std::pair<ItemIndex, double>>> lists(n);

  parallel_for(
      n,
      [&](std::size_t i) {
        thread_local std::vector<double> co;
        thread_local std::vector<ItemIndex> touched;
        co.assign(n, 0.0);
        touched.clear();
        for (auto u : item_users.row(i)) {
          for (auto j : user_items.row(u)) {
            if (j == i) continue;
            if (co[j] == 0.0) touched.push_back(j);
            co[j] += 1.0;
          }
        }
        const double norm_i = std::sqrt(static_cast<double>(item_users.row(i).size()));
        auto& list = lists[i];
        list.reserve(touched.size());
        for (auto j : touched) {
          const double norm_j = std::sqrt(static_cast<double>(item_users.row(j).size()));
          list.emplace_back(j, co[j] / (norm_i * norm_j));
        }
        auto better = [](const auto& a, const auto& b) {
          return a.second != b.second ? a.second > b.second : a.first < b.first;
        };
        const std::size_t keep = std::min(k, list.size());
        std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(keep), list.end(), better);
        list.resize(keep);
      },
      threads);

  ItemSimilarityStore store;
  store.offsets.reserve(n + 1);
  for (const auto& list : lists) {
    for (const auto& [j, s] : list) {
      store.neighbors.push_back(j);
      store.similarities.push_back(s);
    }
    store.offsets.push_back(store.neighbors.size());
  }
  return store;
}

void write_similarity_triples(const std::filesystem::path& path, const ItemSimilarityStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write " + path.string());
  std::array<char, 64> buf{};
  for (std::size_t i = 0; i < store.num_items(); ++i) {
    const auto nbrs = store.neighbors_of(static_cast<ItemIndex>(i));
    const auto sims = store.similarities_of(static_cast<ItemIndex>(i));
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), sims[k]);
      out << i << ',' << nbrs[k] << ',';
      out.write(buf.data(), ptr - buf.data());
      out << '\n';
    }
  }
}

ItemKnn::ItemKnn(CsrMatrix history, ItemSimilarityStore store, bool normalize)
    : history_(std::move(history)), store_(std::move(store)), normalize_(normalize) {
  if (store_.num_items() != history_.cols) throw ModelError("similarity store does not match the item count");
}

double ItemKnn::score(UserIndex user, ItemIndex item) const {
  if (user >= history_.rows || item >= history_.cols) return 0.0;
  const auto seen = history_.row(user);
  const auto nbrs = store_.neighbors_of(item);
  const auto sims = store_.similarities_of(item);
  double total = 0.0, mass = 0.0;
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    mass += sims[k];
    if (std::binary_search(seen.begin(), seen.end(), nbrs[k])) total += sims[k];
  }
  if (normalize_) return mass > 0.0 ? total / mass : 0.0;
  return total;
}

void ItemKnn::save(ModelArchive& archive) const {
  archive.put_csr("history", history_);
  archive.put_indices("sim.offsets", std::vector<std::uint64_t>(store_.offsets.begin(), store_.offsets.end()));
  archive.put_indices("sim.neighbor", std::vector<std::uint64_t>(store_.neighbors.begin(), store_.neighbors.end()));
  archive.put_reals("sim.value", store_.similarities);
  archive.put_indices("normalize", {normalize_ ? 1u : 0u});
}

std::unique_ptr<ItemKnn> fit_itemknn(const InteractionLog& train, const ItemKnnConfig& config) {
  auto history = to_matrix(train);
  auto store = cosine_item_similarity(history, config.neighbors, config.threads);
  return std::make_unique<ItemKnn>(std::move(history), std::move(store), config.normalize);
}

}  // namespace daisy
