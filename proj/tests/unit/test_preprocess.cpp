#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "daisy/error.hpp"
#include "daisy/preprocess.hpp"
#include "fixtures.hpp"

using namespace daisy;
using daisy::testing::Raw;
using daisy::testing::make_log;

namespace {

using Pair = std::pair<std::string, std::string>;

std::multiset<Pair> pairs(const InteractionLog& log) {
  std::multiset<Pair> out;
  for (const auto& r : log.records()) out.emplace(log.users().raw(r.user), log.items().raw(r.item));
  return out;
}

bool includes(const std::multiset<Pair>& big, const std::multiset<Pair>& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

InteractionLog toy() {
  std::vector<Raw> rows;
  for (int i = 1; i <= 5; ++i) rows.push_back({"u1", "i" + std::to_string(i)});
  rows.push_back({"u2", "i1"});
  return make_log(rows, false);
}

void check_core(const InteractionLog& log, int level) {
  std::map<UserIndex, int> users;
  std::map<ItemIndex, int> items;
  for (const auto& r : log.records()) {
    ++users[r.user];
    ++items[r.item];
  }
  for (const auto& [u, c] : users) CHECK(c >= level);
  for (const auto& [i, c] : items) CHECK(c >= level);
}

}  // namespace

TEST_SUITE("preprocess") {
  TEST_CASE("binarize keeps ratings at or above the threshold") {
    const auto log = make_log({{"a", "x", 4}, {"a", "y", 5}, {"b", "x", 3}});
    const auto out = binarize(log, 4.0);
    CHECK(out.size() == 2);
    for (const auto& r : out.records()) CHECK(r.value == 1.0);
    CHECK(out.num_users() == 1);
  }

  TEST_CASE("binarize with r = 1 on count data is the identity on records") {
    const auto log = make_log({{"a", "x", 3}, {"a", "y", 1}, {"b", "x", 12}});
    CHECK(binarize(log, 1.0).size() == 3);
  }

  TEST_CASE("binarize reports an empty result") {
    const auto log = make_log({{"a", "x", 1}, {"a", "y", 2}, {"b", "x", 3}});
    CHECK_THROWS_WITH_AS(binarize(log, 4.0), "binarization removed all interactions", PreprocessError);
  }

  TEST_CASE("binarize can keep sub-threshold records as explicit zeros") {
    const auto log = make_log({{"a", "x", 5}, {"a", "y", 2}});
    const auto out = binarize(log, 4.0, true);
    REQUIRE(out.size() == 2);
    CHECK(out[1].value == 0.0);
  }

  TEST_CASE("binarize is idempotent") {
    const auto log = daisy::testing::random_log(5, 40, 30, 1, 10);
    const auto once = binarize(log, 3.0);
    const auto twice = binarize(once, 1.0);
    CHECK(pairs(once) == pairs(twice));
  }

  TEST_CASE("f_filter on the toy instance leaves a user below F") {
    const auto out = f_filter(toy(), 2);
    REQUIRE(out.size() == 1);
    CHECK(out.users().raw(out[0].user) == "u1");
    CHECK(out.items().raw(out[0].item) == "i1");
    CHECK(out.num_users() == 1);
    CHECK(out.num_items() == 1);
  }

  TEST_CASE("f_core on the toy instance empties the dataset") {
    CHECK_THROWS_WITH_AS(f_core(toy(), 2), "F-core eliminated the dataset", PreprocessError);
  }

  TEST_CASE("level one is the identity") {
    const auto log = toy();
    CHECK(pairs(f_filter(log, 1)) == pairs(log));
    CHECK(pairs(f_core(log, 1)) == pairs(log));
  }

  TEST_CASE("complete 3x3 bipartite graph is already a 3-core") {
    std::vector<Raw> rows;
    for (int u = 0; u < 3; ++u)
      for (int i = 0; i < 3; ++i) rows.push_back({"u" + std::to_string(u), "i" + std::to_string(i)});
    const auto log = make_log(rows, false);
    CHECK(pairs(f_core(log, 3)) == pairs(log));
    CHECK(pairs(f_filter(log, 3)) == pairs(log));
  }

  TEST_CASE("counts are record counts, duplicates included") {
    const auto log = make_log({{"a", "x"}, {"a", "x"}, {"b", "y"}}, false);
    const auto out = f_filter(log, 2);
    CHECK(out.size() == 2);
  }

  TEST_CASE("f_core properties on random logs") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto log = daisy::testing::random_log(seed, 60, 40, 1, 12);
      const int level = 2 + static_cast<int>(seed % 4);
      const auto once = f_filter(log, level);
      try {
        const auto core = f_core(log, level);
        check_core(core, level);
        CHECK(includes(pairs(once), pairs(core)));
        CHECK(pairs(f_core(core, level)) == pairs(core));
      } catch (const PreprocessError&) {
        // Some random logs have an empty core; the filter pass must still be a subset.
      }
      CHECK(includes(pairs(log), pairs(once)));
    }
  }

  TEST_CASE("parse_filter shorthand") {
    CHECK(parse_filter("origin").filter_mode == FilterMode::origin);
    const auto f10 = parse_filter("f10");
    CHECK(f10.filter_mode == FilterMode::f_filter);
    CHECK(f10.filter_level == 10);
    const auto core5 = parse_filter("core5");
    CHECK(core5.filter_mode == FilterMode::f_core);
    CHECK(core5.filter_level == 5);
    CHECK(filter_name(core5) == "core5");
    CHECK_THROWS_AS(parse_filter("x3"), PreprocessError);
  }

  TEST_CASE("preprocess chains binarization, deduplication and filtering") {
    const auto log = make_log({{"a", "x", 5}, {"a", "x", 5}, {"a", "y", 4}, {"b", "x", 5}, {"b", "y", 5}, {"b", "z", 1}});
    PreprocessConfig config;
    config.threshold = 4;
    config.deduplicate = true;
    config.filter_mode = FilterMode::f_core;
    config.filter_level = 2;
    const auto out = preprocess(log, config);
    CHECK(out.size() == 4);
    CHECK(out.num_items() == 2);
  }
}
