#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "daisy/error.hpp"
#include "daisy/split.hpp"
#include "fixtures.hpp"

using namespace daisy;
using daisy::testing::indexed_log;

namespace {

std::vector<Interaction> sequential(std::size_t n_users, std::size_t per_user) {
  std::vector<Interaction> records;
  std::int64_t ts = 0;
  for (std::size_t u = 0; u < n_users; ++u)
    for (std::size_t k = 0; k < per_user; ++k)
      records.push_back({static_cast<UserIndex>(u), static_cast<ItemIndex>(k), 1.0, ++ts});
  return records;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("split") {
  TEST_CASE("time-aware global ratio split cuts on timestamp order") {
    std::vector<Interaction> records;
    for (int t = 10; t >= 1; --t) records.push_back({static_cast<UserIndex>(t % 3), static_cast<ItemIndex>(t), 1.0, t});
    const auto log = indexed_log(3, 11, records);
    const auto [train, test] = split_by_ratio(log, 0.8, true, SplitLevel::global, 0);
    REQUIRE(train.size() == 8);
    REQUIRE(test.size() == 2);
    std::set<std::int64_t> test_ts;
    for (const auto& r : test.records()) test_ts.insert(r.timestamp);
    CHECK(test_ts == std::set<std::int64_t>{9, 10});
  }

  TEST_CASE("train size uses the ceiling") {
    CHECK(train_share(141, 0.8) == 113);
    CHECK(train_share(10, 0.8) == 8);
    CHECK(train_share(1, 0.8) == 1);
    const auto log = indexed_log(1, 141, sequential(1, 141));
    CHECK(split_by_ratio(log, 0.8, false, SplitLevel::global, 4).first.size() == 113);
  }

  TEST_CASE("user-level split keeps a single-record user in train") {
    auto records = sequential(2, 5);
    records.push_back({2, 0, 1.0, 99});
    const auto log = indexed_log(3, 5, records);
    const auto [train, test] = split_by_ratio(log, 0.8, true, SplitLevel::user, 0);
    CHECK(train.size() == 4 + 4 + 1);
    for (const auto& r : test.records()) CHECK(r.user != 2);
  }

  TEST_CASE("ties at the cut follow input order") {
    const auto log = indexed_log(1, 4, {{0, 0, 1, 5}, {0, 1, 1, 5}, {0, 2, 1, 5}, {0, 3, 1, 5}});
    const auto [train, test] = split_by_ratio(log, 0.5, true, SplitLevel::global, 0);
    CHECK(test[0].item == 2);
    CHECK(test[1].item == 3);
  }

  TEST_CASE("time-aware leave-one-out takes the latest record") {
    const auto log = indexed_log(1, 3, {{0, 0, 1, 5}, {0, 1, 1, 9}, {0, 2, 1, 2}});
    const auto [train, test] = split_leave_one_out(log, true, 0);
    REQUIRE(test.size() == 1);
    CHECK(test[0].timestamp == 9);
  }

  TEST_CASE("leave-one-out counts and the single-record rule") {
    const auto log = indexed_log(4, 4, [] {
      auto r = sequential(3, 4);
      r.push_back({3, 0, 1.0, 1});
      return r;
    }());
    for (bool time_aware : {true, false}) {
      const auto [train, test] = split_leave_one_out(log, time_aware, 11);
      CHECK(test.size() == 3);
      CHECK(train.size() == 10);
      for (const auto& r : test.records()) CHECK(r.user != 3);
    }
  }

  TEST_CASE("leave-one-out timestamp ties go to the last occurrence") {
    const auto log = indexed_log(1, 3, {{0, 0, 1, 7}, {0, 1, 1, 7}, {0, 2, 1, 3}});
    const auto [train, test] = split_leave_one_out(log, true, 0);
    CHECK(test[0].item == 1);
  }

  TEST_CASE("time-aware split needs timestamps") {
    const auto log = indexed_log(1, 3, sequential(1, 3), false);
    CHECK_THROWS_AS(split_by_ratio(log, 0.8, true, SplitLevel::global, 0), SplitError);
    CHECK_THROWS_AS(split_leave_one_out(log, true, 0), SplitError);
    CHECK_THROWS_AS(split_by_ratio(log, 1.0, false, SplitLevel::global, 0), SplitError);
  }

  TEST_CASE("validation hold-out") {
    const auto log = indexed_log(10, 10, sequential(10, 10));
    SplitConfig config;
    const auto [inner, validation] = hold_out_validation(log, config);
    REQUIRE(validation.size() == 10);
    for (const auto& r : validation.records()) CHECK(r.timestamp > 90);

    config.validation_fraction = 0.0;
    const auto [all, none] = hold_out_validation(log, config);
    CHECK(all.size() == 100);
    CHECK(none.empty());

    const auto single = indexed_log(2, 3, {{0, 0, 1, 1}, {1, 0, 1, 2}, {1, 1, 1, 3}});
    config.method = SplitMethod::loo;
    const auto [loo_inner, loo_val] = hold_out_validation(single, config);
    REQUIRE(loo_val.size() == 1);
    CHECK(loo_val[0].user == 1);
  }

  TEST_CASE("candidate sizes when the pool is large or exhausted") {
    for (const std::size_t n_items : {std::size_t{1500}, std::size_t{600}}) {
      const auto records = sequential(1, 25);
      const auto log = indexed_log(1, n_items, records);
      std::vector<std::size_t> test_idx = {20, 21, 22, 23, 24};
      const auto test = log.subset(test_idx);
      const auto cands = build_candidates(test, to_matrix(log), 1000, 3);
      REQUIRE(cands.count(0) == 1);
      const auto& list = cands.at(0);
      CHECK(list.size() == (n_items == 1500 ? 1000u : 580u));
      CHECK(std::vector<ItemIndex>(list.begin(), list.begin() + 5) == std::vector<ItemIndex>{20, 21, 22, 23, 24});
      std::set<ItemIndex> unique(list.begin(), list.end());
      CHECK(unique.size() == list.size());
      for (std::size_t k = 5; k < list.size(); ++k) CHECK(list[k] >= 25);
    }
  }

  TEST_CASE("candidate size equal to the catalogue ranks everything unobserved") {
    const auto log = daisy::testing::random_log(8, 20, 30, 3, 10);
    SplitConfig config;
    config.method = SplitMethod::loo;
    config.candidate_size = 30;
    const auto bundle = make_split(log, config);
    const auto full = to_matrix(bundle.full_train());
    for (const auto& [u, list] : bundle.candidates) {
      std::set<ItemIndex> expected;
      for (ItemIndex i = 0; i < 30; ++i)
        if (!full.contains(u, i)) expected.insert(i);
      for (const auto& r : bundle.test.records())
        if (r.user == u) expected.insert(r.item);
      CHECK(std::set<ItemIndex>(list.begin(), list.end()) == expected);
    }
  }

  TEST_CASE("bundle invariants on random fixtures") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto log = daisy::testing::random_log(seed, 25, 60, 1, 15, seed % 3 == 0);
      SplitConfig config = parse_split_method(std::vector<const char*>{"tsbr", "rsbr", "tloo", "rloo"}[seed % 4]);
      config.seed = seed;
      config.candidate_size = 40;
      const auto bundle = make_split(log, config);
      CHECK(bundle.train.size() + bundle.validation.size() + bundle.test.size() == log.size());
      const auto all = to_matrix(log);
      std::map<UserIndex, std::set<ItemIndex>> truth;
      for (const auto& r : bundle.test.records()) truth[r.user].insert(r.item);
      CHECK(truth.size() == bundle.candidates.size());
      for (const auto& [u, list] : bundle.candidates) {
        const auto& t = truth[u];
        for (ItemIndex i : t) CHECK(std::find(list.begin(), list.end(), i) != list.end());
        for (std::size_t k = t.size(); k < list.size(); ++k) CHECK_FALSE(all.contains(u, list[k]));
      }
      // Validation negatives avoid everything the trials can see.
      const auto seen = to_matrix(bundle.full_train());
      for (const auto& [u, list] : bundle.validation_candidates) {
        std::size_t targets = 0;
        for (const auto& r : bundle.validation.records()) targets += r.user == u;
        for (std::size_t k = targets; k < list.size(); ++k) CHECK_FALSE(seen.contains(u, list[k]));
      }
    }
  }

  TEST_CASE("saving a split twice is byte identical and loads back") {
    const auto log = daisy::testing::random_log(21, 30, 50, 2, 12);
    SplitConfig config;
    config.seed = 9;
    config.candidate_size = 20;
    const auto a = daisy::testing::scratch_dir("split_a");
    const auto b = daisy::testing::scratch_dir("split_b");
    save_split(a, make_split(log, config));
    save_split(b, make_split(log, config));
    for (const char* name : {"train.csv", "validation.csv", "test.csv", "candidates.txt", "validation_candidates.txt",
                             "split.json", "users.txt", "items.txt"})
      CHECK(slurp(a / name) == slurp(b / name));
    const auto loaded = load_split(a);
    const auto original = make_split(log, config);
    CHECK(loaded.candidates == original.candidates);
    CHECK(loaded.validation_candidates == original.validation_candidates);
    REQUIRE(loaded.test.size() == original.test.size());
    for (std::size_t k = 0; k < loaded.test.size(); ++k) CHECK(loaded.test[k] == original.test[k]);
  }

  TEST_CASE("method names round trip") {
    for (const char* name : {"rsbr", "tsbr", "rloo", "tloo"}) CHECK(split_method_name(parse_split_method(name)) == name);
    CHECK_THROWS_AS(parse_split_method("holdout"), SplitError);
  }
}
