#include "daisy/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "daisy/error.hpp"
#include "daisy/parallel.hpp"
#include "daisy/random.hpp"

namespace daisy {
namespace {

// Stream tags keep the test split, the validation hold-out and candidate
// sampling statistically independent under one master seed.
constexpr std::uint64_t kTestStream = 0x7e57;
constexpr std::uint64_t kValidationStream = 0x7a11d;
constexpr std::uint64_t kTestCandidateStream = 0xca7d;
constexpr std::uint64_t kValidationCandidateStream = 0xca7e;

void require_timestamps(const InteractionLog& log, bool time_aware) {
  if (time_aware && !log.has_timestamps())
    throw SplitError("time-aware splitting requested but the dataset has no timestamps");
}

std::vector<std::vector<std::size_t>> records_by_user(const InteractionLog& log) {
  std::vector<std::vector<std::size_t>> groups(log.num_users());
  for (std::size_t i = 0; i < log.size(); ++i) groups[log[i].user].push_back(i);
  return groups;
}

// Orders record indices for cutting: by (timestamp, input position) when
// time-aware, otherwise by a seeded shuffle.
void order_for_cut(const InteractionLog& log, std::vector<std::size_t>& idx, bool time_aware, Rng& rng) {
  if (time_aware) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return log[a].timestamp < log[b].timestamp; });
  } else {
    shuffle(std::span<std::size_t>(idx), rng);
  }
}

std::pair<InteractionLog, InteractionLog> assemble(const InteractionLog& log, std::vector<std::size_t> first,
                                                   std::vector<std::size_t> second) {
  // Partitions keep input order so files are stable and easy to diff.
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {log.subset(first), log.subset(second)};
}

}  // namespace

InteractionLog SplitBundle::full_train() const {
  std::vector<Interaction> records(train.records().begin(), train.records().end());
  records.insert(records.end(), validation.records().begin(), validation.records().end());
  return train.with_records(std::move(records));
}

SplitConfig parse_split_method(std::string_view text, SplitConfig base) {
  if (text == "rsbr" || text == "tsbr") {
    base.method = SplitMethod::sbr;
  } else if (text == "rloo" || text == "tloo") {
    base.method = SplitMethod::loo;
  } else {
    throw SplitError("unknown split method '" + std::string(text) + "'");
  }
  base.time_aware = text.front() == 't';
  return base;
}

std::string split_method_name(const SplitConfig& config) {
  return std::string(config.time_aware ? "t" : "r") + (config.method == SplitMethod::sbr ? "sbr" : "loo");
}

std::size_t train_share(std::size_t count, double rho) {
  const double share = std::ceil(rho * static_cast<double>(count) - 1e-9);
  return std::min(count, static_cast<std::size_t>(std::max(0.0, share)));
}

std::pair<InteractionLog, InteractionLog> split_by_ratio(const InteractionLog& log, double rho,
                                                         bool time_aware, SplitLevel level,
                                                         std::uint64_t seed) {
  if (!(rho > 0.0 && rho < 1.0)) throw SplitError("rho must lie in (0, 1)");
  require_timestamps(log, time_aware);
  std::vector<std::size_t> first, second;
  if (level == SplitLevel::global) {
    std::vector<std::size_t> idx(log.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    order_for_cut(log, idx, time_aware, rng);
    const auto cut = train_share(idx.size(), rho);
    first.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
    second.assign(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  } else {
    auto groups = records_by_user(log);
    for (std::size_t u = 0; u < groups.size(); ++u) {
      auto& idx = groups[u];
      if (idx.empty()) continue;
      Rng rng(derive_seed(seed, u));
      order_for_cut(log, idx, time_aware, rng);
      const auto cut = train_share(idx.size(), rho);
      first.insert(first.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
      second.insert(second.end(), idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
    }
  }
  return assemble(log, std::move(first), std::move(second));
}

std::pair<InteractionLog, InteractionLog> split_leave_one_out(const InteractionLog& log, bool time_aware,
                                                              std::uint64_t seed) {
  require_timestamps(log, time_aware);
  const auto groups = records_by_user(log);
  std::vector<std::size_t> first, second;
  first.reserve(log.size());
  for (std::size_t u = 0; u < groups.size(); ++u) {
    const auto& idx = groups[u];
    if (idx.empty()) continue;
    if (idx.size() == 1) {
      first.push_back(idx.front());
      continue;
    }
    std::size_t held = 0;
    if (time_aware) {
      // Latest timestamp; ties go to the last occurrence.
      for (std::size_t k = 1; k < idx.size(); ++k)
        if (log[idx[k]].timestamp >= log[idx[held]].timestamp) held = k;
    } else {
      Rng rng(derive_seed(seed, u));
      held = static_cast<std::size_t>(uniform_index(rng, idx.size()));
    }
    for (std::size_t k = 0; k < idx.size(); ++k) (k == held ? second : first).push_back(idx[k]);
  }
  return assemble(log, std::move(first), std::move(second));
}

std::pair<InteractionLog, InteractionLog> hold_out_validation(const InteractionLog& train,
                                                              const SplitConfig& config) {
  if (train.empty()) throw SplitError("cannot hold out validation from an empty training set");
  const auto seed = derive_seed(config.seed, kValidationStream);
  if (config.method == SplitMethod::loo) return split_leave_one_out(train, config.time_aware, seed);
  if (config.validation_fraction < 0.0 || config.validation_fraction >= 1.0)
    throw SplitError("validation fraction must lie in [0, 1)");
  if (config.validation_fraction == 0.0) return {train, train.with_records({})};
  return split_by_ratio(train, 1.0 - config.validation_fraction, config.time_aware, config.level, seed);
}

CandidateMap build_candidates(const InteractionLog& targets, const CsrMatrix& excluded,
                              std::size_t candidate_size, std::uint64_t seed, std::size_t threads) {
  const std::size_t n_items = targets.num_items();
  std::vector<std::vector<ItemIndex>> truth(targets.num_users());
  for (const auto& r : targets.records()) truth[r.user].push_back(r.item);
  std::vector<UserIndex> users;
  for (std::size_t u = 0; u < truth.size(); ++u) {
    auto& t = truth[u];
    if (t.empty()) continue;
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    users.push_back(static_cast<UserIndex>(u));
  }

  std::vector<std::vector<ItemIndex>> lists(users.size());
  parallel_for(
      users.size(),
      [&](std::size_t k) {
        const UserIndex u = users[k];
        const auto& t = truth[u];
        std::vector<char> blocked(n_items, 0);
        for (auto i : t) blocked[i] = 1;
        if (u < excluded.rows)
          for (auto i : excluded.row(u))
            if (i < n_items) blocked[i] = 1;
        const std::size_t n_blocked = static_cast<std::size_t>(std::count(blocked.begin(), blocked.end(), 1));
        const std::size_t pool = n_items - n_blocked;
        const std::size_t wanted = candidate_size > t.size() ? candidate_size - t.size() : 0;

        auto& out = lists[k];
        out = t;
        Rng rng(derive_seed(seed, u));
        if (wanted >= pool) {
          for (std::size_t i = 0; i < n_items; ++i)
            if (!blocked[i]) out.push_back(static_cast<ItemIndex>(i));
        } else if (pool >= 2 * wanted) {
          // Sparse draw: rejection against blocked and already chosen items.
          for (std::size_t drawn = 0; drawn < wanted;) {
            const auto i = static_cast<std::size_t>(uniform_index(rng, n_items));
            if (blocked[i]) continue;
            blocked[i] = 1;
            out.push_back(static_cast<ItemIndex>(i));
            ++drawn;
          }
        } else {
          std::vector<ItemIndex> free_items;
          free_items.reserve(pool);
          for (std::size_t i = 0; i < n_items; ++i)
            if (!blocked[i]) free_items.push_back(static_cast<ItemIndex>(i));
          for (std::size_t d = 0; d < wanted; ++d) {
            const auto j = d + static_cast<std::size_t>(uniform_index(rng, free_items.size() - d));
            std::swap(free_items[d], free_items[j]);
            out.push_back(free_items[d]);
          }
        }
      },
      threads);

  CandidateMap result;
  for (std::size_t k = 0; k < users.size(); ++k) result.emplace(users[k], std::move(lists[k]));
  return result;
}

SplitBundle make_split(const InteractionLog& log, const SplitConfig& config) {
  if (log.empty()) throw SplitError("empty dataset");
  if (config.candidate_size == 0) throw SplitError("candidate size must be positive");
  const auto test_seed = derive_seed(config.seed, kTestStream);
  auto [train, test] = config.method == SplitMethod::sbr
                           ? split_by_ratio(log, config.rho, config.time_aware, config.level, test_seed)
                           : split_leave_one_out(log, config.time_aware, test_seed);
  SplitBundle bundle;
  std::tie(bundle.train, bundle.validation) = hold_out_validation(train, config);
  bundle.test = std::move(test);

  const auto all_observed = to_matrix(log);
  bundle.candidates =
      build_candidates(bundle.test, all_observed, config.candidate_size,
                       derive_seed(config.seed, kTestCandidateStream));
  if (!bundle.validation.empty()) {
    const auto seen_before_test = to_matrix(train);
    bundle.validation_candidates =
        build_candidates(bundle.validation, seen_before_test, config.candidate_size,
                         derive_seed(config.seed, kValidationCandidateStream));
  }
  return bundle;
}

void write_candidates(const std::filesystem::path& path, const CandidateMap& candidates) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SplitError("cannot write " + path.string());
  for (const auto& [user, items] : candidates) {
    out << user;
    for (auto i : items) out << ' ' << i;
    out << '\n';
  }
}

CandidateMap read_candidates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SplitError("cannot open " + path.string());
  CandidateMap candidates;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    UserIndex user = 0;
    if (!(fields >> user)) throw SplitError("malformed candidates line " + std::to_string(line_no));
    auto& items = candidates[user];
    ItemIndex item = 0;
    while (fields >> item) items.push_back(item);
  }
  return candidates;
}

namespace {

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SplitError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::shared_ptr<IndexMap> read_index_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SplitError("cannot open " + path.string());
  auto map = std::make_shared<IndexMap>();
  std::string line;
  while (std::getline(in, line)) map->get_or_insert(line);
  return map;
}

InteractionLog read_partition(const std::filesystem::path& path, const std::shared_ptr<const IndexMap>& users,
                              const std::shared_ptr<const IndexMap>& items, bool has_timestamps) {
  ColumnSchema schema;
  schema.value = std::size_t{2};
  if (has_timestamps) schema.timestamp = std::size_t{3};
  // Empty partitions are written as empty files.
  if (std::filesystem::file_size(path) == 0) return InteractionLog({}, users, items, has_timestamps);
  const auto raw = ingest(path, schema, ',');
  std::vector<Interaction> records;
  records.reserve(raw.size());
  for (auto r : raw.records()) {
    const auto u = users->find(raw.users().raw(r.user));
    const auto i = items->find(raw.items().raw(r.item));
    if (!u || !i) throw SplitError(path.string() + " refers to an id missing from the index maps");
    r.user = *u;
    r.item = *i;
    records.push_back(r);
  }
  return InteractionLog(std::move(records), users, items, has_timestamps);
}

}  // namespace

void save_split(const std::filesystem::path& dir, const SplitBundle& bundle) {
  std::filesystem::create_directories(dir);
  const auto& users = bundle.train.users();
  const auto& items = bundle.train.items();
  write_lines(dir / "users.txt", users.raw_ids());
  write_lines(dir / "items.txt", items.raw_ids());
  write_log(dir / "train.csv", bundle.train);
  write_log(dir / "validation.csv", bundle.validation);
  write_log(dir / "test.csv", bundle.test);
  write_candidates(dir / "candidates.txt", bundle.candidates);
  write_candidates(dir / "validation_candidates.txt", bundle.validation_candidates);
  nlohmann::ordered_json meta;
  meta["has_timestamps"] = bundle.train.has_timestamps();
  meta["users"] = users.size();
  meta["items"] = items.size();
  meta["train"] = bundle.train.size();
  meta["validation"] = bundle.validation.size();
  meta["test"] = bundle.test.size();
  std::ofstream out(dir / "split.json", std::ios::binary);
  out << meta.dump(2) << '\n';
}

SplitBundle load_split(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "split.json");
  if (!meta_in) throw SplitError("no split.json in " + dir.string());
  nlohmann::json meta;
  meta_in >> meta;
  const bool has_ts = meta.at("has_timestamps").get<bool>();
  std::shared_ptr<const IndexMap> users = read_index_map(dir / "users.txt");
  std::shared_ptr<const IndexMap> items = read_index_map(dir / "items.txt");
  SplitBundle bundle;
  bundle.train = read_partition(dir / "train.csv", users, items, has_ts);
  bundle.validation = read_partition(dir / "validation.csv", users, items, has_ts);
  bundle.test = read_partition(dir / "test.csv", users, items, has_ts);
  bundle.candidates = read_candidates(dir / "candidates.txt");
  bundle.validation_candidates = read_candidates(dir / "validation_candidates.txt");
  return bundle;
}

}  // namespace daisy
