#include "daisy/preprocess.hpp"

#include <charconv>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "daisy/error.hpp"

namespace daisy {
namespace {

int parse_level(std::string_view digits, std::string_view whole) {
  int level = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), level);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || level < 1)
    throw PreprocessError("unknown filter '" + std::string(whole) + "'");
  return level;
}

// Positive records only; explicit zeros kept by binarize do not count as activity.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> activity_counts(const InteractionLog& log) {
  std::vector<std::size_t> users(log.num_users(), 0), items(log.num_items(), 0);
  for (const auto& r : log.records()) {
    if (r.value <= 0) continue;
    ++users[r.user];
    ++items[r.item];
  }
  return {std::move(users), std::move(items)};
}

}  // namespace

PreprocessConfig parse_filter(std::string_view text, PreprocessConfig base) {
  if (text == "origin") {
    base.filter_mode = FilterMode::origin;
    base.filter_level = 1;
  } else if (text.starts_with("core")) {
    base.filter_mode = FilterMode::f_core;
    base.filter_level = parse_level(text.substr(4), text);
  } else if (text.starts_with("f")) {
    base.filter_mode = FilterMode::f_filter;
    base.filter_level = parse_level(text.substr(1), text);
  } else {
    throw PreprocessError("unknown filter '" + std::string(text) + "'");
  }
  return base;
}

std::string filter_name(const PreprocessConfig& config) {
  switch (config.filter_mode) {
    case FilterMode::origin: return "origin";
    case FilterMode::f_filter: return "f" + std::to_string(config.filter_level);
    case FilterMode::f_core: return "core" + std::to_string(config.filter_level);
  }
  return "origin";
}

InteractionLog binarize(const InteractionLog& log, double threshold, bool keep_subthreshold) {
  if (log.empty()) throw PreprocessError("empty dataset");
  if (threshold < 0) throw PreprocessError("binarization threshold must be >= 0");
  std::vector<Interaction> kept;
  kept.reserve(log.size());
  bool any_positive = false;
  for (auto r : log.records()) {
    if (r.value >= threshold) {
      r.value = 1.0;
      any_positive = true;
      kept.push_back(r);
    } else if (keep_subthreshold) {
      r.value = 0.0;
      kept.push_back(r);
    }
  }
  if (!any_positive) throw PreprocessError("binarization removed all interactions");
  return log.with_records(std::move(kept)).reindexed();
}

InteractionLog deduplicate(const InteractionLog& log) {
  std::set<std::pair<UserIndex, ItemIndex>> seen;
  std::vector<Interaction> kept;
  kept.reserve(log.size());
  for (const auto& r : log.records())
    if (seen.emplace(r.user, r.item).second) kept.push_back(r);
  return log.with_records(std::move(kept));
}

InteractionLog f_filter(const InteractionLog& log, int level) {
  if (level < 1) throw PreprocessError("filter level must be >= 1");
  const auto [user_count, item_count] = activity_counts(log);
  const auto min_count = static_cast<std::size_t>(level);
  std::vector<Interaction> kept;
  kept.reserve(log.size());
  for (const auto& r : log.records())
    if (user_count[r.user] >= min_count && item_count[r.item] >= min_count) kept.push_back(r);
  if (kept.empty()) throw PreprocessError("filtering removed all interactions");
  return log.with_records(std::move(kept)).reindexed();
}

InteractionLog f_core(const InteractionLog& log, int level) {
  if (level < 1) throw PreprocessError("filter level must be >= 1");
  InteractionLog current = log.reindexed();
  while (true) {
    const auto before = current.size();
    try {
      current = f_filter(current, level);
    } catch (const PreprocessError&) {
      throw PreprocessError("F-core eliminated the dataset");
    }
    if (current.size() == before) return current;
  }
}

InteractionLog preprocess(const InteractionLog& log, const PreprocessConfig& config) {
  InteractionLog out = binarize(log, config.threshold, config.keep_subthreshold_as_negative);
  if (config.deduplicate) out = deduplicate(out).reindexed();
  switch (config.filter_mode) {
    case FilterMode::origin: return out;
    case FilterMode::f_filter: return f_filter(out, config.filter_level);
    case FilterMode::f_core: return f_core(out, config.filter_level);
  }
  return out;
}

}  // namespace daisy
