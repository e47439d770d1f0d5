#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "daisy/dataset.hpp"

namespace daisy {

enum class SplitMethod { sbr, loo };
enum class SplitLevel { global, user };

struct SplitConfig {
  SplitMethod method = SplitMethod::sbr;
  bool time_aware = true;
  SplitLevel level = SplitLevel::global;
  double rho = 0.8;
  double validation_fraction = 0.1;
  std::size_t candidate_size = 1000;
  std::uint64_t seed = 0;
};

/// rsbr | tsbr | rloo | tloo
SplitConfig parse_split_method(std::string_view text, SplitConfig base = {});
std::string split_method_name(const SplitConfig& config);

/// Per-user ordered candidate lists: the user's target items first, then the
/// sampled negatives in draw order.
using CandidateMap = std::map<UserIndex, std::vector<ItemIndex>>;

struct SplitBundle {
  InteractionLog train;  // inner training set; excludes validation records
  InteractionLog validation;
  InteractionLog test;
  CandidateMap candidates;             // test users
  CandidateMap validation_candidates;  // validation users; never looks at test

  /// train followed by validation: the set the final model is refit on.
  InteractionLog full_train() const;
};

/// Train size is ceil(rho * count) so a single-record user trains.
std::size_t train_share(std::size_t count, double rho);

std::pair<InteractionLog, InteractionLog> split_by_ratio(const InteractionLog& log, double rho,
                                                         bool time_aware, SplitLevel level,
                                                         std::uint64_t seed);

std::pair<InteractionLog, InteractionLog> split_leave_one_out(const InteractionLog& log,
                                                              bool time_aware, std::uint64_t seed);

/// Carves the validation slice out of `train` with the same rule that
/// produced the test set. Returns (inner_train, validation).
std::pair<InteractionLog, InteractionLog> hold_out_validation(const InteractionLog& train,
                                                              const SplitConfig& config);

/// For every user with records in `targets`: T(u) plus up to
/// candidate_size - |T(u)| items sampled uniformly without replacement from
/// the items u has neither in `excluded` nor in T(u).
CandidateMap build_candidates(const InteractionLog& targets, const CsrMatrix& excluded,
                              std::size_t candidate_size, std::uint64_t seed,
                              std::size_t threads = 1);

/// split -> validation hold-out -> candidates.
SplitBundle make_split(const InteractionLog& log, const SplitConfig& config);

void save_split(const std::filesystem::path& dir, const SplitBundle& bundle);
SplitBundle load_split(const std::filesystem::path& dir);

void write_candidates(const std::filesystem::path& path, const CandidateMap& candidates);
CandidateMap read_candidates(const std::filesystem::path& path);

}  // namespace daisy
