#pragma once

#include <string_view>

#include "daisy/dataset.hpp"

namespace daisy {

enum class FilterMode { origin, f_filter, f_core };

struct PreprocessConfig {
  double threshold = 1.0;
  FilterMode filter_mode = FilterMode::origin;
  int filter_level = 1;
  /// Keep below-threshold records as explicit zeros instead of dropping them.
  bool keep_subthreshold_as_negative = false;
  /// Collapse duplicate (user, item) records before filtering.
  bool deduplicate = false;
};

/// Parses the CLI shorthand: origin | f5 | f10 | core5 | core10 (any level).
PreprocessConfig parse_filter(std::string_view text, PreprocessConfig base = {});
std::string filter_name(const PreprocessConfig& config);

/// Records with value >= threshold become positives with value 1.0; the rest
/// are dropped (or kept with value 0 when `keep_subthreshold` is set).
InteractionLog binarize(const InteractionLog& log, double threshold, bool keep_subthreshold = false);

/// Keeps the first record of each (user, item) pair.
InteractionLog deduplicate(const InteractionLog& log);

/// One pass: counts are taken once on the input and every user and item below
/// `level` is removed at the same time. Survivors may fall below `level`.
InteractionLog f_filter(const InteractionLog& log, int level);

/// Repeats f_filter until every remaining user and item has >= `level` records.
InteractionLog f_core(const InteractionLog& log, int level);

InteractionLog preprocess(const InteractionLog& log, const PreprocessConfig& config);

}  // namespace daisy
