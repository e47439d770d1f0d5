#pragma once

#include <stdexcept>
#include <string>

namespace daisy {

// Base of every error raised by the toolkit. `stage()` names the pipeline
// stage that failed so the CLI can print stage-tagged diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

class DatasetError : public Error {
 public:
  explicit DatasetError(const std::string& what) : Error("dataset", what) {}
};

class PreprocessError : public Error {
 public:
  explicit PreprocessError(const std::string& what) : Error("preprocess", what) {}
};

class SplitError : public Error {
 public:
  explicit SplitError(const std::string& what) : Error("split", what) {}
};

class SamplingError : public Error {
 public:
  explicit SamplingError(const std::string& what) : Error("negsample", what) {}
};

class ModelError : public Error {
 public:
  explicit ModelError(const std::string& what) : Error("model", what) {}
};

/// Raised when a loss or score becomes non-finite during training.
class DivergedError : public Error {
 public:
  explicit DivergedError(const std::string& what = "diverged") : Error("train", what) {}
};

class TuneError : public Error {
 public:
  explicit TuneError(const std::string& what) : Error("tune", what) {}
};

class AnalysisError : public Error {
 public:
  explicit AnalysisError(const std::string& what) : Error("analyze", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

}  // namespace daisy
