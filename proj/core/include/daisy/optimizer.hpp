#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace daisy {

enum class OptimizerKind { gd, sgd, mbsgd, adagrad, rmsprop, adam };

OptimizerKind parse_optimizer(std::string_view text);
std::string_view optimizer_name(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 0.001;
  double rho = 0.9;  // RMSProp decay
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First-order update rules over a flat parameter vector with per-parameter
/// state. Updates are sparse: callers apply only the slices whose gradient
/// they computed in the current step, and untouched state is left alone.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::size_t n_params);

  /// Starts a new step; Adam's bias correction uses the global step count.
  void begin_step() { ++step_; }
  std::uint64_t step() const noexcept { return step_; }

  /// θ[offset + k] -= update(g[k]) for k in [0, grads.size()).
  void apply(std::size_t offset, std::span<double> params, std::span<const double> grads);

  const OptimizerConfig& config() const noexcept { return config_; }

 private:
  OptimizerConfig config_;
  std::uint64_t step_ = 0;
  std::vector<double> first_;   // AdaGrad G, RMSProp E, Adam m
  std::vector<double> second_;  // Adam v
};

}  // namespace daisy
