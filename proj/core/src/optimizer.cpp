#include "daisy/optimizer.hpp"

#include <cmath>
#include <string>

#include "daisy/error.hpp"

namespace daisy {

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "gd") return OptimizerKind::gd;
  if (text == "sgd") return OptimizerKind::sgd;
  if (text == "mbsgd" || text == "mb-sgd") return OptimizerKind::mbsgd;
  if (text == "adagrad") return OptimizerKind::adagrad;
  if (text == "rmsprop") return OptimizerKind::rmsprop;
  if (text == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + std::string(text) + "'");
}

std::string_view optimizer_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::gd: return "gd";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::mbsgd: return "mbsgd";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
  }
  return "adam";
}

Optimizer::Optimizer(OptimizerConfig config, std::size_t n_params) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  switch (config_.kind) {
    case OptimizerKind::adagrad:
    case OptimizerKind::rmsprop: first_.assign(n_params, 0.0); break;
    case OptimizerKind::adam:
      first_.assign(n_params, 0.0);
      second_.assign(n_params, 0.0);
      break;
    default: break;
  }
}

void Optimizer::apply(std::size_t offset, std::span<double> params, std::span<const double> grads) {
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  switch (config_.kind) {
    case OptimizerKind::gd:
    case OptimizerKind::sgd:
    case OptimizerKind::mbsgd:
      for (std::size_t k = 0; k < grads.size(); ++k) params[offset + k] -= lr * grads[k];
      break;
    case OptimizerKind::adagrad:
      for (std::size_t k = 0; k < grads.size(); ++k) {
        double& acc = first_[offset + k];
        acc += grads[k] * grads[k];
        params[offset + k] -= lr * grads[k] / (std::sqrt(acc) + eps);
      }
      break;
    case OptimizerKind::rmsprop:
      for (std::size_t k = 0; k < grads.size(); ++k) {
        double& avg = first_[offset + k];
        avg = config_.rho * avg + (1.0 - config_.rho) * grads[k] * grads[k];
        params[offset + k] -= lr * grads[k] / (std::sqrt(avg) + eps);
      }
      break;
    case OptimizerKind::adam: {
      const double t = static_cast<double>(step_ == 0 ? 1 : step_);
      const double c1 = 1.0 - std::pow(config_.beta1, t);
      const double c2 = 1.0 - std::pow(config_.beta2, t);
      for (std::size_t k = 0; k < grads.size(); ++k) {
        double& m = first_[offset + k];
        double& v = second_[offset + k];
        m = config_.beta1 * m + (1.0 - config_.beta1) * grads[k];
        v = config_.beta2 * v + (1.0 - config_.beta2) * grads[k] * grads[k];
        params[offset + k] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
      }
      break;
    }
  }
}

}  // namespace daisy
