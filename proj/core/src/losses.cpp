#include "daisy/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "daisy/error.hpp"

namespace daisy {
namespace {

constexpr double kProbFloor = 1e-12;

// log σ(x) without overflow for large |x|.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

void require_finite(double a, double b = 0.0) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw DivergedError("diverged: non-finite score");
}

}  // namespace

LossKind parse_loss(std::string_view text) {
  if (text == "bpr_log" || text == "bpr" || text == "log") return LossKind::bpr_log;
  if (text == "ce") return LossKind::ce;
  if (text == "hinge") return LossKind::hinge;
  if (text == "top1") return LossKind::top1;
  throw ConfigError("unknown loss '" + std::string(text) + "'");
}

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::bpr_log: return "bpr_log";
    case LossKind::ce: return "ce";
    case LossKind::hinge: return "hinge";
    case LossKind::top1: return "top1";
  }
  return "bpr_log";
}

ObjectiveStyle objective_style(LossKind kind) {
  return kind == LossKind::ce ? ObjectiveStyle::point : ObjectiveStyle::pair;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

PairLossGrad pair_loss(LossKind kind, double pos_score, double neg_score) {
  require_finite(pos_score, neg_score);
  const double x = pos_score - neg_score;
  PairLossGrad out;
  switch (kind) {
    case LossKind::bpr_log: {
      out.value = -log_sigmoid(x);
      const double g = -(1.0 - sigmoid(x));
      out.d_pos = g;
      out.d_neg = -g;
      break;
    }
    case LossKind::hinge: {
      out.value = std::max(0.0, 1.0 - x);
      const double g = x < 1.0 ? -1.0 : 0.0;
      out.d_pos = g;
      out.d_neg = -g;
      break;
    }
    case LossKind::top1: {
      const double s_neg_x = sigmoid(-x);
      const double sq = neg_score * neg_score;
      const double s_sq = sigmoid(sq);
      out.value = s_neg_x + s_sq;
      const double dx = -s_neg_x * (1.0 - s_neg_x);  // d σ(-x) / dx
      out.d_pos = dx;
      out.d_neg = -dx + s_sq * (1.0 - s_sq) * 2.0 * neg_score;
      break;
    }
    case LossKind::ce:
      throw ConfigError("cross entropy is a point-wise loss");
  }
  return out;
}

PointLossGrad cross_entropy(double score, double label) {
  require_finite(score);
  const double raw = sigmoid(score);
  const double p = std::clamp(raw, kProbFloor, 1.0 - kProbFloor);
  PointLossGrad out;
  out.value = -label * std::log(p) - (1.0 - label) * std::log(1.0 - p);
  // Inside the clamp d/ds of CE∘σ is p - label; the clamp itself is flat.
  out.d_score = (raw == p) ? p - label : 0.0;
  return out;
}

}  // namespace daisy
