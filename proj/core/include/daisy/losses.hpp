#pragma once

#include <string_view>

namespace daisy {

enum class LossKind { bpr_log, ce, hinge, top1 };
enum class ObjectiveStyle { point, pair };

LossKind parse_loss(std::string_view text);
std::string_view loss_name(LossKind kind);
/// CE is point-wise; log, hinge and top-1 are pair-wise.
ObjectiveStyle objective_style(LossKind kind);

double sigmoid(double x);

/// Loss value and its derivatives with respect to the positive score r_ui and
/// the negative score r_uj of one (u, i, j) triple.
struct PairLossGrad {
  double value = 0.0;
  double d_pos = 0.0;
  double d_neg = 0.0;
};

///   bpr_log: -log σ(x)               x = r_ui - r_uj
///   hinge:   max(0, 1 - x)           subgradient -1 below the margin, else 0
///   top1:    σ(-x) + σ(r_uj²)
/// Throws DivergedError on non-finite input.
PairLossGrad pair_loss(LossKind kind, double pos_score, double neg_score);

struct PointLossGrad {
  double value = 0.0;
  double d_score = 0.0;
};

/// Cross entropy on p = σ(score) clamped to [1e-12, 1 - 1e-12] with a 0/1 label.
PointLossGrad cross_entropy(double score, double label);

}  // namespace daisy
