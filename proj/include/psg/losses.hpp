#pragma once

#include <string>
#include <string_view>

#include "psg/image.hpp"
#include "psg/tensor.hpp"

namespace psg {

enum class LossKind { kBce, kDice, kHybrid, kL1, kL2, kKld };

/// When the auxiliary target is rebuilt: from the current forward pass of
/// every step, or once per epoch from the model state at the epoch start.
enum class TargetRefresh { kPerStep, kPerEpoch };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);
TargetRefresh parse_target_refresh(std::string_view name);
std::string_view to_string(TargetRefresh refresh);

struct LossConfig {
  LossKind main_kind = LossKind::kHybrid;
  bool use_psg = true;
  double alpha = 1.0;
  int psg_kernel = 3;
  double epsilon = 1e-7;
  TargetRefresh refresh = TargetRefresh::kPerStep;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct LossBreakdown {
  double main = 0.0;
  double aux = 0.0;
  double overall = 0.0;
};

struct LossTerms {
  Tensor main;
  Tensor aux;
  Tensor overall;

  LossBreakdown breakdown(double alpha) const;
};

// Pairwise losses. Each is a scalar differentiable w.r.t. `pred`; `target`
// is always treated as a constant. pred and target share a shape.

/// Mean binary cross-entropy with pred clamped to [eps, 1 - eps].
Tensor bce(const Tensor& pred, const Tensor& target, double eps = 1e-7);
/// 1 - 2 sum(xy) / (sum x + sum y + eps), per sample, averaged over the batch.
Tensor dice(const Tensor& pred, const Tensor& target, double eps = 1e-7);
Tensor hybrid(const Tensor& pred, const Tensor& target, double eps = 1e-7);
Tensor l1(const Tensor& pred, const Tensor& target);
Tensor l2(const Tensor& pred, const Tensor& target);
/// Mean per-pixel Bernoulli KL(target || pred), 0 log 0 := 0.
Tensor kld(const Tensor& pred, const Tensor& target, double eps = 1e-7);

Tensor pair_loss(LossKind kind, const Tensor& pred, const Tensor& target,
                 double eps);

/// Same formula as the main loss, against the simulated-closing target built
/// from the detached prediction.
Tensor psg_aux(const Tensor& pred, const Tensor& gt, const LossConfig& cfg);
Tensor psg_aux(const Tensor& pred, const BinaryMask& gt, const LossConfig& cfg);

/// main + alpha * aux. `fixed_target`, when defined, replaces the target that
/// would otherwise be rebuilt from `pred` (per-epoch refresh).
LossTerms overall(const Tensor& pred, const Tensor& gt, const LossConfig& cfg,
                  const Tensor& fixed_target = Tensor());

}  // namespace psg
