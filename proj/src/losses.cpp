#include "psg/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "psg/convert.hpp"
#include "psg/morphology.hpp"
#include "psg/ops.hpp"

namespace psg {

namespace {

constexpr std::array<std::pair<LossKind, std::string_view>, 6> kLossNames{{
    {LossKind::kBce, "bce"},
    {LossKind::kDice, "dice"},
    {LossKind::kHybrid, "hybrid"},
    {LossKind::kL1, "l1"},
    {LossKind::kL2, "l2"},
    {LossKind::kKld, "kld"},
}};

void require_pair(const Tensor& pred, const Tensor& target, const char* what) {
  if (pred.shape() != target.shape()) {
    throw ShapeError(std::string(what) + ": prediction " +
                     shape_str(pred.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
}

std::vector<double> copy_values(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

// Shared backbone of BCE and KLD: both have d/dx = (x - y) / (x (1 - x)) per
// pixel inside the clamp and differ only in their constant terms.
template <class Term>
Tensor clamped_pixel_loss(const Tensor& pred, const Tensor& target, double eps,
                          Term term, const char* what) {
  require_pair(pred, target, what);
  const auto x = pred.values();
  const auto y = target.values();
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xc = std::clamp(x[i], eps, 1.0 - eps);
    acc += term(xc, y[i]);
  }
  return Tensor::record(
      {1}, {acc / n}, {pred},
      [pred, y = copy_values(target), eps, n](std::span<const double>,
                                              std::span<const double> dy) {
        Tensor p = pred;
        auto dx = p.mutable_grad();
        const auto x = p.values();
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (x[i] < eps || x[i] > 1.0 - eps) continue;
          dx[i] += dy[0] * (-y[i] / x[i] + (1.0 - y[i]) / (1.0 - x[i])) / n;
        }
      });
}

}  // namespace

LossKind parse_loss_kind(std::string_view name) {
  for (const auto& [kind, text] : kLossNames) {
    if (text == name) return kind;
  }
  throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) {
  for (const auto& [k, text] : kLossNames) {
    if (k == kind) return text;
  }
  return "?";
}

TargetRefresh parse_target_refresh(std::string_view name) {
  if (name == "step") return TargetRefresh::kPerStep;
  if (name == "epoch") return TargetRefresh::kPerEpoch;
  throw std::invalid_argument("unknown target refresh '" + std::string(name) +
                              "' (expected step or epoch)");
}

std::string_view to_string(TargetRefresh refresh) {
  return refresh == TargetRefresh::kPerStep ? "step" : "epoch";
}

void LossConfig::validate() const {
  if (!(alpha >= 0.0)) throw std::invalid_argument("loss.alpha must be >= 0");
  if (psg_kernel < 1 || psg_kernel % 2 == 0) {
    throw std::invalid_argument("loss.psg_kernel must be odd and >= 1");
  }
  if (!(epsilon > 0.0 && epsilon <= 1e-3)) {
    throw std::invalid_argument("loss.epsilon must lie in (0, 1e-3]");
  }
}

LossBreakdown LossTerms::breakdown(double alpha) const {
  LossBreakdown b;
  b.main = main.item();
  b.aux = aux.item();
  b.overall = b.main + alpha * b.aux;
  return b;
}

Tensor bce(const Tensor& pred, const Tensor& target, double eps) {
  return clamped_pixel_loss(
      pred, target, eps,
      [](double x, double y) {
        return -(y * std::log(x) + (1.0 - y) * std::log(1.0 - x));
      },
      "bce");
}

Tensor kld(const Tensor& pred, const Tensor& target, double eps) {
  return clamped_pixel_loss(
      pred, target, eps,
      [](double x, double y) {
        double v = 0.0;
        if (y > 0.0) v += y * (std::log(y) - std::log(x));
        if (y < 1.0) v += (1.0 - y) * (std::log(1.0 - y) - std::log(1.0 - x));
        return v;
      },
      "kld");
}

Tensor dice(const Tensor& pred, const Tensor& target, double eps) {
  require_pair(pred, target, "dice");
  if (pred.rank() == 0 || pred.numel() == 0) throw ShapeError("dice: empty input");
  const std::size_t batch = pred.dim(0);
  const std::size_t per = pred.numel() / batch;
  const auto x = pred.values();
  const auto y = target.values();
  std::vector<double> denom(batch), overlap(batch);
  double acc = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double sx = 0.0, sy = 0.0, sxy = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      sx += x[i];
      sy += y[i];
      sxy += x[i] * y[i];
    }
    denom[b] = sx + sy + eps;
    overlap[b] = sxy;
    acc += 1.0 - 2.0 * sxy / denom[b];
  }
  const double nb = static_cast<double>(batch);
  return Tensor::record(
      {1}, {acc / nb}, {pred},
      [pred, y = copy_values(target), denom, overlap, per, nb](
          std::span<const double>, std::span<const double> dy) {
        Tensor p = pred;
        auto dx = p.mutable_grad();
        for (std::size_t b = 0; b < denom.size(); ++b) {
          const double d = denom[b];
          for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
            dx[i] -= dy[0] * 2.0 * (y[i] * d - overlap[b]) / (d * d) / nb;
          }
        }
      });
}

Tensor hybrid(const Tensor& pred, const Tensor& target, double eps) {
  return add(bce(pred, target, eps), dice(pred, target, eps));
}

Tensor l1(const Tensor& pred, const Tensor& target) {
  require_pair(pred, target, "l1");
  const auto x = pred.values();
  const auto y = target.values();
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
  return Tensor::record(
      {1}, {acc / n}, {pred},
      [pred, y = copy_values(target), n](std::span<const double>,
                                         std::span<const double> dy) {
        Tensor p = pred;
        auto dx = p.mutable_grad();
        const auto x = p.values();
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double d = x[i] - y[i];
          if (d > 0.0) dx[i] += dy[0] / n;
          if (d < 0.0) dx[i] -= dy[0] / n;
        }
      });
}

Tensor l2(const Tensor& pred, const Tensor& target) {
  require_pair(pred, target, "l2");
  const auto x = pred.values();
  const auto y = target.values();
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return Tensor::record(
      {1}, {acc / n}, {pred},
      [pred, y = copy_values(target), n](std::span<const double>,
                                         std::span<const double> dy) {
        Tensor p = pred;
        auto dx = p.mutable_grad();
        const auto x = p.values();
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] += dy[0] * 2.0 * (x[i] - y[i]) / n;
      });
}

Tensor pair_loss(LossKind kind, const Tensor& pred, const Tensor& target,
                 double eps) {
  switch (kind) {
    case LossKind::kBce: return bce(pred, target, eps);
    case LossKind::kDice: return dice(pred, target, eps);
    case LossKind::kHybrid: return hybrid(pred, target, eps);
    case LossKind::kL1: return l1(pred, target);
    case LossKind::kL2: return l2(pred, target);
    case LossKind::kKld: return kld(pred, target, eps);
  }
  throw std::invalid_argument("unhandled loss kind");
}

Tensor psg_aux(const Tensor& pred, const Tensor& gt, const LossConfig& cfg) {
  const Tensor target = psg_target(pred, gt, StructuringElement(cfg.psg_kernel));
  return pair_loss(cfg.main_kind, pred, target, cfg.epsilon);
}

Tensor psg_aux(const Tensor& pred, const BinaryMask& gt, const LossConfig& cfg) {
  const Tensor g = to_tensor(gt);
  if (pred.shape() != g.shape()) {
    throw ShapeError("psg_aux: prediction " + shape_str(pred.shape()) +
                     " vs ground truth " + shape_str(g.shape()));
  }
  return psg_aux(pred, g, cfg);
}

LossTerms overall(const Tensor& pred, const Tensor& gt, const LossConfig& cfg,
                  const Tensor& fixed_target) {
  LossTerms terms;
  terms.main = pair_loss(cfg.main_kind, pred, gt, cfg.epsilon);
  if (!cfg.use_psg) {
    terms.aux = Tensor::scalar(0.0);
    terms.overall = terms.main;
    return terms;
  }
  if (fixed_target.defined()) {
    require_pair(pred, fixed_target, "overall");
    terms.aux = pair_loss(cfg.main_kind, pred, fixed_target, cfg.epsilon);
  } else {
    require_pair(pred, gt, "overall");
    terms.aux = psg_aux(pred, gt, cfg);
  }
  terms.overall = add(terms.main, scalar_mul(terms.aux, cfg.alpha));
  return terms;
}

}  // namespace psg
