#include "psg/morphology.hpp"

#include <string>

#include "psg/convert.hpp"
#include "psg/ops.hpp"

namespace psg {

StructuringElement::StructuringElement(int side) : side_(side) {
  if (side < 1 || side % 2 == 0) {
    throw std::invalid_argument("structuring element side must be odd and >= 1, got " +
                                std::to_string(side));
  }
}

namespace {

// hit: some in-window pixel equals `probe`. Dilation reports hits, erosion
// reports their absence.
BinaryMask window_scan(const BinaryMask& m, int r, std::uint8_t probe,
                       bool outside_hits) {
  const long W = static_cast<long>(m.width()), H = static_cast<long>(m.height());
  BinaryMask out(m.width(), m.height());
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      bool hit = false;
      for (long dy = -r; dy <= r && !hit; ++dy) {
        for (long dx = -r; dx <= r && !hit; ++dx) {
          const long yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= H || xx < 0 || xx >= W) {
            hit = outside_hits;
          } else {
            hit = m.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy)) == probe;
          }
        }
      }
      out.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
              probe == 1 ? hit : !hit);
    }
  }
  return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& m, StructuringElement se) {
  return window_scan(m, se.radius(), 1, false);
}

BinaryMask erode(const BinaryMask& m, StructuringElement se,
                 ErosionBorder border) {
  // A pixel survives iff no background pixel is seen in its window.
  return window_scan(m, se.radius(), 0, border == ErosionBorder::kZero);
}

BinaryMask close(const BinaryMask& m, StructuringElement se) {
  return erode(dilate(m, se), se);
}

BinaryMask complement(const BinaryMask& m) {
  BinaryMask out(m.width(), m.height());
  for (std::size_t y = 0; y < m.height(); ++y) {
    for (std::size_t x = 0; x < m.width(); ++x) out.set(x, y, m.at(x, y) == 0);
  }
  return out;
}

Tensor psg_target(const Tensor& pred, const Tensor& gt, StructuringElement se) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("psg_target: prediction " + shape_str(pred.shape()) +
                     " vs ground truth " + shape_str(gt.shape()));
  }
  const Tensor dilated = maxpool2d(detach(pred), se.side(), 1, se.radius());
  const auto d = dilated.values();
  const auto g = gt.values();
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = d[i] * g[i];
  return Tensor::from_values(pred.shape(), std::move(out));
}

SaliencyMap psg_target(const SaliencyMap& pred, const BinaryMask& gt,
                       StructuringElement se) {
  require_same_size(pred, gt, "psg_target");
  return to_saliency_map(psg_target(to_tensor(pred), to_tensor(gt), se));
}

BinaryMask threshold_map(const SaliencyMap& pred, double threshold) {
  BinaryMask out(pred.width(), pred.height());
  for (std::size_t y = 0; y < pred.height(); ++y) {
    for (std::size_t x = 0; x < pred.width(); ++x) {
      out.set(x, y, pred.at(x, y) >= threshold);
    }
  }
  return out;
}

BinaryMask postprocess_close(const SaliencyMap& pred, StructuringElement se,
                             double threshold) {
  return close(threshold_map(pred, threshold), se);
}

}  // namespace psg
