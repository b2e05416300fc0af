#pragma once

#include "psg/image.hpp"
#include "psg/tensor.hpp"

namespace psg {

/// Square all-ones window with odd side.
class StructuringElement {
 public:
  explicit StructuringElement(int side);
  int side() const { return side_; }
  int radius() const { return side_ / 2; }

 private:
  int side_;
};

/// Out-of-grid pixels during erosion: kIgnore only inspects in-grid pixels
/// (the dual of zero-padded dilation); kZero treats them as background.
enum class ErosionBorder { kIgnore, kZero };

/// Set definition: 1 iff any in-grid pixel under the window is 1.
BinaryMask dilate(const BinaryMask& m, StructuringElement se);
BinaryMask erode(const BinaryMask& m, StructuringElement se,
                 ErosionBorder border = ErosionBorder::kIgnore);
/// erode(dilate(m)). With the default border the result is extensive and
/// idempotent.
BinaryMask close(const BinaryMask& m, StructuringElement se);
BinaryMask complement(const BinaryMask& m);

/// Simulated closing: maxpool(pred) intersected (elementwise product) with gt.
SaliencyMap psg_target(const SaliencyMap& pred, const BinaryMask& gt,
                       StructuringElement se);

/// Tensor form used by the losses. `pred` and `gt` share a B x C x H x W
/// shape; the result is a constant (no gradient path back to `pred`).
Tensor psg_target(const Tensor& pred, const Tensor& gt, StructuringElement se);

/// Foreground iff value >= threshold.
BinaryMask threshold_map(const SaliencyMap& pred, double threshold);

/// Binarize at `threshold`, then close with `se`.
BinaryMask postprocess_close(const SaliencyMap& pred, StructuringElement se,
                             double threshold);

}  // namespace psg
