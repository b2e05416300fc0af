#pragma once

#include <span>

#include "psg/image.hpp"
#include "psg/tensor.hpp"

namespace psg {

/// 1 x 1 x H x W.
Tensor to_tensor(const SaliencyMap& map);
Tensor to_tensor(const BinaryMask& mask);

/// Stacks same-sized masks into B x 1 x H x W.
Tensor stack_masks(std::span<const BinaryMask> masks);

/// Interleaved RGB images of one size -> B x 3 x H x W planes.
Tensor stack_images(std::span<const RgbImage> images);

/// Plane (b, c) of a B x C x H x W tensor; values are clamped into [0,1].
SaliencyMap to_saliency_map(const Tensor& t, std::size_t batch = 0,
                            std::size_t channel = 0);

}  // namespace psg
