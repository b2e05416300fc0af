#include "psg/convert.hpp"

#include <algorithm>

namespace psg {

Tensor to_tensor(const SaliencyMap& map) {
  const auto v = map.values();
  return Tensor::from_values({1, 1, map.height(), map.width()},
                             {v.begin(), v.end()});
}

Tensor to_tensor(const BinaryMask& mask) {
  const auto v = mask.values();
  return Tensor::from_values({1, 1, mask.height(), mask.width()},
                             {v.begin(), v.end()});
}

Tensor stack_masks(std::span<const BinaryMask> masks) {
  if (masks.empty()) throw ShapeError("stack_masks: no masks");
  const std::size_t w = masks.front().width(), h = masks.front().height();
  std::vector<double> v;
  v.reserve(masks.size() * w * h);
  for (const auto& m : masks) {
    require_same_size(m, masks.front(), "stack_masks");
    v.insert(v.end(), m.values().begin(), m.values().end());
  }
  return Tensor::from_values({masks.size(), 1, h, w}, std::move(v));
}

Tensor stack_images(std::span<const RgbImage> images) {
  if (images.empty()) throw ShapeError("stack_images: no images");
  const std::size_t w = images.front().width, h = images.front().height;
  std::vector<double> v(images.size() * 3 * h * w);
  std::size_t b = 0;
  for (const auto& img : images) {
    if (img.width != w || img.height != h) {
      throw ShapeError("stack_images: images differ in size");
    }
    for (std::size_t c = 0; c < 3; ++c) {
      double* plane = v.data() + (b * 3 + c) * h * w;
      for (std::size_t i = 0; i < h * w; ++i) plane[i] = img.pixels[i * 3 + c];
    }
    ++b;
  }
  return Tensor::from_values({images.size(), 3, h, w}, std::move(v));
}

SaliencyMap to_saliency_map(const Tensor& t, std::size_t batch,
                            std::size_t channel) {
  if (t.rank() != 4 || batch >= t.dim(0) || channel >= t.dim(1)) {
    throw ShapeError("to_saliency_map: plane (" + std::to_string(batch) + "," +
                     std::to_string(channel) + ") of " + shape_str(t.shape()));
  }
  const std::size_t h = t.dim(2), w = t.dim(3);
  const std::size_t off = (batch * t.dim(1) + channel) * h * w;
  std::vector<double> v(t.values().begin() + static_cast<long>(off),
                        t.values().begin() + static_cast<long>(off + h * w));
  for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
  return SaliencyMap(w, h, std::move(v));
}

}  // namespace psg
