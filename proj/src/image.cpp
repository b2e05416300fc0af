#include "psg/image.hpp"

#include <algorithm>
#include <string>

namespace psg {

BinaryMask::BinaryMask(std::size_t width, std::size_t height,
                       std::vector<std::uint8_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (values_.size() != width * height) {
    throw std::invalid_argument("BinaryMask: expected " +
                                std::to_string(width * height) + " values, got " +
                                std::to_string(values_.size()));
  }
  if (std::any_of(values_.begin(), values_.end(), [](auto v) { return v > 1; })) {
    throw std::invalid_argument("BinaryMask: values must be 0 or 1");
  }
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), 1));
}

SaliencyMap::SaliencyMap(std::size_t width, std::size_t height,
                         std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (values_.size() != width * height) {
    throw std::invalid_argument("SaliencyMap: expected " +
                                std::to_string(width * height) + " values, got " +
                                std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("SaliencyMap: value " + std::to_string(v) +
                                  " outside [0,1]");
    }
  }
}

SaliencyMap SaliencyMap::from_mask(const BinaryMask& mask) {
  std::vector<double> v(mask.values().begin(), mask.values().end());
  return SaliencyMap(mask.width(), mask.height(), std::move(v));
}

void SaliencyMap::set(std::size_t x, std::size_t y, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument("SaliencyMap: value " + std::to_string(v) +
                                " outside [0,1]");
  }
  values_[y * width_ + x] = v;
}

}  // namespace psg
