#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace psg {

/// H x W grid in {0,1}; ground truth and binarized predictions.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t width, std::size_t height)
      : width_(width), height_(height), values_(width * height, 0) {}
  /// Rejects values outside {0,1}.
  BinaryMask(std::size_t width, std::size_t height,
             std::vector<std::uint8_t> values);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  std::uint8_t at(std::size_t x, std::size_t y) const {
    return values_[y * width_ + x];
  }
  void set(std::size_t x, std::size_t y, bool on) {
    values_[y * width_ + x] = on ? 1 : 0;
  }
  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t count() const;

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> values_;
};

/// H x W grid of reals in [0,1]; a prediction or a soft target.
class SaliencyMap {
 public:
  SaliencyMap() = default;
  SaliencyMap(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), values_(width * height, fill) {}
  /// Rejects values outside [0,1] (NaN included).
  SaliencyMap(std::size_t width, std::size_t height,
              std::vector<double> values);

  static SaliencyMap from_mask(const BinaryMask& mask);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double at(std::size_t x, std::size_t y) const {
    return values_[y * width_ + x];
  }
  void set(std::size_t x, std::size_t y, double v);
  std::span<const double> values() const { return values_; }

  bool operator==(const SaliencyMap&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> values_;
};

/// H x W x 3 interleaved RGB in [0,1].
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  double at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
  double& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
};

template <class A, class B>
void require_same_size(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument(std::string(what) + ": size mismatch " +
                                std::to_string(a.width()) + "x" +
                                std::to_string(a.height()) + " vs " +
                                std::to_string(b.width()) + "x" +
                                std::to_string(b.height()));
  }
}

}  // namespace psg
