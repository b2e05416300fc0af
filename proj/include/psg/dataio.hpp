#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "psg/image.hpp"

namespace psg {

enum class PnmErrorCode {
  kOpenFailed,
  kMalformedHeader,
  kTruncatedPayload,
  kUnsupportedMaxval,
  kWriteFailed,
};

class PnmError : public std::runtime_error {
 public:
  PnmError(PnmErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  PnmErrorCode code() const { return code_; }

 private:
  PnmErrorCode code_;
};

/// Raw 8-bit raster as stored: 1 channel for P5, 3 (interleaved) for P6.
struct PnmRaster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> bytes;
};

PnmRaster read_pnm(const std::filesystem::path& path);
void write_pnm(const PnmRaster& raster, const std::filesystem::path& path);

/// P6 colour, or P5 replicated to three channels; p -> p / 255.
RgbImage load_rgb(const std::filesystem::path& path);
/// P5, foreground iff p >= 128.
BinaryMask load_mask(const std::filesystem::path& path);
/// P5, p -> p / 255.
SaliencyMap load_saliency(const std::filesystem::path& path);

/// P5 with round(v * 255).
void save_pnm(const SaliencyMap& map, const std::filesystem::path& path);
void save_pnm(const BinaryMask& mask, const std::filesystem::path& path);
/// P6.
void save_pnm(const RgbImage& image, const std::filesystem::path& path);

struct Sample {
  RgbImage image;
  BinaryMask mask;
  std::string id;

  /// Throws std::invalid_argument when image and mask sizes differ.
  void validate() const;
};

/// Bilinear (half-pixel centres) resampling.
RgbImage resize_bilinear(const RgbImage& image, std::size_t width,
                         std::size_t height);
SaliencyMap resize_bilinear(const SaliencyMap& map, std::size_t width,
                            std::size_t height);
/// Image resampled bilinearly; mask resampled bilinearly then cut at 0.5.
Sample resize_bilinear(const Sample& sample, std::size_t width,
                       std::size_t height);

Sample hflip(const Sample& sample);
BinaryMask hflip(const BinaryMask& mask);

/// `<root>/images/<id>.ppm`, `<root>/masks/<id>.pgm`, ordered by
/// `<root>/list.txt`.
std::vector<Sample> load_dataset(const std::filesystem::path& root);
void save_dataset(const std::vector<Sample>& samples,
                  const std::filesystem::path& root);
/// Ids from `<root>/list.txt`, in file order.
std::vector<std::string> read_id_list(const std::filesystem::path& root);

enum class ShapeKind { kEllipse, kRectangle, kAnnulus };

ShapeKind parse_shape_kind(std::string_view name);
std::string_view to_string(ShapeKind kind);

struct SyntheticSpec {
  std::size_t count = 250;
  std::size_t size = 64;
  std::uint64_t seed = 1;
  double hole_fraction = 0.7;
  std::vector<ShapeKind> shape_kinds{ShapeKind::kEllipse, ShapeKind::kRectangle,
                                     ShapeKind::kAnnulus};

  void validate() const;
};

/// One salient shape per image on a noisy background. Hollow shapes keep a
/// filled mask while their interior shows background texture. Sample i
/// depends only on (seed, i).
std::vector<Sample> generate_synthetic(const SyntheticSpec& spec);

}  // namespace psg
