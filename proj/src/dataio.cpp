#include "psg/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace psg {

namespace fs = std::filesystem;

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::vector<std::uint8_t>& bytes, const fs::path& path)
      : bytes_(bytes), path_(path) {}

  std::size_t number(const char* field) {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1u << 24) fail(std::string(field) + " is too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) fail(std::string("expected ") + field);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t end_of_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      fail("missing whitespace after maxval");
    }
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw PnmError(PnmErrorCode::kMalformedHeader,
                   path_.string() + ": malformed header: " + why);
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 2;
};

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Half-pixel-centre source coordinate for output index `o`.
struct Tap {
  std::size_t lo, hi;
  double frac;
};

Tap tap(std::size_t o, std::size_t in, std::size_t out) {
  double src = (static_cast<double>(o) + 0.5) * static_cast<double>(in) /
                   static_cast<double>(out) -
               0.5;
  src = std::max(src, 0.0);
  auto lo = std::min(static_cast<std::size_t>(src), in - 1);
  return {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
}

// Resamples interleaved `channels`-channel data.
std::vector<double> resample(const std::vector<double>& src, std::size_t sw,
                             std::size_t sh, std::size_t channels,
                             std::size_t dw, std::size_t dh) {
  if (sw == 0 || sh == 0 || dw == 0 || dh == 0) {
    throw std::invalid_argument("resize_bilinear: empty size");
  }
  std::vector<double> dst(dw * dh * channels);
  for (std::size_t y = 0; y < dh; ++y) {
    const Tap ty = tap(y, sh, dh);
    for (std::size_t x = 0; x < dw; ++x) {
      const Tap tx = tap(x, sw, dw);
      for (std::size_t c = 0; c < channels; ++c) {
        auto at = [&](std::size_t yy, std::size_t xx) {
          return src[(yy * sw + xx) * channels + c];
        };
        const double top = at(ty.lo, tx.lo) * (1 - tx.frac) + at(ty.lo, tx.hi) * tx.frac;
        const double bot = at(ty.hi, tx.lo) * (1 - tx.frac) + at(ty.hi, tx.hi) * tx.frac;
        dst[(y * dw + x) * channels + c] = top * (1 - ty.frac) + bot * ty.frac;
      }
    }
  }
  return dst;
}

}  // namespace

PnmRaster read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw PnmError(PnmErrorCode::kOpenFailed, "cannot open " + path.string());
  }
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  HeaderReader header(bytes, path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    header.fail("expected P5 or P6 magic");
  }
  PnmRaster r;
  r.channels = bytes[1] == '6' ? 3 : 1;
  r.width = header.number("width");
  r.height = header.number("height");
  if (r.width == 0 || r.height == 0) header.fail("zero extent");
  const std::size_t maxval = header.number("maxval");
  if (maxval != 255) {
    throw PnmError(PnmErrorCode::kUnsupportedMaxval,
                   path.string() + ": maxval " + std::to_string(maxval) +
                       " (only 255 is supported)");
  }
  const std::size_t start = header.end_of_header();
  const std::size_t need = r.width * r.height * r.channels;
  if (bytes.size() < start + need) {
    throw PnmError(PnmErrorCode::kTruncatedPayload,
                   path.string() + ": payload has " +
                       std::to_string(bytes.size() - std::min(start, bytes.size())) +
                       " of " + std::to_string(need) + " bytes");
  }
  r.bytes.assign(bytes.begin() + static_cast<long>(start),
                 bytes.begin() + static_cast<long>(start + need));
  return r;
}

void write_pnm(const PnmRaster& raster, const fs::path& path) {
  if (raster.bytes.size() != raster.width * raster.height * raster.channels ||
      (raster.channels != 1 && raster.channels != 3)) {
    throw std::invalid_argument("write_pnm: inconsistent raster");
  }
  std::ofstream out(path, std::ios::binary);
  const std::string header = std::string(raster.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(raster.width) + " " +
                             std::to_string(raster.height) + "\n255\n";
  out << header;
  out.write(reinterpret_cast<const char*>(raster.bytes.data()),
            static_cast<std::streamsize>(raster.bytes.size()));
  if (!out) {
    throw PnmError(PnmErrorCode::kWriteFailed, "cannot write " + path.string());
  }
}

RgbImage load_rgb(const fs::path& path) {
  const PnmRaster r = read_pnm(path);
  RgbImage img{r.width, r.height, std::vector<double>(r.width * r.height * 3)};
  for (std::size_t i = 0; i < r.width * r.height; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::uint8_t b = r.channels == 3 ? r.bytes[i * 3 + c] : r.bytes[i];
      img.pixels[i * 3 + c] = b / 255.0;
    }
  }
  return img;
}

namespace {

PnmRaster read_gray(const fs::path& path) {
  PnmRaster r = read_pnm(path);
  if (r.channels != 1) {
    throw PnmError(PnmErrorCode::kMalformedHeader,
                   path.string() + ": expected a P5 (grey) file");
  }
  return r;
}

}  // namespace

BinaryMask load_mask(const fs::path& path) {
  const PnmRaster r = read_gray(path);
  std::vector<std::uint8_t> v(r.bytes.size());
  std::transform(r.bytes.begin(), r.bytes.end(), v.begin(),
                 [](std::uint8_t b) { return b >= 128 ? 1 : 0; });
  return BinaryMask(r.width, r.height, std::move(v));
}

SaliencyMap load_saliency(const fs::path& path) {
  const PnmRaster r = read_gray(path);
  std::vector<double> v(r.bytes.size());
  std::transform(r.bytes.begin(), r.bytes.end(), v.begin(),
                 [](std::uint8_t b) { return b / 255.0; });
  return SaliencyMap(r.width, r.height, std::move(v));
}

void save_pnm(const SaliencyMap& map, const fs::path& path) {
  PnmRaster r{map.width(), map.height(), 1, {}};
  for (double v : map.values()) r.bytes.push_back(to_byte(v));
  write_pnm(r, path);
}

void save_pnm(const BinaryMask& mask, const fs::path& path) {
  PnmRaster r{mask.width(), mask.height(), 1, {}};
  for (auto v : mask.values()) r.bytes.push_back(v ? 255 : 0);
  write_pnm(r, path);
}

void save_pnm(const RgbImage& image, const fs::path& path) {
  PnmRaster r{image.width, image.height, 3, {}};
  for (double v : image.pixels) r.bytes.push_back(to_byte(v));
  write_pnm(r, path);
}

void Sample::validate() const {
  if (image.pixels.size() != image.width * image.height * 3) {
    throw std::invalid_argument("sample " + id + ": image buffer size mismatch");
  }
  if (image.width != mask.width() || image.height != mask.height()) {
    throw std::invalid_argument("sample " + id + ": image is " +
                                std::to_string(image.width) + "x" +
                                std::to_string(image.height) + ", mask is " +
                                std::to_string(mask.width()) + "x" +
                                std::to_string(mask.height()));
  }
}

RgbImage resize_bilinear(const RgbImage& image, std::size_t width,
                         std::size_t height) {
  if (image.width == width && image.height == height) return image;
  return {width, height,
          resample(image.pixels, image.width, image.height, 3, width, height)};
}

SaliencyMap resize_bilinear(const SaliencyMap& map, std::size_t width,
                            std::size_t height) {
  if (map.width() == width && map.height() == height) return map;
  const auto v = map.values();
  auto out = resample({v.begin(), v.end()}, map.width(), map.height(), 1, width, height);
  for (auto& x : out) x = std::clamp(x, 0.0, 1.0);
  return SaliencyMap(width, height, std::move(out));
}

Sample resize_bilinear(const Sample& sample, std::size_t width,
                       std::size_t height) {
  sample.validate();
  Sample out{resize_bilinear(sample.image, width, height), BinaryMask(), sample.id};
  const SaliencyMap soft =
      resize_bilinear(SaliencyMap::from_mask(sample.mask), width, height);
  std::vector<std::uint8_t> bits(soft.size());
  std::transform(soft.values().begin(), soft.values().end(), bits.begin(),
                 [](double v) { return v >= 0.5 ? 1 : 0; });
  out.mask = BinaryMask(width, height, std::move(bits));
  return out;
}

BinaryMask hflip(const BinaryMask& mask) {
  BinaryMask out(mask.width(), mask.height());
  for (std::size_t y = 0; y < mask.height(); ++y) {
    for (std::size_t x = 0; x < mask.width(); ++x) {
      out.set(mask.width() - 1 - x, y, mask.at(x, y) != 0);
    }
  }
  return out;
}

Sample hflip(const Sample& sample) {
  sample.validate();
  Sample out = sample;
  const std::size_t w = sample.image.width;
  for (std::size_t y = 0; y < sample.image.height; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        out.image.at(w - 1 - x, y, c) = sample.image.at(x, y, c);
      }
    }
  }
  out.mask = hflip(sample.mask);
  return out;
}

std::vector<std::string> read_id_list(const fs::path& root) {
  std::ifstream in(root / "list.txt");
  if (!in) {
    throw PnmError(PnmErrorCode::kOpenFailed,
                   "cannot open " + (root / "list.txt").string());
  }
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
      line.pop_back();
    }
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

std::vector<Sample> load_dataset(const fs::path& root) {
  std::vector<Sample> out;
  for (const auto& id : read_id_list(root)) {
    Sample s{load_rgb(root / "images" / (id + ".ppm")),
             load_mask(root / "masks" / (id + ".pgm")), id};
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

void save_dataset(const std::vector<Sample>& samples, const fs::path& root) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  std::ofstream list(root / "list.txt");
  for (const auto& s : samples) {
    s.validate();
    save_pnm(s.image, root / "images" / (s.id + ".ppm"));
    save_pnm(s.mask, root / "masks" / (s.id + ".pgm"));
    list << s.id << '\n';
  }
  if (!list) {
    throw PnmError(PnmErrorCode::kWriteFailed,
                   "cannot write " + (root / "list.txt").string());
  }
}

}  // namespace psg
