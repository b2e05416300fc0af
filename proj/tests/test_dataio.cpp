#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "psg/dataio.hpp"

using namespace psg;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            (std::string("psg_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_bytes(const fs::path& p, const std::string& header, std::vector<std::uint8_t> payload) {
  std::ofstream out(p, std::ios::binary);
  out << header;
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
}

PnmErrorCode error_code_of(const fs::path& p) {
  try {
    read_pnm(p);
  } catch (const PnmError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << p;
  return PnmErrorCode::kWriteFailed;
}

RgbImage ramp(std::size_t w, std::size_t h) {
  RgbImage img{w, h, std::vector<double>(w * h * 3)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(x, y, c) = (static_cast<double>(x) + 0.5 * static_cast<double>(y) +
                           0.25 * static_cast<double>(c)) /
                          static_cast<double>(w + h);
      }
  return img;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a.values()[i] & b.values()[i];
    uni += a.values()[i] | b.values()[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TEST(Pnm, AllWhiteGreyIsFullMask) {
  TempDir dir;
  write_bytes(dir.path() / "m.pgm", "P5\n3 2\n255\n", std::vector<std::uint8_t>(6, 255));
  const BinaryMask m = load_mask(dir.path() / "m.pgm");
  EXPECT_EQ(m.width(), 3u);
  EXPECT_EQ(m.count(), 6u);
}

TEST(Pnm, KnownColourBytes) {
  TempDir dir;
  const std::vector<std::uint8_t> px{0, 51, 102, 153, 204, 255, 1, 2, 3, 128, 127, 254};
  write_bytes(dir.path() / "c.ppm", "P6\n# comment line\n2 2\n255\n", px);
  const RgbImage img = load_rgb(dir.path() / "c.ppm");
  ASSERT_EQ(img.pixels.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(img.pixels[i], px[i] / 255.0);
}

TEST(Pnm, MaskThresholdAt128AndGreyAsRgb) {
  TempDir dir;
  write_bytes(dir.path() / "g.pgm", "P5 4 1 255\n", {0, 127, 128, 255});
  const BinaryMask m = load_mask(dir.path() / "g.pgm");
  EXPECT_EQ(std::vector<std::uint8_t>(m.values().begin(), m.values().end()),
            (std::vector<std::uint8_t>{0, 0, 1, 1}));
  const RgbImage rgb = load_rgb(dir.path() / "g.pgm");
  EXPECT_DOUBLE_EQ(rgb.at(1, 0, 2), 127 / 255.0);
  EXPECT_DOUBLE_EQ(rgb.at(1, 0, 0), 127 / 255.0);
}

TEST(Pnm, DistinctErrors) {
  TempDir dir;
  write_bytes(dir.path() / "short.pgm", "P5\n4 4\n255\n", std::vector<std::uint8_t>(10, 0));
  write_bytes(dir.path() / "magic.pgm", "P2\n1 1\n255\n", {0});
  write_bytes(dir.path() / "dims.pgm", "P5\nx 1\n255\n", {0});
  write_bytes(dir.path() / "deep.pgm", "P5\n1 1\n65535\n", {0, 0});
  EXPECT_EQ(error_code_of(dir.path() / "short.pgm"), PnmErrorCode::kTruncatedPayload);
  EXPECT_EQ(error_code_of(dir.path() / "magic.pgm"), PnmErrorCode::kMalformedHeader);
  EXPECT_EQ(error_code_of(dir.path() / "dims.pgm"), PnmErrorCode::kMalformedHeader);
  EXPECT_EQ(error_code_of(dir.path() / "deep.pgm"), PnmErrorCode::kUnsupportedMaxval);
  EXPECT_EQ(error_code_of(dir.path() / "missing.pgm"), PnmErrorCode::kOpenFailed);
  EXPECT_THROW(load_mask(dir.path() / "short.pgm"), PnmError);
}

TEST(Pnm, SaliencyRoundTripWithinQuantisation) {
  TempDir dir;
  std::vector<double> v(7 * 5);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::fmod(0.137 * static_cast<double>(i), 1.0);
  const SaliencyMap map(7, 5, v);
  save_pnm(map, dir.path() / "s.pgm");
  const SaliencyMap back = load_saliency(dir.path() / "s.pgm");
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_LE(std::abs(back.values()[i] - v[i]), 0.5 / 255.0 + 1e-12);
  }
  save_pnm(back, dir.path() / "t.pgm");
  EXPECT_EQ(load_saliency(dir.path() / "t.pgm"), back);
}

TEST(Pnm, RgbAndMaskRoundTrip) {
  TempDir dir;
  RgbImage img = ramp(5, 4);
  for (auto& p : img.pixels) p = std::round(p * 255.0) / 255.0;
  save_pnm(img, dir.path() / "i.ppm");
  const RgbImage back = load_rgb(dir.path() / "i.ppm");
  for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_DOUBLE_EQ(back.pixels[i], img.pixels[i]);
  BinaryMask m(3, 3);
  m.set(0, 1, true);
  m.set(2, 2, true);
  save_pnm(m, dir.path() / "m.pgm");
  EXPECT_EQ(load_mask(dir.path() / "m.pgm"), m);
}

TEST(Resize, IdentityAndConstant) {
  const RgbImage img = ramp(6, 5);
  const RgbImage same = resize_bilinear(img, 6, 5);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_NEAR(same.pixels[i], img.pixels[i], 1e-15);
  RgbImage flat{4, 4, std::vector<double>(48, 0.3)};
  for (double v : resize_bilinear(flat, 9, 7).pixels) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(Resize, RampSurvivesDownAndUp) {
  const RgbImage img = ramp(64, 64);
  const RgbImage back = resize_bilinear(resize_bilinear(img, 16, 16), 64, 64);
  double err = 0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) err += std::abs(back.pixels[i] - img.pixels[i]);
  EXPECT_LT(err / static_cast<double>(img.pixels.size()), 0.05);
}

TEST(Resize, SampleMaskStaysBinary) {
  Sample s{ramp(8, 8), BinaryMask(8, 8), "x"};
  for (std::size_t y = 2; y < 6; ++y)
    for (std::size_t x = 2; x < 6; ++x) s.mask.set(x, y, true);
  const Sample big = resize_bilinear(s, 16, 16);
  EXPECT_EQ(big.mask.width(), 16u);
  EXPECT_EQ(big.image.width, 16u);
  EXPECT_EQ(big.mask.count(), 64u);
  EXPECT_EQ(big.id, "x");
}

TEST(Hflip, SwapsPixelsAndIsAnInvolution) {
  Sample s{RgbImage{2, 1, {0.1, 0.2, 0.3, 0.7, 0.8, 0.9}}, BinaryMask(2, 1), "a"};
  s.mask.set(0, 0, true);
  const Sample f = hflip(s);
  EXPECT_EQ(f.image.pixels, (std::vector<double>{0.7, 0.8, 0.9, 0.1, 0.2, 0.3}));
  EXPECT_EQ(f.mask.at(1, 0), 1);
  EXPECT_EQ(f.mask.at(0, 0), 0);
  const Sample back = hflip(f);
  EXPECT_EQ(back.image.pixels, s.image.pixels);
  EXPECT_EQ(back.mask, s.mask);
}

TEST(Hflip, KeepsImageAndMaskAligned) {
  SyntheticSpec spec;
  spec.count = 20;
  for (const Sample& s : generate_synthetic(spec)) {
    const Sample f = hflip(s);
    // Foreground colour statistics are unchanged when both move together.
    double in_a = 0, in_b = 0;
    for (std::size_t y = 0; y < s.mask.height(); ++y)
      for (std::size_t x = 0; x < s.mask.width(); ++x) {
        if (s.mask.at(x, y)) in_a += s.image.at(x, y, 0);
        if (f.mask.at(x, y)) in_b += f.image.at(x, y, 0);
      }
    EXPECT_NEAR(in_a, in_b, 1e-9);
    EXPECT_DOUBLE_EQ(iou(hflip(f.mask), s.mask), 1.0);
  }
}

TEST(Dataset, SaveLoadRoundTripAndOrder) {
  TempDir dir;
  SyntheticSpec spec;
  spec.count = 5;
  spec.size = 32;
  const auto samples = generate_synthetic(spec);
  save_dataset(samples, dir.path());
  EXPECT_EQ(read_id_list(dir.path()),
            (std::vector<std::string>{"syn00000", "syn00001", "syn00002", "syn00003", "syn00004"}));
  const auto loaded = load_dataset(dir.path());
  ASSERT_EQ(loaded.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(loaded[i].id, samples[i].id);
    EXPECT_EQ(loaded[i].mask, samples[i].mask);
    for (std::size_t k = 0; k < samples[i].image.pixels.size(); ++k) {
      EXPECT_LE(std::abs(loaded[i].image.pixels[k] - samples[i].image.pixels[k]), 0.5 / 255 + 1e-12);
    }
  }
}

TEST(Dataset, MissingMaskIsAnError) {
  TempDir dir;
  SyntheticSpec spec;
  spec.count = 2;
  spec.size = 16;
  save_dataset(generate_synthetic(spec), dir.path());
  fs::remove(dir.path() / "masks" / "syn00001.pgm");
  EXPECT_THROW(load_dataset(dir.path()), PnmError);
}

TEST(Synthetic, DeterministicAndPrefixStable) {
  SyntheticSpec spec;
  spec.count = 12;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  spec.count = 4;
  const auto prefix = generate_synthetic(spec);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(a[i].image.pixels, b[i].image.pixels);
    EXPECT_EQ(a[i].mask, b[i].mask);
  }
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(prefix[i].image.pixels, a[i].image.pixels);
  spec.seed = 2;
  EXPECT_NE(generate_synthetic(spec)[0].image.pixels, a[0].image.pixels);
}

TEST(Synthetic, ValuesAndSizes) {
  SyntheticSpec spec;
  spec.count = 10;
  spec.size = 48;
  for (const Sample& s : generate_synthetic(spec)) {
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(s.image.width, 48u);
    for (double v : s.image.pixels) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Synthetic, AreaFractionOverManySeeds) {
  SyntheticSpec spec;
  spec.count = 1;
  spec.size = 32;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    spec.seed = seed;
    const Sample s = generate_synthetic(spec)[0];
    const double frac = static_cast<double>(s.mask.count()) / static_cast<double>(s.mask.size());
    ASSERT_GE(frac, 0.05) << seed;
    ASSERT_LE(frac, 0.6) << seed;
  }
}

TEST(Synthetic, AnnulusInteriorLooksLikeBackground) {
  // The mask is filled but the hole shows background texture: the mean colour
  // around the mask centroid sits within one background standard deviation of
  // the background mean, per channel.
  SyntheticSpec spec;
  spec.count = 40;
  spec.shape_kinds = {ShapeKind::kAnnulus};
  std::size_t matched = 0, channels = 0;
  for (const Sample& s : generate_synthetic(spec)) {
    double cx = 0, cy = 0;
    for (std::size_t y = 0; y < s.mask.height(); ++y)
      for (std::size_t x = 0; x < s.mask.width(); ++x)
        if (s.mask.at(x, y)) {
          cx += static_cast<double>(x);
          cy += static_cast<double>(y);
        }
    const auto n = static_cast<double>(s.mask.count());
    const auto px = static_cast<std::size_t>(std::lround(cx / n));
    const auto py = static_cast<std::size_t>(std::lround(cy / n));
    ASSERT_EQ(s.mask.at(px, py), 1);
    for (std::size_t c = 0; c < 3; ++c) {
      double sum = 0, sq = 0, count = 0;
      for (std::size_t y = 0; y < s.mask.height(); ++y)
        for (std::size_t x = 0; x < s.mask.width(); ++x)
          if (!s.mask.at(x, y)) {
            sum += s.image.at(x, y, c);
            sq += s.image.at(x, y, c) * s.image.at(x, y, c);
            ++count;
          }
      const double mu = sum / count, sigma = std::sqrt(sq / count - mu * mu);
      double patch = 0;
      for (std::size_t y = py - 1; y <= py + 1; ++y)
        for (std::size_t x = px - 1; x <= px + 1; ++x) patch += s.image.at(x, y, c) / 9.0;
      matched += std::abs(patch - mu) <= sigma;
      ++channels;
    }
  }
  EXPECT_GE(static_cast<double>(matched) / static_cast<double>(channels), 0.9)
      << matched << " of " << channels;
}

TEST(Synthetic, SpecValidationAndShapeNames) {
  SyntheticSpec spec;
  spec.hole_fraction = 1.5;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = {};
  spec.shape_kinds.clear();
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  for (auto name : {"ellipse", "rectangle", "annulus"}) {
    EXPECT_EQ(to_string(parse_shape_kind(name)), name);
  }
  EXPECT_THROW(parse_shape_kind("star"), std::invalid_argument);
}
