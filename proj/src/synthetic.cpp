#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "psg/dataio.hpp"
#include "psg/rng.hpp"

namespace psg {

namespace {

constexpr double kMinArea = 0.05;
constexpr double kMaxArea = 0.6;
constexpr double kNoise = 0.05;

struct Geometry {
  ShapeKind kind;
  double cx, cy;
  double rx, ry;      // radii, or half-extents for rectangles
  double inner = 0.0;  // inner/outer ratio of the hollow region, 0 when solid
};

bool inside(ShapeKind kind, double dx, double dy, double rx, double ry) {
  if (rx <= 0 || ry <= 0) return false;
  if (kind == ShapeKind::kRectangle) {
    return std::abs(dx) <= rx && std::abs(dy) <= ry;
  }
  return (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry) <= 1.0;
}

// Smooth per-image pattern plus white noise; the same generator paints the
// background and the interior of hollow shapes.
struct Texture {
  std::array<double, 3> base;
  double fx, fy, phase, amp;

  double at(std::size_t x, std::size_t y, std::size_t c, std::mt19937_64& gen) const {
    const double wave = amp * std::sin(fx * static_cast<double>(x) +
                                       fy * static_cast<double>(y) + phase +
                                       2.0 * static_cast<double>(c));
    return std::clamp(base[c] + wave + kNoise * normal_approx(gen), 0.0, 1.0);
  }
};

Geometry draw_geometry(ShapeKind kind, double size, std::mt19937_64& gen) {
  Geometry g{kind, uniform(gen, 0.3, 0.7) * size, uniform(gen, 0.3, 0.7) * size,
             uniform(gen, 0.14, 0.36) * size, uniform(gen, 0.14, 0.36) * size};
  if (kind == ShapeKind::kRectangle) {
    g.rx *= 0.85;
    g.ry *= 0.85;
  }
  return g;
}

Sample render(std::size_t index, const SyntheticSpec& spec) {
  auto gen = make_stream(spec.seed, kStreamSynthetic, index);
  const double size = static_cast<double>(spec.size);
  const ShapeKind kind =
      spec.shape_kinds[static_cast<std::size_t>(uniform01(gen) *
                                                static_cast<double>(spec.shape_kinds.size()))];
  const bool hollow = kind == ShapeKind::kAnnulus || uniform01(gen) < spec.hole_fraction;

  Texture bg{{}, uniform(gen, 0.1, 0.4), uniform(gen, 0.1, 0.4),
             uniform(gen, 0.0, 6.283185307179586), uniform(gen, 0.02, 0.06)};
  std::array<double, 3> fg{};
  for (std::size_t c = 0; c < 3; ++c) {
    bg.base[c] = uniform(gen, 0.15, 0.85);
    const double offset = uniform(gen, 0.3, 0.5);
    fg[c] = bg.base[c] > 0.5 ? bg.base[c] - offset : bg.base[c] + offset;
  }

  BinaryMask mask(spec.size, spec.size);
  Geometry g{};
  for (int attempt = 0;; ++attempt) {
    g = draw_geometry(kind, size, gen);
    if (hollow) {
      g.inner = kind == ShapeKind::kAnnulus ? uniform(gen, 0.6, 0.8)
                                            : uniform(gen, 0.7, 0.85);
    }
    std::size_t area = 0;
    for (std::size_t y = 0; y < spec.size; ++y) {
      for (std::size_t x = 0; x < spec.size; ++x) {
        const bool on = inside(kind, x + 0.5 - g.cx, y + 0.5 - g.cy, g.rx, g.ry);
        mask.set(x, y, on);
        area += on;
      }
    }
    const double frac = static_cast<double>(area) / (size * size);
    if (frac >= kMinArea && frac <= kMaxArea) break;
    if (attempt == 1000) throw std::logic_error("synthetic shape area never in range");
  }

  RgbImage img{spec.size, spec.size, std::vector<double>(spec.size * spec.size * 3)};
  for (std::size_t y = 0; y < spec.size; ++y) {
    for (std::size_t x = 0; x < spec.size; ++x) {
      const double dx = x + 0.5 - g.cx, dy = y + 0.5 - g.cy;
      const bool rim = mask.at(x, y) &&
                       !inside(kind, dx, dy, g.rx * g.inner, g.ry * g.inner);
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(x, y, c) =
            rim ? std::clamp(fg[c] + kNoise * normal_approx(gen), 0.0, 1.0)
                : bg.at(x, y, c, gen);
      }
    }
  }
  char id[32];
  std::snprintf(id, sizeof id, "syn%05zu", index);
  return {std::move(img), std::move(mask), id};
}

}  // namespace

ShapeKind parse_shape_kind(std::string_view name) {
  if (name == "ellipse") return ShapeKind::kEllipse;
  if (name == "rectangle") return ShapeKind::kRectangle;
  if (name == "annulus") return ShapeKind::kAnnulus;
  throw std::invalid_argument("unknown shape kind '" + std::string(name) + "'");
}

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kEllipse: return "ellipse";
    case ShapeKind::kRectangle: return "rectangle";
    case ShapeKind::kAnnulus: return "annulus";
  }
  return "?";
}

void SyntheticSpec::validate() const {
  if (count < 1) throw std::invalid_argument("data.count must be >= 1");
  if (size == 0 || size % 16 != 0) {
    throw std::invalid_argument("data.size must be a positive multiple of 16");
  }
  if (!(hole_fraction >= 0.0 && hole_fraction <= 1.0)) {
    throw std::invalid_argument("data.hole_fraction must lie in [0,1]");
  }
  if (shape_kinds.empty()) throw std::invalid_argument("data.shapes is empty");
}

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<Sample> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) out.push_back(render(i, spec));
  return out;
}

}  // namespace psg
