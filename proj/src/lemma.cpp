#include "psg/lemma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "psg/rng.hpp"

namespace psg {

namespace {

constexpr double kMinArea = 1e-9;

double triangle_area(Point2 a, Point2 b, Point2 c) {
  const Point2 u = b - a, v = c - a;
  return 0.5 * std::abs(u.x * v.y - u.y * v.x);
}

Point2 random_point(std::mt19937_64& gen) {
  return {uniform(gen, -1.0, 1.0), uniform(gen, -1.0, 1.0)};
}

LemmaConfig sample_config(std::mt19937_64& gen) {
  while (true) {
    LemmaConfig cfg{random_point(gen), random_point(gen), random_point(gen),
                    uniform01(gen), 0.0};
    cfg.lambda2 = uniform01(gen) * (1.0 - cfg.lambda1);
    if (cfg.lambda1 <= 0.0 || cfg.lambda2 <= 0.0) continue;
    if (distance(cfg.b, cfg.c) >= distance(cfg.a, cfg.b)) continue;
    if (triangle_area(cfg.a, cfg.b, cfg.c) <= kMinArea) continue;
    return cfg;
  }
}

}  // namespace

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double angle_at(Point2 vertex, Point2 p, Point2 q) {
  const Point2 u = p - vertex, v = q - vertex;
  return std::atan2(std::abs(u.x * v.y - u.y * v.x), u.x * v.x + u.y * v.y);
}

void LemmaConfig::validate() const {
  if (!(distance(b, c) < distance(a, b))) {
    throw std::invalid_argument("lemma: requires |BC| < |AB|");
  }
  if (triangle_area(a, b, c) <= kMinArea) {
    throw std::invalid_argument("lemma: A, B, C are collinear");
  }
  if (!(lambda1 > 0.0 && lambda1 < 1.0 && lambda2 > 0.0 && lambda2 < 1.0)) {
    throw std::invalid_argument("lemma: step fractions must lie in (0,1)");
  }
  if (!(lambda2 < 1.0 - lambda1)) {
    throw std::invalid_argument("lemma: requires lambda2 < 1 - lambda1");
  }
}

CombinedStep combined_step(const LemmaConfig& cfg) {
  if (triangle_area(cfg.a, cfg.b, cfg.c) <= kMinArea) {
    throw std::invalid_argument("combined_step: A, B, C are collinear");
  }
  CombinedStep s;
  s.a1 = cfg.a + cfg.lambda1 * (cfg.b - cfg.a);
  s.a3 = cfg.a + cfg.lambda2 * (cfg.c - cfg.a);
  s.a2 = s.a1 + (s.a3 - cfg.a);
  return s;
}

LemmaReport verify_lemma(std::size_t n, std::uint64_t seed) {
  auto gen = make_stream(seed, kStreamLemma);
  LemmaReport r;
  r.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const LemmaConfig cfg = sample_config(gen);
    cfg.validate();
    const CombinedStep s = combined_step(cfg);
    const double margin = distance(s.a1, cfg.b) - distance(s.a2, cfg.b);
    if (!(margin > 0.0)) ++r.violations;
    if (!(angle_at(cfg.a, cfg.c, cfg.b) < angle_at(cfg.c, cfg.a, cfg.b))) {
      ++r.angle_violations;
    }
    r.min_margin = std::min(r.min_margin, margin);
    ++r.samples;
  }
  if (n == 0) r.min_margin = 0.0;
  return r;
}

}  // namespace psg
