#pragma once

#include <cstdint>

namespace psg {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  bool operator==(const Point2&) const = default;
};

double distance(Point2 a, Point2 b);
/// Interior angle at `vertex` of the triangle (vertex, p, q), in radians.
double angle_at(Point2 vertex, Point2 p, Point2 q);

/// A: current prediction, B: ground truth, C: PSG target, all projected to a
/// plane. lambda1 / lambda2 are the step fractions toward B and C.
struct LemmaConfig {
  Point2 a, b, c;
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  /// Rejects configurations outside the regime the lemma addresses:
  /// |BC| >= |AB|, collinear points, or lambda2 >= 1 - lambda1.
  void validate() const;
};

struct CombinedStep {
  Point2 a1;  // step toward B alone
  Point2 a2;  // combined step (parallelogram of the two)
  Point2 a3;  // step toward C alone
};

/// Throws std::invalid_argument when A, B, C are collinear.
CombinedStep combined_step(const LemmaConfig& cfg);

struct LemmaReport {
  std::size_t samples = 0;
  std::size_t violations = 0;        // |A2B| >= |A1B|
  std::size_t angle_violations = 0;  // angle CAB >= angle ACB
  double min_margin = 0.0;           // min over samples of |A1B| - |A2B|

  bool passed() const { return violations == 0 && angle_violations == 0 && min_margin > 0; }
};

/// Samples `n` valid configurations from the seeded stream and checks each.
LemmaReport verify_lemma(std::size_t n, std::uint64_t seed);

}  // namespace psg
