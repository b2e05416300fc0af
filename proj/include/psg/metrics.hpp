#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "psg/image.hpp"
#include "psg/morphology.hpp"

namespace psg {

inline constexpr double kBetaSquared = 0.3;
inline constexpr int kLevels = 256;

struct PrPoint {
  int threshold = 0;
  double precision = 0.0;
  double recall = 0.0;
};

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
};

/// Order in which per-image curves are reduced to the dataset maxF.
enum class FAggregation {
  kMeanPrThenF,  // average P and R per threshold, then F
  kMeanF,        // F per image and threshold, then average
};

FAggregation parse_f_aggregation(std::string_view name);
std::string_view to_string(FAggregation agg);

struct MetricsConfig {
  FAggregation aggregation = FAggregation::kMeanPrThenF;
};

struct MetricsReport {
  /// Dataset-averaged, thresholds 0..255.
  std::vector<PrPoint> curve;
  double max_f = 0.0;
  int best_threshold = 0;
  double mae = 0.0;
  std::vector<double> per_image_mae;
  /// Images with empty ground truth, left out of recall averaging.
  std::size_t empty_gt_images = 0;
};

/// round(v * 255).
int quantize(double v);

/// Foreground iff quantize(v) >= t; t in [0, 255].
BinaryMask binarize(const SaliencyMap& pred, int t);
Confusion confusion(const BinaryMask& pred, const BinaryMask& gt);

/// P := 0 when nothing is predicted, R := 0 when gt is empty.
PrPoint pr_at(const SaliencyMap& pred, const BinaryMask& gt, int t);

/// Weighted harmonic mean with beta^2 = 0.3; 0 when p = r = 0.
double f_beta(double p, double r);

double mae(const SaliencyMap& pred, const BinaryMask& gt);

MetricsReport evaluate_dataset(const std::vector<SaliencyMap>& preds,
                               const std::vector<BinaryMask>& gts,
                               const MetricsConfig& cfg = {});

/// Fraction of the eroded gt interior predicted as foreground (v >= threshold).
struct InteriorCoverage {
  std::size_t covered = 0;
  std::size_t total = 0;

  double recall() const {
    return total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total);
  }
  InteriorCoverage& operator+=(const InteriorCoverage& o) {
    covered += o.covered;
    total += o.total;
    return *this;
  }
};

InteriorCoverage interior_coverage(const SaliencyMap& pred, const BinaryMask& gt,
                                   StructuringElement se, double threshold = 0.5);

/// `dataset,maxF,MAE` with six decimals.
void write_metrics_csv(const std::filesystem::path& path, const std::string& dataset,
                       const MetricsReport& report);
/// `threshold,precision,recall`, 256 rows.
void write_pr_curve_csv(const std::filesystem::path& path, const MetricsReport& report);
std::vector<PrPoint> read_pr_curve_csv(const std::filesystem::path& path);

}  // namespace psg
