#include "psg/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace psg {

namespace {

// Suffix counts: fg[t] / bg[t] = gt-foreground / gt-background pixels whose
// quantized prediction is >= t.
struct LevelCounts {
  std::array<std::size_t, kLevels + 1> fg{};
  std::array<std::size_t, kLevels + 1> bg{};
};

LevelCounts level_counts(const SaliencyMap& pred, const BinaryMask& gt) {
  LevelCounts c;
  const auto p = pred.values();
  const auto g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    (g[i] ? c.fg : c.bg)[static_cast<std::size_t>(quantize(p[i]))] += 1;
  }
  for (int t = kLevels - 1; t >= 0; --t) {
    c.fg[t] += c.fg[t + 1];
    c.bg[t] += c.bg[t + 1];
  }
  return c;
}

double precision_of(std::size_t tp, std::size_t fp) {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double recall_of(std::size_t tp, std::size_t positives) {
  return positives == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(positives);
}

void check_threshold(int t) {
  if (t < 0 || t >= kLevels) {
    throw std::out_of_range("threshold " + std::to_string(t) + " outside 0..255");
  }
}

}  // namespace

FAggregation parse_f_aggregation(std::string_view name) {
  if (name == "mean-pr") return FAggregation::kMeanPrThenF;
  if (name == "mean-f") return FAggregation::kMeanF;
  throw std::invalid_argument("unknown aggregation '" + std::string(name) +
                              "' (mean-pr or mean-f)");
}

std::string_view to_string(FAggregation agg) {
  return agg == FAggregation::kMeanF ? "mean-f" : "mean-pr";
}

int quantize(double v) {
  return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

BinaryMask binarize(const SaliencyMap& pred, int t) {
  check_threshold(t);
  BinaryMask out(pred.width(), pred.height());
  for (std::size_t y = 0; y < pred.height(); ++y) {
    for (std::size_t x = 0; x < pred.width(); ++x) {
      out.set(x, y, quantize(pred.at(x, y)) >= t);
    }
  }
  return out;
}

Confusion confusion(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_size(pred, gt, "confusion");
  Confusion c;
  const auto p = pred.values();
  const auto g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] && g[i]) ++c.tp;
    else if (p[i]) ++c.fp;
    else if (g[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

PrPoint pr_at(const SaliencyMap& pred, const BinaryMask& gt, int t) {
  require_same_size(pred, gt, "pr_at");
  const Confusion c = confusion(binarize(pred, t), gt);
  return {t, precision_of(c.tp, c.fp), recall_of(c.tp, c.tp + c.fn)};
}

double f_beta(double p, double r) {
  const double denom = kBetaSquared * p + r;
  if (denom == 0.0) return 0.0;
  return (1.0 + kBetaSquared) * p * r / denom;
}

double mae(const SaliencyMap& pred, const BinaryMask& gt) {
  require_same_size(pred, gt, "mae");
  if (pred.size() == 0) return 0.0;
  const auto p = pred.values();
  const auto g = gt.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - g[i]);
  return acc / static_cast<double>(p.size());
}

MetricsReport evaluate_dataset(const std::vector<SaliencyMap>& preds,
                               const std::vector<BinaryMask>& gts,
                               const MetricsConfig& cfg) {
  if (preds.size() != gts.size()) {
    throw std::invalid_argument("evaluate_dataset: " + std::to_string(preds.size()) +
                                " predictions for " + std::to_string(gts.size()) +
                                " ground truths");
  }
  if (preds.empty()) throw std::invalid_argument("evaluate_dataset: empty dataset");

  MetricsReport report;
  std::array<double, kLevels> p_sum{}, r_sum{}, f_sum{};
  std::size_t with_gt = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    require_same_size(preds[i], gts[i], "evaluate_dataset");
    report.per_image_mae.push_back(mae(preds[i], gts[i]));
    const LevelCounts c = level_counts(preds[i], gts[i]);
    const std::size_t positives = c.fg[0];
    if (positives == 0) ++report.empty_gt_images;
    else ++with_gt;
    for (int t = 0; t < kLevels; ++t) {
      const double p = precision_of(c.fg[t], c.bg[t]);
      p_sum[t] += p;
      if (positives == 0) continue;
      const double r = recall_of(c.fg[t], positives);
      r_sum[t] += r;
      f_sum[t] += f_beta(p, r);
    }
  }

  const double n = static_cast<double>(preds.size());
  report.max_f = -1.0;
  for (int t = 0; t < kLevels; ++t) {
    const double p = p_sum[t] / n;
    const double r = with_gt == 0 ? 0.0 : r_sum[t] / static_cast<double>(with_gt);
    report.curve.push_back({t, p, r});
    const double f = cfg.aggregation == FAggregation::kMeanF
                         ? (with_gt == 0 ? 0.0 : f_sum[t] / static_cast<double>(with_gt))
                         : f_beta(p, r);
    if (f > report.max_f) {
      report.max_f = f;
      report.best_threshold = t;
    }
  }
  double mae_sum = 0.0;
  for (double m : report.per_image_mae) mae_sum += m;
  report.mae = mae_sum / n;
  return report;
}

InteriorCoverage interior_coverage(const SaliencyMap& pred, const BinaryMask& gt,
                                   StructuringElement se, double threshold) {
  require_same_size(pred, gt, "interior_coverage");
  const BinaryMask interior = erode(gt, se);
  InteriorCoverage c;
  for (std::size_t y = 0; y < gt.height(); ++y) {
    for (std::size_t x = 0; x < gt.width(); ++x) {
      if (!interior.at(x, y)) continue;
      ++c.total;
      if (pred.at(x, y) >= threshold) ++c.covered;
    }
  }
  return c;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::string& dataset,
                       const MetricsReport& report) {
  auto out = open_csv(path);
  out << "dataset,maxF,MAE\n"
      << dataset << ',' << fixed6(report.max_f) << ',' << fixed6(report.mae) << '\n';
}

void write_pr_curve_csv(const std::filesystem::path& path, const MetricsReport& report) {
  auto out = open_csv(path);
  out << "threshold,precision,recall\n";
  for (const auto& pt : report.curve) {
    out << pt.threshold << ',' << fixed6(pt.precision) << ',' << fixed6(pt.recall) << '\n';
  }
}

std::vector<PrPoint> read_pr_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("threshold,precision,recall", 0) != 0) {
    throw std::runtime_error(path.string() + ": missing 'threshold,precision,recall' header");
  }
  std::vector<PrPoint> pts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    PrPoint pt;
    char c1 = 0, c2 = 0;
    if (!(row >> pt.threshold >> c1 >> pt.precision >> c2 >> pt.recall) || c1 != ',' ||
        c2 != ',') {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected threshold,precision,recall");
    }
    pts.push_back(pt);
  }
  return pts;
}

}  // namespace psg
