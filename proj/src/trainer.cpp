#include "psg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "psg/config.hpp"
#include "psg/convert.hpp"
#include "psg/metrics.hpp"
#include "psg/morphology.hpp"
#include "psg/rng.hpp"

namespace psg {

namespace {

// Storage precision of checkpoints. Snapping the live state to it after every
// epoch makes a resumed run continue from exactly the state it would have had.
void snap_to_float(std::span<double> values) {
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

void snap_state(ParameterSet& params, OptimizerState& opt) {
  for (auto& [name, t] : params) snap_to_float(t.mutable_values());
  for (auto& m : opt.m) snap_to_float(m);
  for (auto& v : opt.v) snap_to_float(v);
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed,
                                        std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto gen = make_stream(seed, kStreamShuffle, epoch);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(gen) * static_cast<double>(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

bool flip_coin(std::uint64_t seed, std::size_t epoch, std::size_t sample,
               double probability) {
  auto gen = make_stream(seed, kStreamFlip, (static_cast<std::uint64_t>(epoch) << 32) | sample);
  return uniform01(gen) < probability;
}

// Mirrors every plane of a B x C x H x W tensor.
std::vector<double> flip_planes(std::span<const double> v, std::size_t w) {
  std::vector<double> out(v.size());
  for (std::size_t row = 0; row < v.size() / w; ++row) {
    for (std::size_t x = 0; x < w; ++x) out[row * w + x] = v[row * w + (w - 1 - x)];
  }
  return out;
}

std::vector<Sample> at_model_size(const std::vector<Sample>& samples, std::size_t size) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    s.validate();
    out.push_back(resize_bilinear(s, size, size));
  }
  return out;
}

std::string fmt_value(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train.lr must be > 0");
  if (!(lr_decay_factor > 0.0)) throw std::invalid_argument("train.lr_decay_factor must be > 0");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw std::invalid_argument("train.flip_probability must lie in [0,1]");
  }
  loss.validate();
  model.validate();
}

OptimizerState OptimizerState::zeros_like(const ParameterSet& params) {
  OptimizerState s;
  for (const auto& [name, t] : params) {
    s.m.emplace_back(t.numel(), 0.0);
    s.v.emplace_back(t.numel(), 0.0);
  }
  return s;
}

void adam_step(ParameterSet& params, OptimizerState& state, double lr,
               const AdamHyper& h) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state has " +
                                std::to_string(state.m.size()) + " slots for " +
                                std::to_string(params.size()) + " parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  std::size_t k = 0;
  for (auto& [name, p] : params) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    ++k;
    if (m.size() != p.numel() || v.size() != p.numel()) {
      throw std::invalid_argument("adam_step: moment size mismatch for " + name);
    }
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.eps);
    }
  }
}

std::size_t decay_epoch(std::size_t epochs) { return (epochs + 1) / 2; }

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  return epoch < decay_epoch(cfg.epochs) ? cfg.lr : cfg.lr * cfg.lr_decay_factor;
}

std::string log_preamble(const TrainConfig& cfg) {
  return "# seed " + std::to_string(cfg.seed) + ", " + std::to_string(cfg.epochs) +
         " epochs, batch " + std::to_string(cfg.batch_size) + ", loss " +
         std::string(to_string(cfg.loss.main_kind)) +
         (cfg.loss.use_psg ? " + psg (alpha " + fmt_general(cfg.loss.alpha) + ", kernel " +
                                 std::to_string(cfg.loss.psg_kernel) + ", refresh " +
                                 std::string(to_string(cfg.loss.refresh)) + ")"
                           : std::string()) +
         "\n# lr decays by " + fmt_general(cfg.lr_decay_factor) + " from epoch " +
         std::to_string(decay_epoch(cfg.epochs)) + " (0-indexed)\n" +
         "epoch,lr,main_loss,aux_loss,overall,val_maxF,val_MAE\n";
}

std::string format_log_line(const EpochRecord& r) {
  char lr[32];
  std::snprintf(lr, sizeof lr, "%.6g", r.lr);
  return std::to_string(r.epoch) + "," + lr + "," + fmt_value(r.main) + "," +
         fmt_value(r.aux) + "," + fmt_value(r.overall) + "," + fmt_value(r.val_max_f) +
         "," + fmt_value(r.val_mae) + "\n";
}

std::vector<SaliencyMap> predict(const SaliencyModel& model,
                                 const std::vector<RgbImage>& images,
                                 std::size_t batch_size) {
  const std::size_t size = model.config().input_size;
  std::vector<SaliencyMap> out;
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t end = std::min(images.size(), start + batch_size);
    std::vector<RgbImage> batch;
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(resize_bilinear(images[i], size, size));
    }
    const Tensor pred = detach(model.forward(stack_images(batch)));
    for (std::size_t b = 0; b < batch.size(); ++b) out.push_back(to_saliency_map(pred, b));
  }
  return out;
}

std::vector<SaliencyMap> predict_at_source_size(const SaliencyModel& model,
                                                const std::vector<Sample>& samples,
                                                std::size_t batch_size) {
  std::vector<RgbImage> images;
  for (const auto& s : samples) images.push_back(s.image);
  auto maps = predict(model, images, batch_size);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    maps[i] = resize_bilinear(maps[i], samples[i].image.width, samples[i].image.height);
  }
  return maps;
}

TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& dataset,
                  const TrainOptions& options) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  const std::size_t size = cfg.model.input_size;
  const std::vector<Sample> data = at_model_size(dataset, size);
  const std::size_t n = data.size();

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.seed = cfg.seed;
  ckpt.config_text = options.config_text.empty()
                         ? to_config_text(RunConfig{cfg, {}, 50, {}, "synthetic"})
                         : options.config_text;
  std::size_t first_epoch = 0;
  SaliencyModel model = [&] {
    if (!options.resume) return SaliencyModel(cfg.model, cfg.seed);
    return SaliencyModel(cfg.model, options.resume->params.clone());
  }();
  OptimizerState opt = OptimizerState::zeros_like(model.params());
  if (options.resume) {
    if (options.resume->epoch > cfg.epochs) {
      throw std::invalid_argument("train: checkpoint is past the configured epochs");
    }
    opt = options.resume->optimizer;
    if (opt.m.size() != model.params().size()) {
      throw std::invalid_argument("train: checkpoint optimizer state does not match the model");
    }
    first_epoch = options.resume->epoch;
    ckpt.log_text = options.resume->log_text;
  } else {
    ckpt.log_text = log_preamble(cfg);
  }

  std::vector<BinaryMask> masks;
  std::vector<RgbImage> images;
  for (const auto& s : data) {
    masks.push_back(s.mask);
    images.push_back(s.image);
  }
  const StructuringElement se(cfg.loss.psg_kernel);
  const bool per_epoch_targets =
      cfg.loss.use_psg && cfg.loss.refresh == TargetRefresh::kPerEpoch;
  const std::size_t last = options.stop_after ? std::min(options.stop_after, cfg.epochs)
                                              : cfg.epochs;

  for (std::size_t epoch = first_epoch; epoch < last; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    std::vector<SaliencyMap> epoch_targets;
    if (per_epoch_targets) {
      const auto preds = predict(model, images, cfg.batch_size);
      for (std::size_t i = 0; i < n; ++i) {
        epoch_targets.push_back(psg_target(preds[i], masks[i], se));
      }
    }

    const auto order = shuffled_order(n, cfg.seed, epoch);
    double main_sum = 0.0, aux_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      std::vector<RgbImage> batch_images;
      std::vector<BinaryMask> batch_masks;
      std::vector<double> batch_targets;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const bool flip = flip_coin(cfg.seed, epoch, i, cfg.flip_probability);
        const Sample s = flip ? hflip(data[i]) : data[i];
        batch_images.push_back(s.image);
        batch_masks.push_back(s.mask);
        if (per_epoch_targets) {
          const auto v = epoch_targets[i].values();
          const auto t = flip ? flip_planes(v, size) : std::vector<double>(v.begin(), v.end());
          batch_targets.insert(batch_targets.end(), t.begin(), t.end());
        }
      }
      const std::size_t b = end - start;
      const Tensor fixed = per_epoch_targets
                               ? Tensor::from_values({b, 1, size, size}, batch_targets)
                               : Tensor();
      const Tensor pred = model.forward(stack_images(batch_images));
      const LossTerms terms = overall(pred, stack_masks(batch_masks), cfg.loss, fixed);
      model.params().zero_grad();
      backward(terms.overall);
      adam_step(model.params(), opt, lr);
      const LossBreakdown lb = terms.breakdown(cfg.loss.alpha);
      main_sum += lb.main * static_cast<double>(b);
      aux_sum += lb.aux * static_cast<double>(b);
    }
    snap_state(model.params(), opt);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.main = main_sum / static_cast<double>(n);
    rec.aux = aux_sum / static_cast<double>(n);
    rec.overall = rec.main + cfg.loss.alpha * rec.aux;
    rec.val_max_f = rec.val_mae = std::numeric_limits<double>::quiet_NaN();
    const bool evaluate = options.validation && !options.validation->empty() &&
                          cfg.eval_every > 0 &&
                          ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs);
    if (evaluate) {
      const auto preds = predict_at_source_size(model, *options.validation, cfg.batch_size);
      std::vector<BinaryMask> gts;
      for (const auto& s : *options.validation) gts.push_back(s.mask);
      const MetricsReport report = evaluate_dataset(preds, gts);
      rec.val_max_f = report.max_f;
      rec.val_mae = report.mae;
    }
    if (!options.probe_dir.empty()) {
      std::filesystem::create_directories(options.probe_dir);
      const SaliencyMap probe = predict(model, {images.front()}, 1).front();
      char stem[64];
      std::snprintf(stem, sizeof stem, "epoch%03zu", epoch);
      save_pnm(probe, options.probe_dir / (std::string("pred_") + stem + ".pgm"));
      save_pnm(psg_target(probe, masks.front(), se),
               options.probe_dir / (std::string("pgt_") + stem + ".pgm"));
    }
    ckpt.log_text += format_log_line(rec);
    ckpt.epoch = epoch + 1;
    result.history.push_back(rec);
    if (options.on_epoch) {
      ckpt.params = model.params().clone();
      ckpt.optimizer = opt;
      options.on_epoch(rec, ckpt);
    }
  }
  ckpt.epoch = std::max<std::uint64_t>(ckpt.epoch, first_epoch);
  ckpt.params = model.params().clone();
  ckpt.optimizer = std::move(opt);
  return result;
}

}  // namespace psg
