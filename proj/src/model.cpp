#include "psg/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "psg/ops.hpp"
#include "psg/rng.hpp"

namespace psg {

namespace {

// Gain sqrt(2) for layers feeding a ReLU, 1 for linear outputs; the uniform
// bound gain * sqrt(3 / fan_in) keeps activation variance roughly constant.
constexpr double kReluGain = 1.4142135623730951;
constexpr double kLinearGain = 1.0;
// Starts the saliency head near 0.5 so early losses are not saturated.
constexpr double kOutputGain = 0.1;

void add_conv(ParameterSet& params, const std::string& name, std::size_t in_c,
              std::size_t out_c, std::size_t k, std::mt19937_64& gen,
              double gain = kReluGain) {
  const std::size_t fan_in = in_c * k * k;
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  std::vector<double> w(out_c * fan_in);
  for (auto& v : w) v = uniform(gen, -bound, bound);
  params.add(name + ".weight", {out_c, in_c, k, k}, std::move(w));
  params.add(name + ".bias", {out_c}, std::vector<double>(out_c, 0.0));
}

void add_fc(ParameterSet& params, const std::string& name, std::size_t in_f,
            std::size_t out_f, std::mt19937_64& gen, double gain = kReluGain) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(in_f));
  std::vector<double> w(out_f * in_f);
  for (auto& v : w) v = uniform(gen, -bound, bound);
  params.add(name + ".weight", {out_f, in_f}, std::move(w));
  params.add(name + ".bias", {out_f}, std::vector<double>(out_f, 0.0));
}

Tensor conv(const Tensor& x, const ParameterSet& params, const std::string& name,
            int padding = 0, int dilation = 1) {
  return conv2d(x, params.at(name + ".weight"), params.at(name + ".bias"), 1,
                padding, dilation);
}

Tensor fc(const Tensor& x, const ParameterSet& params, const std::string& name) {
  return linear(x, params.at(name + ".weight"), params.at(name + ".bias"));
}

std::size_t bam_hidden(std::size_t feature_dim) {
  return std::max<std::size_t>(1, 3 * feature_dim / 4);
}

// Resamples `top` onto the spatial grid of `lateral` and sums.
Tensor merge_top_down(const Tensor& lateral, const Tensor& top) {
  if (top.dim(2) == lateral.dim(2) && top.dim(3) == lateral.dim(3)) {
    return add(lateral, top);
  }
  return add(lateral, bilinear_resize(top, lateral.dim(2), lateral.dim(3)));
}

MsFamConfig decoder_stage_config(const ModelConfig& cfg) {
  MsFamConfig stage = cfg.msfam;
  if (!cfg.msfam_in_decoder) stage.degrade_to_1x1 = true;
  return stage;
}

}  // namespace

void MsFamConfig::validate() const {
  if (feature_dim < 1) throw std::invalid_argument("msfam.feature_dim must be >= 1");
  for (int r : dilation_rates) {
    if (r < 1) throw std::invalid_argument("msfam.dilation_rates must be >= 1");
  }
}

void ModelConfig::validate() const {
  msfam.validate();
  if (encoder_channels.size() != 5) {
    throw std::invalid_argument("model.encoder_channels needs exactly 5 entries");
  }
  if (std::any_of(encoder_channels.begin(), encoder_channels.end(),
                  [](std::size_t c) { return c == 0; })) {
    throw std::invalid_argument("model.encoder_channels entries must be >= 1");
  }
  if (input_size == 0 || input_size % 16 != 0) {
    throw std::invalid_argument("model.input_size must be a positive multiple of 16");
  }
}

Tensor& ParameterSet::add(std::string name, Shape shape,
                          std::vector<double> values) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  entries_.emplace_back(std::move(name),
                        Tensor::from_values(std::move(shape), std::move(values), true));
  return entries_.back().second;
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.first == name; });
}

const Tensor& ParameterSet::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

Tensor& ParameterSet::at(std::string_view name) {
  for (auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& [name, t] : entries_) {
    out.add(name, t.shape(), {t.values().begin(), t.values().end()});
  }
  return out;
}

void init_msfam(ParameterSet& params, const std::string& prefix,
                std::size_t in_channels, const MsFamConfig& cfg,
                std::mt19937_64& gen) {
  const std::size_t f = cfg.feature_dim;
  if (cfg.degrade_to_1x1) {
    add_conv(params, prefix + ".degraded", in_channels, f, 1, gen);
    return;
  }
  add_conv(params, prefix + ".reduce", in_channels, f, 1, gen);
  add_conv(params, prefix + ".adapt", f, f, 3, gen);
  for (int i = 0; i < 3; ++i) {
    add_conv(params, prefix + ".branch" + std::to_string(i + 1), f, f, 3, gen,
             kLinearGain);
  }
  if (cfg.use_bam) {
    add_fc(params, prefix + ".bam.fc1", 3 * f, bam_hidden(f), gen);
    add_fc(params, prefix + ".bam.fc2", bam_hidden(f), 3, gen, kLinearGain);
  }
  add_conv(params, prefix + ".adjust1", f, f, 3, gen);
  add_conv(params, prefix + ".adjust2", f, f, 3, gen);
  if (in_channels != f) {
    add_conv(params, prefix + ".proj", in_channels, f, 1, gen, kLinearGain);
  }
}

Tensor bam_weights(std::span<const Tensor> branches, const ParameterSet& params,
                   const std::string& prefix) {
  if (branches.size() != 3) {
    throw std::invalid_argument("branch attention expects exactly 3 branches");
  }
  std::vector<Tensor> pooled;
  for (const auto& b : branches) pooled.push_back(global_avg_pool(b));
  const Tensor desc = concat(pooled);
  const Tensor hidden = relu(fc(desc, params, prefix + ".bam.fc1"));
  return sigmoid(fc(hidden, params, prefix + ".bam.fc2"));
}

BranchWeights branch_weights(const Tensor& weights, std::size_t sample) {
  if (weights.rank() != 2 || weights.dim(1) != 3 || sample >= weights.dim(0)) {
    throw ShapeError("branch_weights: sample " + std::to_string(sample) +
                     " of " + shape_str(weights.shape()));
  }
  const auto v = weights.values();
  return {v[sample * 3], v[sample * 3 + 1], v[sample * 3 + 2]};
}

Tensor fuse_branches(std::span<const Tensor> branches, const MsFamConfig& cfg,
                     const ParameterSet& params, const std::string& prefix) {
  if (branches.size() != 3) {
    throw std::invalid_argument("MS-FAM fuses exactly 3 branches");
  }
  if (!cfg.use_bam) return add(add(branches[0], branches[1]), branches[2]);
  const Tensor w = bam_weights(branches, params, prefix);
  Tensor acc = scale_per_sample(branches[0], select_column(w, 0));
  acc = add(acc, scale_per_sample(branches[1], select_column(w, 1)));
  return add(acc, scale_per_sample(branches[2], select_column(w, 2)));
}

Tensor msfam_forward(const Tensor& x, const MsFamConfig& cfg,
                     const ParameterSet& params, const std::string& prefix) {
  if (x.rank() != 4) {
    throw ShapeError("msfam_forward: expected B x C x H x W, got " +
                     shape_str(x.shape()));
  }
  if (cfg.degrade_to_1x1) return relu(conv(x, params, prefix + ".degraded"));

  Tensor h = relu(conv(x, params, prefix + ".reduce"));
  h = relu(conv(h, params, prefix + ".adapt", 1));
  std::vector<Tensor> branches;
  for (int i = 0; i < 3; ++i) {
    const int r = cfg.dilation_rates[static_cast<std::size_t>(i)];
    branches.push_back(conv(h, params, prefix + ".branch" + std::to_string(i + 1), r, r));
  }
  Tensor out = fuse_branches(branches, cfg, params, prefix);
  out = relu(conv(out, params, prefix + ".adjust1", 1));
  out = relu(conv(out, params, prefix + ".adjust2", 1));

  Tensor residual = x;
  if (params.contains(prefix + ".proj.weight")) {
    residual = conv(x, params, prefix + ".proj");
  } else if (x.dim(1) != cfg.feature_dim) {
    throw ShapeError("msfam_forward: " + std::to_string(x.dim(1)) +
                     " input channels need a projection to " +
                     std::to_string(cfg.feature_dim));
  }
  return add(out, residual);
}

ParameterSet build_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  auto gen = make_stream(seed, kStreamInit);
  ParameterSet params;
  const auto& ch = cfg.encoder_channels;
  const std::size_t f = cfg.msfam.feature_dim;
  std::size_t in_c = 3;
  for (std::size_t i = 0; i < 5; ++i) {
    const std::string block = "encoder.conv" + std::to_string(i + 1);
    add_conv(params, block + ".0", in_c, ch[i], 3, gen);
    add_conv(params, block + ".1", ch[i], ch[i], 3, gen);
    in_c = ch[i];
  }
  for (std::size_t level = 2; level <= 5; ++level) {
    std::size_t lateral_in = ch[level - 1];
    if (cfg.msfam_in_encoder && level >= 3) {
      init_msfam(params, "encoder.msfam" + std::to_string(level), lateral_in,
                 cfg.msfam, gen);
      lateral_in = f;
    }
    add_conv(params, "encoder.lateral" + std::to_string(level), lateral_in, f, 1, gen,
             kLinearGain);
  }
  const MsFamConfig stage = decoder_stage_config(cfg);
  for (int s = 0; s < 3; ++s) {
    init_msfam(params, "decoder.stage" + std::to_string(s), f, stage, gen);
  }
  add_conv(params, "decoder.head0", f, f, 3, gen);
  add_conv(params, "decoder.head1", f, f, 3, gen);
  add_conv(params, "decoder.out", f, 1, 1, gen, kOutputGain);
  return params;
}

SaliencyModel::SaliencyModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), params_(build_parameters(cfg_, seed)) {}

SaliencyModel::SaliencyModel(ModelConfig cfg, ParameterSet params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  const ParameterSet expected = build_parameters(cfg_, 0);
  if (expected.size() != params_.size()) {
    throw std::invalid_argument("parameter set has " + std::to_string(params_.size()) +
                                " arrays, config expects " +
                                std::to_string(expected.size()));
  }
  for (const auto& [name, t] : expected) {
    if (!params_.contains(name)) throw std::invalid_argument("missing parameter " + name);
    if (params_.at(name).shape() != t.shape()) {
      throw std::invalid_argument("parameter " + name + " has shape " +
                                  shape_str(params_.at(name).shape()) + ", expected " +
                                  shape_str(t.shape()));
    }
  }
}

FeaturePyramid SaliencyModel::encoder_forward(const Tensor& image) const {
  if (image.rank() != 4 || image.dim(1) != 3) {
    throw ShapeError("encoder_forward: expected B x 3 x H x W, got " +
                     shape_str(image.shape()));
  }
  if (image.dim(2) % 16 != 0 || image.dim(3) % 16 != 0) {
    throw ShapeError("encoder_forward: spatial size " + shape_str(image.shape()) +
                     " is not divisible by 16");
  }
  std::array<Tensor, 5> blocks;
  Tensor h = image;
  for (std::size_t i = 0; i < 5; ++i) {
    const std::string block = "encoder.conv" + std::to_string(i + 1);
    h = relu(conv(h, params_, block + ".0", 1));
    h = relu(conv(h, params_, block + ".1", 1));
    if (i < 4) h = maxpool2d(h, 2, 2, 0);
    blocks[i] = h;
  }
  std::array<Tensor, 4> laterals;
  for (std::size_t level = 2; level <= 5; ++level) {
    Tensor path = blocks[level - 1];
    if (cfg_.msfam_in_encoder && level >= 3) {
      path = msfam_forward(path, cfg_.msfam, params_,
                           "encoder.msfam" + std::to_string(level));
    }
    laterals[level - 2] = conv(path, params_, "encoder.lateral" + std::to_string(level));
  }
  FeaturePyramid fp;
  fp.fm5 = laterals[3];
  fp.fm4 = merge_top_down(laterals[2], fp.fm5);
  fp.fm3 = merge_top_down(laterals[1], fp.fm4);
  fp.fm2 = merge_top_down(laterals[0], fp.fm3);
  return fp;
}

Tensor SaliencyModel::decoder_forward(const Tensor& fm2, std::size_t out_h,
                                      std::size_t out_w) const {
  const MsFamConfig stage = decoder_stage_config(cfg_);
  Tensor h = fm2;
  for (int s = 0; s < 3; ++s) {
    h = msfam_forward(h, stage, params_, "decoder.stage" + std::to_string(s));
  }
  h = relu(conv(h, params_, "decoder.head0", 1));
  h = relu(conv(h, params_, "decoder.head1", 1));
  h = sigmoid(conv(h, params_, "decoder.out"));
  return bilinear_resize(h, out_h, out_w);
}

Tensor SaliencyModel::forward(const Tensor& image) const {
  const FeaturePyramid fp = encoder_forward(image);
  return decoder_forward(fp.fm2, image.dim(2), image.dim(3));
}

}  // namespace psg
