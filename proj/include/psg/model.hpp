#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "psg/tensor.hpp"

namespace psg {

/// Multi-scale feature aggregation module settings.
struct MsFamConfig {
  std::size_t feature_dim = 64;
  std::array<int, 3> dilation_rates{1, 2, 4};
  /// Branch-wise attention; when off, branches are summed with unit weight.
  bool use_bam = true;
  /// Replace every MS-FAM by a single 1x1 conv + ReLU.
  bool degrade_to_1x1 = false;

  void validate() const;
};

struct ModelConfig {
  std::size_t input_size = 64;
  std::vector<std::size_t> encoder_channels{16, 32, 48, 64, 64};
  bool msfam_in_encoder = true;
  /// When off the decoder stages are 1x1 conv + ReLU (the basic network).
  bool msfam_in_decoder = true;
  MsFamConfig msfam;

  void validate() const;
};

/// Named parameter arrays in creation order.
class ParameterSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  /// Registers a leaf tensor with requires_grad set.
  Tensor& add(std::string name, Shape shape, std::vector<double> values);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  std::vector<Entry>::const_iterator begin() const { return entries_.begin(); }
  std::vector<Entry>::const_iterator end() const { return entries_.end(); }
  std::vector<Entry>::iterator begin() { return entries_.begin(); }
  std::vector<Entry>::iterator end() { return entries_.end(); }

  void zero_grad();
  /// Deep copy: new leaves with the same names, shapes and values.
  ParameterSet clone() const;

 private:
  std::vector<Entry> entries_;
};

/// Per-sample attention scalars, each strictly inside (0,1).
struct BranchWeights {
  double w1 = 0.0;
  double w2 = 0.0;
  double w3 = 0.0;
};

/// Creates parameters for one MS-FAM taking `in_channels` inputs.
void init_msfam(ParameterSet& params, const std::string& prefix,
                std::size_t in_channels, const MsFamConfig& cfg,
                std::mt19937_64& gen);

/// Branch-wise attention: GAP each branch, concat, FC (ratio 4), ReLU, FC to
/// 3, sigmoid. Returns B x 3.
Tensor bam_weights(std::span<const Tensor> branches, const ParameterSet& params,
                   const std::string& prefix);
BranchWeights branch_weights(const Tensor& weights, std::size_t sample);

/// Attention-weighted (or plain) sum of the three dilated branches.
Tensor fuse_branches(std::span<const Tensor> branches, const MsFamConfig& cfg,
                     const ParameterSet& params, const std::string& prefix);

/// Shape-preserving in H and W; output has cfg.feature_dim channels.
Tensor msfam_forward(const Tensor& x, const MsFamConfig& cfg,
                     const ParameterSet& params, const std::string& prefix);

struct FeaturePyramid {
  Tensor fm2, fm3, fm4, fm5;
};

class SaliencyModel {
 public:
  /// Fresh parameters: uniform fan-in scaling, zero biases.
  SaliencyModel(ModelConfig cfg, std::uint64_t seed);
  /// Adopts existing parameters; names and shapes must match the config.
  SaliencyModel(ModelConfig cfg, ParameterSet params);

  const ModelConfig& config() const { return cfg_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }

  FeaturePyramid encoder_forward(const Tensor& image) const;
  Tensor decoder_forward(const Tensor& fm2, std::size_t out_h,
                         std::size_t out_w) const;
  /// B x 3 x H x W image -> B x 1 x H x W saliency in (0,1).
  Tensor forward(const Tensor& image) const;

 private:
  ModelConfig cfg_;
  ParameterSet params_;
};

/// Full parameter set for a config, initialized from `seed`.
ParameterSet build_parameters(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace psg
