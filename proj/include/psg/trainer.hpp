#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "psg/dataio.hpp"
#include "psg/losses.hpp"
#include "psg/model.hpp"

namespace psg {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lr = 5e-5;
  double lr_decay_factor = 0.1;
  std::uint64_t seed = 1;
  /// Validation every N epochs (and always after the last one); 0 disables.
  std::size_t eval_every = 1;
  double flip_probability = 0.5;
  LossConfig loss;
  ModelConfig model;

  void validate() const;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(const ParameterSet& params);
};

/// Bias-corrected Adam on every parameter, reading the accumulated gradients.
void adam_step(ParameterSet& params, OptimizerState& state, double lr,
               const AdamHyper& hyper = {});

/// First 0-indexed epoch trained at the decayed rate: ceil(epochs / 2).
std::size_t decay_epoch(std::size_t epochs);
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double main = 0.0;
  double aux = 0.0;
  double overall = 0.0;
  /// NaN when the epoch was not evaluated.
  double val_max_f = 0.0;
  double val_mae = 0.0;
};

std::string log_preamble(const TrainConfig& cfg);
std::string format_log_line(const EpochRecord& r);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::string config_text;
  /// train.log contents up to `epoch`, so a resumed run can reproduce it.
  std::string log_text;
  std::uint64_t epoch = 0;  // completed epochs
  std::uint64_t seed = 0;
  ParameterSet params;
  OptimizerState optimizer;
};

/// Little-endian; arrays are stored as 32-bit floats.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainOptions {
  const std::vector<Sample>* validation = nullptr;
  /// When set, writes the probe prediction and its PSG target every epoch.
  std::filesystem::path probe_dir;
  /// Continue from this state instead of a fresh initialization.
  const Checkpoint* resume = nullptr;
  /// Stored verbatim in checkpoints; generated from the config when empty.
  std::string config_text;
  /// Stop once this many epochs are complete (0 = run to the end).
  std::size_t stop_after = 0;
  /// Called after every epoch with its record and the state reached so far.
  std::function<void(const EpochRecord&, const Checkpoint&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
};

/// Throws std::invalid_argument on an empty dataset or invalid config.
TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& dataset,
                  const TrainOptions& options = {});

/// Saliency at the model resolution for each image (resized to it first).
std::vector<SaliencyMap> predict(const SaliencyModel& model,
                                 const std::vector<RgbImage>& images,
                                 std::size_t batch_size = 8);

/// Predictions resized back to each sample's own resolution.
std::vector<SaliencyMap> predict_at_source_size(const SaliencyModel& model,
                                                const std::vector<Sample>& samples,
                                                std::size_t batch_size = 8);

}  // namespace psg
