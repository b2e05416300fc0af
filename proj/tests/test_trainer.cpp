#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "psg/convert.hpp"
#include "psg/ops.hpp"
#include "psg/trainer.hpp"

using namespace psg;
namespace fs = std::filesystem;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.model.input_size = 32;
  cfg.model.encoder_channels = {4, 6, 8, 8, 8};
  cfg.model.msfam.feature_dim = 4;
  return cfg;
}

std::vector<Sample> small_data(std::size_t count = 8, std::uint64_t seed = 3) {
  SyntheticSpec spec;
  spec.count = count;
  spec.size = 32;
  spec.seed = seed;
  return generate_synthetic(spec);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("psg_trainer_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void expect_same_params(const ParameterSet& a, const ParameterSet& b) {
  ASSERT_EQ(a.size(), b.size());
  auto ib = b.begin();
  for (const auto& [name, t] : a) {
    EXPECT_EQ(name, ib->first);
    EXPECT_TRUE(std::equal(t.values().begin(), t.values().end(), ib->second.values().begin()))
        << name;
    ++ib;
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterSet p;
  p.add("w", {3}, {1.0, -2.0, 0.5});
  p.zero_grad();
  (void)p.at("w").mutable_grad();
  OptimizerState s = OptimizerState::zeros_like(p);
  adam_step(p, s, 0.1);
  EXPECT_EQ(std::vector<double>(p.at("w").values().begin(), p.at("w").values().end()),
            (std::vector<double>{1.0, -2.0, 0.5}));
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepOnSquare) {
  // f(w) = w^2 at w = 1: g = 2, m = 0.2, v = 0.004; bias correction restores
  // m_hat = 2 and v_hat = 4, so the step is lr * 2 / (2 + eps).
  ParameterSet p;
  p.add("w", {1}, {1.0});
  OptimizerState s = OptimizerState::zeros_like(p);
  Tensor& w = p.at("w");
  backward(mul(w, w));
  adam_step(p, s, 0.01);
  EXPECT_NEAR(w.values()[0], 1.0 - 0.01 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(s.m[0][0], 0.2, 1e-15);
  EXPECT_NEAR(s.v[0][0], 0.004, 1e-15);
}

TEST(Adam, StateMatters) {
  auto run = [](std::vector<double> lrs) {
    ParameterSet p;
    p.add("w", {1}, {1.0});
    OptimizerState s = OptimizerState::zeros_like(p);
    for (double lr : lrs) {
      p.zero_grad();
      backward(mul(p.at("w"), p.at("w")));
      adam_step(p, s, lr);
    }
    return p.at("w").values()[0];
  };
  EXPECT_NE(run({0.05, 0.05}), run({0.1}));
}

TEST(Adam, MinimisesAQuadratic) {
  ParameterSet p;
  p.add("w", {2}, {3.0, -4.0});
  OptimizerState s = OptimizerState::zeros_like(p);
  for (int i = 0; i < 2000; ++i) {
    p.zero_grad();
    backward(sum(mul(p.at("w"), p.at("w"))));
    adam_step(p, s, 0.01);
  }
  for (double v : p.at("w").values()) EXPECT_LT(std::abs(v), 1e-2);
}

TEST(Schedule, DecayBoundary) {
  EXPECT_EQ(decay_epoch(99), 50u);
  EXPECT_EQ(decay_epoch(2), 1u);
  EXPECT_EQ(decay_epoch(30), 15u);
  TrainConfig cfg;
  cfg.epochs = 99;
  cfg.lr = 5e-5;
  EXPECT_EQ(lr_schedule(49, cfg), 5e-5);
  EXPECT_DOUBLE_EQ(lr_schedule(50, cfg), 5e-6);
  cfg.lr_decay_factor = 1.0;
  for (std::size_t e = 0; e < 99; ++e) EXPECT_EQ(lr_schedule(e, cfg), 5e-5);
}

TEST(Training, LossFallsOverFirstStepsOnAFixedBatch) {
  TrainConfig cfg = small_config();
  cfg.model.input_size = 64;
  cfg.model.encoder_channels = {8, 16, 24, 32, 32};
  cfg.model.msfam.feature_dim = 16;
  SyntheticSpec spec;
  spec.count = 4;
  const auto data = generate_synthetic(spec);
  std::vector<RgbImage> imgs;
  std::vector<BinaryMask> masks;
  for (const auto& s : data) {
    imgs.push_back(s.image);
    masks.push_back(s.mask);
  }
  const Tensor x = stack_images(imgs), gt = stack_masks(masks);
  SaliencyModel model(cfg.model, 1);
  OptimizerState opt = OptimizerState::zeros_like(model.params());
  double previous = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 5; ++step) {
    const LossTerms t = overall(model.forward(x), gt, cfg.loss);
    EXPECT_LT(t.overall.item(), previous) << step;
    previous = t.overall.item();
    model.params().zero_grad();
    backward(t.overall);
    adam_step(model.params(), opt, 1e-3);
  }
}

TEST(Training, SameSeedSameRun) {
  const auto data = small_data();
  const TrainResult a = train(small_config(), data);
  const TrainResult b = train(small_config(), data);
  EXPECT_EQ(a.checkpoint.log_text, b.checkpoint.log_text);
  expect_same_params(a.checkpoint.params, b.checkpoint.params);
  TrainConfig other = small_config();
  other.seed = 2;
  EXPECT_NE(train(other, data).checkpoint.log_text, a.checkpoint.log_text);
}

TEST(Training, HistoryAndValidationSchedule) {
  const auto data = small_data();
  const auto val = small_data(4, 9);
  TrainConfig cfg = small_config();
  cfg.epochs = 4;
  cfg.eval_every = 3;
  TrainOptions opts;
  opts.validation = &val;
  std::size_t callbacks = 0;
  opts.on_epoch = [&](const EpochRecord& r, const Checkpoint& c) {
    EXPECT_EQ(c.epoch, r.epoch + 1);
    ++callbacks;
  };
  const TrainResult r = train(cfg, data, opts);
  ASSERT_EQ(r.history.size(), 4u);
  EXPECT_EQ(callbacks, 4u);
  EXPECT_TRUE(std::isnan(r.history[0].val_mae));
  EXPECT_FALSE(std::isnan(r.history[2].val_mae));
  EXPECT_FALSE(std::isnan(r.history[3].val_max_f));
  EXPECT_DOUBLE_EQ(r.history[1].lr, 1e-3);
  EXPECT_DOUBLE_EQ(r.history[2].lr, 1e-4);
  for (const auto& h : r.history) {
    EXPECT_NEAR(h.overall, h.main + h.aux, 1e-12);
    EXPECT_GT(h.aux, 0.0);
  }
}

TEST(Training, AblationAndLossGridRunOneEpoch) {
  const auto data = small_data(4);
  for (bool enc : {false, true})
    for (bool dec : {false, true}) {
      TrainConfig cfg = small_config();
      cfg.epochs = 1;
      cfg.model.msfam_in_encoder = enc;
      cfg.model.msfam_in_decoder = dec;
      EXPECT_NO_THROW(train(cfg, data)) << enc << dec;
    }
  for (LossKind k : {LossKind::kL1, LossKind::kL2, LossKind::kKld, LossKind::kDice,
                     LossKind::kBce, LossKind::kHybrid})
    for (bool psg : {false, true}) {
      TrainConfig cfg = small_config();
      cfg.epochs = 1;
      cfg.loss.main_kind = k;
      cfg.loss.use_psg = psg;
      const TrainResult r = train(cfg, data);
      EXPECT_TRUE(std::isfinite(r.history[0].overall)) << to_string(k) << psg;
      if (!psg) {
        EXPECT_EQ(r.history[0].aux, 0.0);
      }
    }
}

TEST(Training, PerEpochTargetRefreshDiffersFromPerStep) {
  const auto data = small_data();
  TrainConfig cfg = small_config();
  cfg.epochs = 2;
  const TrainResult step = train(cfg, data);
  cfg.loss.refresh = TargetRefresh::kPerEpoch;
  const TrainResult epoch = train(cfg, data);
  EXPECT_NE(step.checkpoint.log_text, epoch.checkpoint.log_text);
  EXPECT_TRUE(std::isfinite(epoch.history.back().overall));
}

TEST(Training, ProbeWritesBothMapsEachEpoch) {
  const fs::path dir = scratch("probe");
  TrainConfig cfg = small_config();
  cfg.epochs = 2;
  TrainOptions opts;
  opts.probe_dir = dir;
  train(cfg, small_data(4), opts);
  for (const char* f : {"pred_epoch000.pgm", "pgt_epoch000.pgm", "pred_epoch001.pgm",
                        "pgt_epoch001.pgm"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const SaliencyMap pred = load_saliency(dir / "pred_epoch001.pgm");
  const SaliencyMap pgt = load_saliency(dir / "pgt_epoch001.pgm");
  for (std::size_t i = 0; i < pred.size(); ++i) EXPECT_LE(pgt.values()[i], 1.0);
  EXPECT_EQ(pred.width(), 32u);
  fs::remove_all(dir);
}

TEST(Training, RejectsEmptyDataAndBadConfig) {
  EXPECT_THROW(train(small_config(), {}), std::invalid_argument);
  TrainConfig cfg = small_config();
  cfg.batch_size = 0;
  EXPECT_THROW(train(cfg, small_data(2)), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsExactAtFloatPrecision) {
  const fs::path dir = scratch("roundtrip");
  const TrainResult r = train(small_config(), small_data(4));
  save_checkpoint(r.checkpoint, dir / "c.bin");
  const Checkpoint back = load_checkpoint(dir / "c.bin");
  EXPECT_EQ(back.config_text, r.checkpoint.config_text);
  EXPECT_EQ(back.log_text, r.checkpoint.log_text);
  EXPECT_EQ(back.epoch, 3u);
  EXPECT_EQ(back.seed, 1u);
  EXPECT_EQ(back.optimizer.step, r.checkpoint.optimizer.step);
  expect_same_params(back.params, r.checkpoint.params);
  EXPECT_EQ(back.optimizer.m, r.checkpoint.optimizer.m);
  EXPECT_EQ(back.optimizer.v, r.checkpoint.optimizer.v);
  save_checkpoint(back, dir / "d.bin");
  EXPECT_EQ(slurp(dir / "c.bin"), slurp(dir / "d.bin"));
  fs::remove_all(dir);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const fs::path dir = scratch("corrupt");
  const TrainResult r = train(small_config(), small_data(4));
  save_checkpoint(r.checkpoint, dir / "c.bin");
  const std::string bytes = slurp(dir / "c.bin");
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    return dir / name;
  };
  EXPECT_THROW(load_checkpoint(write("magic.bin", "NOTACKPT" + bytes.substr(8))), CheckpointError);
  EXPECT_THROW(load_checkpoint(write("short.bin", bytes.substr(0, bytes.size() / 2))),
               CheckpointError);
  EXPECT_THROW(load_checkpoint(write("long.bin", bytes + "x")), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "absent.bin"), CheckpointError);
  fs::remove_all(dir);
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  const auto data = small_data();
  const TrainConfig cfg = small_config();
  const TrainResult full = train(cfg, data);

  const fs::path dir = scratch("resume");
  TrainOptions first;
  first.stop_after = 1;
  const TrainResult part = train(cfg, data, first);
  EXPECT_EQ(part.history.size(), 1u);
  save_checkpoint(part.checkpoint, dir / "c.bin");
  const Checkpoint loaded = load_checkpoint(dir / "c.bin");
  TrainOptions second;
  second.resume = &loaded;
  const TrainResult rest = train(cfg, data, second);
  EXPECT_EQ(rest.history.size(), 2u);
  EXPECT_EQ(rest.checkpoint.log_text, full.checkpoint.log_text);
  expect_same_params(rest.checkpoint.params, full.checkpoint.params);
  EXPECT_EQ(rest.checkpoint.optimizer.m, full.checkpoint.optimizer.m);
  // The resumed model works on copies; the loaded checkpoint is untouched.
  expect_same_params(loaded.params, part.checkpoint.params);
  fs::remove_all(dir);
}

TEST(Log, PreambleAndLines) {
  TrainConfig cfg;
  cfg.epochs = 2;
  EXPECT_EQ(log_preamble(cfg),
            "# seed 1, 2 epochs, batch 8, loss hybrid + psg (alpha 1, kernel 3, refresh step)\n"
            "# lr decays by 0.1 from epoch 1 (0-indexed)\n"
            "epoch,lr,main_loss,aux_loss,overall,val_maxF,val_MAE\n");
  EpochRecord r{3, 5e-5, 0.25, 0.125, 0.375, std::nan(""), std::nan("")};
  EXPECT_EQ(format_log_line(r), "3,5e-05,0.250000,0.125000,0.375000,nan,nan\n");
  r.val_max_f = 0.9;
  r.val_mae = 0.05;
  EXPECT_EQ(format_log_line(r), "3,5e-05,0.250000,0.125000,0.375000,0.900000,0.050000\n");
}

TEST(Predict, ReturnsSourceResolution) {
  TrainConfig cfg = small_config();
  const SaliencyModel model(cfg.model, 1);
  SyntheticSpec spec;
  spec.count = 3;
  spec.size = 48;
  const auto samples = generate_synthetic(spec);
  const auto maps = predict_at_source_size(model, samples, 2);
  ASSERT_EQ(maps.size(), 3u);
  for (const auto& m : maps) {
    EXPECT_EQ(m.width(), 48u);
    EXPECT_EQ(m.height(), 48u);
  }
  std::vector<RgbImage> imgs{samples[0].image};
  EXPECT_EQ(predict(model, imgs).front().width(), 32u);
}
