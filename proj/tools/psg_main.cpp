// psg: command-line front end for data generation, training, inference,
// evaluation and the inspection tools.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "psg/config.hpp"
#include "psg/dataio.hpp"
#include "psg/lemma.hpp"
#include "psg/metrics.hpp"
#include "psg/morphology.hpp"
#include "psg/plot.hpp"
#include "psg/trainer.hpp"

namespace fs = std::filesystem;
using namespace psg;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInvariant = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "Run config file ([section] / key = value)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Override one key: section.key=value");
  }

  RunConfig resolve() const {
    RunConfig cfg = file.empty() ? RunConfig{} : load_config(file);
    for (const auto& o : overrides) apply_override(cfg, o);
    cfg.validate();
    return cfg;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

// Writes to a sibling temporary first so an interrupted run never leaves a
// half-written checkpoint behind.
void save_checkpoint_atomic(const Checkpoint& ckpt, const fs::path& path) {
  const fs::path tmp = path.string() + ".tmp";
  save_checkpoint(ckpt, tmp);
  fs::rename(tmp, path);
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

// Ids and image paths of an inference input: the dataset layout when
// list.txt exists, otherwise every .ppm/.pgm in the directory.
std::vector<std::pair<std::string, fs::path>> list_images(const fs::path& dir) {
  std::vector<std::pair<std::string, fs::path>> out;
  if (fs::exists(dir / "list.txt")) {
    for (const auto& id : read_id_list(dir)) out.emplace_back(id, dir / "images" / (id + ".ppm"));
    return out;
  }
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) {
      out.emplace_back(stem_of(e.path()), e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> list_pgm(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_gen_data(const ConfigArgs& args, const fs::path& out) {
  const RunConfig cfg = args.resolve();
  SyntheticSpec spec = cfg.data;
  spec.count = cfg.data.count + cfg.test_count;
  auto samples = generate_synthetic(spec);
  const auto split = samples.begin() + static_cast<long>(cfg.data.count);
  save_dataset({samples.begin(), split}, out / "train");
  if (cfg.test_count > 0) save_dataset({split, samples.end()}, out / "test");
  write_text(out / "config.cfg", to_config_text(cfg));
  std::cout << "wrote " << cfg.data.count << " training and " << cfg.test_count
            << " test samples to " << out.string() << "\n";
  return kOk;
}

int cmd_train(const ConfigArgs& args, const fs::path& data, const fs::path& val,
              const fs::path& out, const fs::path& resume_path, bool probe,
              std::size_t stop_after) {
  RunConfig cfg;
  Checkpoint resume;
  if (!resume_path.empty()) {
    resume = load_checkpoint(resume_path);
    cfg = parse_config(resume.config_text, resume_path.string());
    if (!args.file.empty() || !args.overrides.empty()) {
      throw UsageError("--resume takes its configuration from the checkpoint");
    }
  } else {
    cfg = args.resolve();
  }
  const auto train_set = load_dataset(data);
  std::vector<Sample> val_set;
  if (!val.empty()) val_set = load_dataset(val);

  fs::create_directories(out);
  const std::string config_text = to_config_text(cfg);
  write_text(out / "config.cfg", config_text);
  TrainOptions opts;
  opts.config_text = config_text;
  opts.validation = val_set.empty() ? nullptr : &val_set;
  opts.resume = resume_path.empty() ? nullptr : &resume;
  opts.stop_after = stop_after;
  if (probe) opts.probe_dir = out / "probe";
  opts.on_epoch = [&](const EpochRecord& rec, const Checkpoint& ckpt) {
    std::cout << format_log_line(rec) << std::flush;
    write_text(out / "train.log", ckpt.log_text);
    save_checkpoint_atomic(ckpt, out / "checkpoint.bin");
  };
  if (resume_path.empty()) std::cout << log_preamble(cfg.train);
  const TrainResult result = train(cfg.train, train_set, opts);
  write_text(out / "train.log", result.checkpoint.log_text);
  save_checkpoint_atomic(result.checkpoint, out / "checkpoint.bin");
  return kOk;
}

int cmd_infer(const fs::path& ckpt_path, const fs::path& data, const fs::path& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const RunConfig cfg = parse_config(ckpt.config_text, ckpt_path.string());
  const SaliencyModel model(cfg.train.model, ckpt.params.clone());
  fs::create_directories(out);
  const auto inputs = list_images(data);
  if (inputs.empty()) throw DataError("no images found in " + data.string());
  for (std::size_t start = 0; start < inputs.size(); start += cfg.train.batch_size) {
    const std::size_t end = std::min(inputs.size(), start + cfg.train.batch_size);
    std::vector<Sample> batch;
    for (std::size_t i = start; i < end; ++i) {
      RgbImage img = load_rgb(inputs[i].second);
      BinaryMask blank(img.width, img.height);
      batch.push_back({std::move(img), std::move(blank), inputs[i].first});
    }
    const auto maps = predict_at_source_size(model, batch, batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      save_pnm(maps[b], out / (batch[b].id + ".pgm"));
    }
  }
  std::cout << "wrote " << inputs.size() << " saliency maps to " << out.string() << "\n";
  return kOk;
}

int cmd_eval(const fs::path& pred_dir, const fs::path& gt_root, const fs::path& out,
             const std::string& name, const std::string& aggregation) {
  const fs::path gt_dir = fs::is_directory(gt_root / "masks") ? gt_root / "masks" : gt_root;
  MetricsConfig mc;
  mc.aggregation = parse_f_aggregation(aggregation);
  std::vector<SaliencyMap> preds;
  std::vector<BinaryMask> gts;
  for (const auto& gt_path : list_pgm(gt_dir)) {
    const fs::path pred_path = pred_dir / gt_path.filename();
    if (!fs::exists(pred_path)) throw DataError("no prediction for " + gt_path.string());
    gts.push_back(load_mask(gt_path));
    SaliencyMap p = load_saliency(pred_path);
    if (p.width() != gts.back().width() || p.height() != gts.back().height()) {
      throw DataError(pred_path.string() + " does not match the size of its ground truth");
    }
    preds.push_back(std::move(p));
  }
  if (gts.empty()) throw DataError("no ground-truth masks in " + gt_dir.string());
  const MetricsReport report = evaluate_dataset(preds, gts, mc);
  if (report.empty_gt_images > 0) {
    std::cerr << "note: " << report.empty_gt_images
              << " image(s) with empty ground truth left out of recall averaging\n";
  }
  fs::create_directories(out);
  write_metrics_csv(out / "metrics.csv", name, report);
  write_pr_curve_csv(out / "pr_curve.csv", report);
  char line[128];
  std::snprintf(line, sizeof line, "%s: maxF %.6f (threshold %d), MAE %.6f over %zu images\n",
                name.c_str(), report.max_f, report.best_threshold, report.mae, gts.size());
  std::cout << line;
  return kOk;
}

int cmd_psg_target(const fs::path& pred, const fs::path& gt, int kernel, const fs::path& out) {
  const SaliencyMap p = load_saliency(pred);
  const BinaryMask g = load_mask(gt);
  if (p.width() != g.width() || p.height() != g.height()) {
    throw DataError("prediction and ground truth differ in size");
  }
  save_pnm(psg_target(p, g, StructuringElement(kernel)), out);
  return kOk;
}

int cmd_closing(const fs::path& pred, int kernel, double threshold, const fs::path& out) {
  save_pnm(postprocess_close(load_saliency(pred), StructuringElement(kernel), threshold), out);
  return kOk;
}

int cmd_lemma(std::size_t samples, std::uint64_t seed) {
  const LemmaReport r = verify_lemma(samples, seed);
  char line[160];
  std::snprintf(line, sizeof line,
                "%s: %zu samples, %zu distance violations, %zu angle violations, min margin %.3e\n",
                r.passed() ? "PASS" : "FAIL", r.samples, r.violations, r.angle_violations,
                r.min_margin);
  std::cout << line;
  return r.passed() ? kOk : kInvariant;
}

int cmd_plot(const fs::path& curve, const fs::path& out, const std::string& title) {
  write_text(out, render_pr_svg(read_pr_curve_csv(curve), title));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive self-guided loss: training and evaluation tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "psg 1.0");

  ConfigArgs gen_cfg, train_cfg;
  std::string out, data, val, resume, ckpt, pred, gt, curve, name = "synthetic",
                                                             aggregation = "mean-pr",
                                                             title = "PR curve";
  bool probe = false;
  std::size_t stop_after = 0, samples = 10000;
  std::uint64_t seed = 1;
  int kernel = 3;
  double threshold = 0.5;

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset (train/ and test/)");
  gen_cfg.attach(gen);
  gen->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a model; writes checkpoint.bin and train.log");
  train_cfg.attach(tr);
  tr->add_option("--data", data, "Training dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--val", val, "Validation dataset directory")->check(CLI::ExistingDirectory);
  tr->add_option("--out", out, "Output directory")->required();
  tr->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  tr->add_flag("--probe", probe, "Dump prediction and PSG target of the first sample each epoch");
  tr->add_option("--stop-after", stop_after, "Stop after this many completed epochs");

  auto* inf = app.add_subcommand("infer", "Predict saliency maps at the inputs' resolution");
  inf->add_option("--ckpt", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  inf->add_option("--data", data, "Dataset directory or directory of images")->required();
  inf->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Write metrics.csv and pr_curve.csv");
  ev->add_option("--pred", pred, "Directory of predicted .pgm maps")->required();
  ev->add_option("--gt", gt, "Ground-truth directory (or dataset root with masks/)")->required();
  ev->add_option("--out", out, "Output directory")->required();
  ev->add_option("--name", name, "Dataset name for metrics.csv");
  ev->add_option("--aggregation", aggregation, "mean-pr or mean-f");

  auto* pt = app.add_subcommand("psg-target", "Write the simulated-closing target of a prediction");
  pt->add_option("--pred", pred, "Prediction .pgm")->required();
  pt->add_option("--gt", gt, "Ground-truth .pgm")->required();
  pt->add_option("--kernel", kernel, "Odd window side")->check(CLI::PositiveNumber);
  pt->add_option("--out", out, "Output .pgm")->required();

  auto* cl = app.add_subcommand("closing", "Binarize a prediction and apply morphological closing");
  cl->add_option("--pred", pred, "Prediction .pgm")->required();
  cl->add_option("--kernel", kernel, "Odd window side")->check(CLI::PositiveNumber);
  cl->add_option("--threshold", threshold, "Binarization threshold in [0,1]")->check(CLI::Range(0.0, 1.0));
  cl->add_option("--out", out, "Output .pgm")->required();

  auto* lm = app.add_subcommand("lemma", "Check the combined-step distance lemma on random triangles");
  lm->add_option("--samples", samples, "Number of configurations");
  lm->add_option("--seed", seed, "Sampling seed");

  auto* pl = app.add_subcommand("plot", "Render pr_curve.csv as an SVG line chart");
  pl->add_option("--curve", curve, "pr_curve.csv")->required()->check(CLI::ExistingFile);
  pl->add_option("--out", out, "Output .svg")->required();
  pl->add_option("--title", title, "Chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gen_cfg, out);
    if (*tr) return cmd_train(train_cfg, data, val, out, resume, probe, stop_after);
    if (*inf) return cmd_infer(ckpt, data, out);
    if (*ev) return cmd_eval(pred, gt, out, name, aggregation);
    if (*pt) return cmd_psg_target(pred, gt, kernel, out);
    if (*cl) return cmd_closing(pred, kernel, threshold, out);
    if (*lm) return cmd_lemma(samples, seed);
    if (*pl) return cmd_plot(curve, out, title);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const PnmError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const CheckpointError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvariant;
  }
  return kUsage;
}
