#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "psg/dataio.hpp"
#include "psg/metrics.hpp"
#include "psg/trainer.hpp"

namespace psg {

/// Sections: [model] [msfam] [loss] [train] [data] [metrics].
struct RunConfig {
  TrainConfig train;
  SyntheticSpec data;
  /// Held-out samples written by gen-data after the training ones.
  std::size_t test_count = 50;
  MetricsConfig metrics;
  std::string dataset_name = "synthetic";

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(what), key_(key) {}
  /// `section.key` the error refers to; empty for syntax errors.
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// `# comment`, `[section]`, `key = value`. Unknown keys are rejected and
/// the result is validated.
RunConfig parse_config(std::string_view text, std::string_view source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Applies one `section.key=value` assignment, then re-validates.
void apply_override(RunConfig& cfg, std::string_view assignment);

/// Canonical text; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const RunConfig& cfg);

}  // namespace psg
