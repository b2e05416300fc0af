#include "psg/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace psg {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, const std::string& key) {
  T value{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw ConfigError(key, key + ": '" + std::string(s) + "' is not a valid number");
  }
  return value;
}

bool parse_bool(std::string_view s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key, key + ": '" + std::string(s) + "' is not a boolean");
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <class T>
std::string join(const T& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ", ";
    if constexpr (std::is_arithmetic_v<std::decay_t<decltype(item)>>) {
      out += std::to_string(item);
    } else {
      out += std::string(to_string(item));
    }
  }
  return out;
}

// Invokes `f` with the wrapped exception message attributed to `key`.
template <class F>
void attributed(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, key + ": " + e.what());
  }
}

// Whole-config validation; the key is read from the message, whose first
// word names the offending field ("loss.alpha must be ...").
void validate_attributed(const RunConfig& cfg) {
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    const std::string first = what.substr(0, what.find(' '));
    throw ConfigError(first.find('.') != std::string::npos ? first : "", what);
  }
}

struct Field {
  const char* section;
  const char* name;
  std::function<void(RunConfig&, std::string_view, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  using V = std::string_view;
  using K = const std::string&;
  static const std::vector<Field> table = {
      {"model", "input_size",
       [](RunConfig& c, V v, K k) { c.train.model.input_size = parse_number<std::size_t>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.train.model.input_size); }},
      {"model", "encoder_channels",
       [](RunConfig& c, V v, K k) {
         std::vector<std::size_t> ch;
         for (auto item : split_list(v)) ch.push_back(parse_number<std::size_t>(item, k));
         c.train.model.encoder_channels = ch;
       },
       [](const RunConfig& c) { return join(c.train.model.encoder_channels); }},
      {"model", "msfam_in_encoder",
       [](RunConfig& c, V v, K k) { c.train.model.msfam_in_encoder = parse_bool(v, k); },
       [](const RunConfig& c) { return fmt(c.train.model.msfam_in_encoder); }},
      {"model", "msfam_in_decoder",
       [](RunConfig& c, V v, K k) { c.train.model.msfam_in_decoder = parse_bool(v, k); },
       [](const RunConfig& c) { return fmt(c.train.model.msfam_in_decoder); }},

      {"msfam", "feature_dim",
       [](RunConfig& c, V v, K k) { c.train.model.msfam.feature_dim = parse_number<std::size_t>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.train.model.msfam.feature_dim); }},
      {"msfam", "dilation_rates",
       [](RunConfig& c, V v, K k) {
         const auto items = split_list(v);
         if (items.size() != 3) throw ConfigError(k, k + ": expected exactly 3 rates");
         for (std::size_t i = 0; i < 3; ++i) {
           c.train.model.msfam.dilation_rates[i] = parse_number<int>(items[i], k);
         }
       },
       [](const RunConfig& c) { return join(c.train.model.msfam.dilation_rates); }},
      {"msfam", "use_bam",
       [](RunConfig& c, V v, K k) { c.train.model.msfam.use_bam = parse_bool(v, k); },
       [](const RunConfig& c) { return fmt(c.train.model.msfam.use_bam); }},
      {"msfam", "degrade_to_1x1",
       [](RunConfig& c, V v, K k) { c.train.model.msfam.degrade_to_1x1 = parse_bool(v, k); },
       [](const RunConfig& c) { return fmt(c.train.model.msfam.degrade_to_1x1); }},

      {"loss", "main",
       [](RunConfig& c, V v, K) { c.train.loss.main_kind = parse_loss_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.train.loss.main_kind)); }},
      {"loss", "use_psg",
       [](RunConfig& c, V v, K k) { c.train.loss.use_psg = parse_bool(v, k); },
       [](const RunConfig& c) { return fmt(c.train.loss.use_psg); }},
      {"loss", "alpha",
       [](RunConfig& c, V v, K k) { c.train.loss.alpha = parse_number<double>(v, k); },
       [](const RunConfig& c) { return fmt(c.train.loss.alpha); }},
      {"loss", "psg_kernel",
       [](RunConfig& c, V v, K k) { c.train.loss.psg_kernel = parse_number<int>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.train.loss.psg_kernel); }},
      {"loss", "epsilon",
       [](RunConfig& c, V v, K k) { c.train.loss.epsilon = parse_number<double>(v, k); },
       [](const RunConfig& c) { return fmt(c.train.loss.epsilon); }},
      {"loss", "refresh",
       [](RunConfig& c, V v, K) { c.train.loss.refresh = parse_target_refresh(v); },
       [](const RunConfig& c) { return std::string(to_string(c.train.loss.refresh)); }},

      {"train", "epochs",
       [](RunConfig& c, V v, K k) { c.train.epochs = parse_number<std::size_t>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
      {"train", "batch_size",
       [](RunConfig& c, V v, K k) { c.train.batch_size = parse_number<std::size_t>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
      {"train", "lr",
       [](RunConfig& c, V v, K k) { c.train.lr = parse_number<double>(v, k); },
       [](const RunConfig& c) { return fmt(c.train.lr); }},
      {"train", "lr_decay_factor",
       [](RunConfig& c, V v, K k) { c.train.lr_decay_factor = parse_number<double>(v, k); },
       [](const RunConfig& c) { return fmt(c.train.lr_decay_factor); }},
      {"train", "seed",
       [](RunConfig& c, V v, K k) { c.train.seed = parse_number<std::uint64_t>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      {"train", "eval_every",
       [](RunConfig& c, V v, K k) { c.train.eval_every = parse_number<std::size_t>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.train.eval_every); }},
      {"train", "flip_probability",
       [](RunConfig& c, V v, K k) { c.train.flip_probability = parse_number<double>(v, k); },
       [](const RunConfig& c) { return fmt(c.train.flip_probability); }},

      {"data", "count",
       [](RunConfig& c, V v, K k) { c.data.count = parse_number<std::size_t>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.data.count); }},
      {"data", "test_count",
       [](RunConfig& c, V v, K k) { c.test_count = parse_number<std::size_t>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.test_count); }},
      {"data", "size",
       [](RunConfig& c, V v, K k) { c.data.size = parse_number<std::size_t>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.data.size); }},
      {"data", "seed",
       [](RunConfig& c, V v, K k) { c.data.seed = parse_number<std::uint64_t>(v, k); },
       [](const RunConfig& c) { return std::to_string(c.data.seed); }},
      {"data", "hole_fraction",
       [](RunConfig& c, V v, K k) { c.data.hole_fraction = parse_number<double>(v, k); },
       [](const RunConfig& c) { return fmt(c.data.hole_fraction); }},
      {"data", "shapes",
       [](RunConfig& c, V v, K) {
         std::vector<ShapeKind> kinds;
         for (auto item : split_list(v)) kinds.push_back(parse_shape_kind(item));
         c.data.shape_kinds = kinds;
       },
       [](const RunConfig& c) { return join(c.data.shape_kinds); }},

      {"metrics", "aggregation",
       [](RunConfig& c, V v, K) { c.metrics.aggregation = parse_f_aggregation(v); },
       [](const RunConfig& c) { return std::string(to_string(c.metrics.aggregation)); }},
      {"metrics", "dataset_name",
       [](RunConfig& c, V v, K) { c.dataset_name = std::string(v); },
       [](const RunConfig& c) { return c.dataset_name; }},
  };
  return table;
}

void assign(RunConfig& cfg, std::string_view section, std::string_view name,
            std::string_view value) {
  const std::string key = std::string(section) + "." + std::string(name);
  const auto& table = fields();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) {
    return f.section == section && f.name == name;
  });
  if (it == table.end()) throw ConfigError(key, "unknown config key '" + key + "'");
  attributed(key, [&] { it->set(cfg, value, key); });
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  data.validate();
  if (dataset_name.empty() || dataset_name.find(',') != std::string::npos) {
    throw std::invalid_argument("metrics.dataset_name must be non-empty without commas");
  }
}

RunConfig parse_config(std::string_view text, std::string_view source) {
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", where + ": unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", where + ": expected 'key = value'");
    }
    if (section.empty()) throw ConfigError("", where + ": key outside any [section]");
    const auto name = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      assign(cfg, section, name, value);
    } catch (const ConfigError& e) {
      throw ConfigError(e.key(), where + ": " + e.what());
    }
  }
  validate_attributed(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto key = trim(assignment.substr(0, eq));
  const auto dot = key.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos) {
    throw ConfigError(std::string(key), "override '" + std::string(assignment) +
                                            "' is not of the form section.key=value");
  }
  assign(cfg, key.substr(0, dot), key.substr(dot + 1), trim(assignment.substr(eq + 1)));
  attributed(std::string(key), [&] { cfg.validate(); });
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.name) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

}  // namespace psg
