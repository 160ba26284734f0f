#include "mononext/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mononext/error.hpp"

namespace mononext {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size() || !std::isfinite(v)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
  return v;
}

long long to_int(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "on" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "off" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::optional<double> to_optional(const std::string& key, const std::string& value) {
  if (value == "off" || value == "none") return std::nullopt;
  return to_double(key, value);
}

std::vector<double> to_doubles(const std::string& key, const std::string& value, std::size_t count) {
  const auto parts = split_list(value);
  if (parts.size() != count) {
    throw ConfigError("config key '" + key + "': expected " + std::to_string(count) +
                      " comma-separated numbers, got '" + value + "'");
  }
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(to_double(key, p));
  return out;
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt(*v) : "off"; }

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  try {
    if (key == "data_root") data_root = value;
    else if (key == "split_dir") split_dir = value;
    else if (key == "output_dir") output_dir = value;
    else if (key == "learning_rate") learning_rate = to_double(key, value);
    else if (key == "weight_decay") weight_decay = to_double(key, value);
    else if (key == "batch_size") batch_size = static_cast<int>(to_int(key, value));
    else if (key == "epochs") epochs = static_cast<int>(to_int(key, value));
    else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "cosine_schedule") cosine_schedule = to_bool(key, value);
    else if (key == "grad_clip") grad_clip = to_optional(key, value);
    else if (key == "augment_flip") augment_flip = to_bool(key, value);
    else if (key == "augment_contrast") augment_contrast = to_bool(key, value);
    else if (key == "flip_prob") flip_prob = to_double(key, value);
    else if (key == "contrast_prob") contrast_prob = to_double(key, value);
    else if (key == "contrast_min") contrast_min = to_double(key, value);
    else if (key == "contrast_max") contrast_max = to_double(key, value);
    else if (key == "init_head_prior") init_head_prior = to_bool(key, value);
    else if (key == "grid.S") grid.S = static_cast<int>(to_int(key, value));
    else if (key == "grid.x_range") {
      const auto v = to_doubles(key, value, 2);
      grid.x_min = v[0];
      grid.x_max = v[1];
    } else if (key == "grid.y_range") {
      const auto v = to_doubles(key, value, 2);
      grid.y_min = v[0];
      grid.y_max = v[1];
    } else if (key == "grid.z_range") {
      const auto v = to_doubles(key, value, 2);
      grid.z_min = v[0];
      grid.z_max = v[1];
    } else if (key == "grid.dim_max") {
      const auto v = to_doubles(key, value, 3);
      grid.w_max = v[0];
      grid.h_max = v[1];
      grid.l_max = v[2];
    } else if (key == "net.input_size") network.input_size = static_cast<int>(to_int(key, value));
    else if (key == "net.backbone") network.backbone = parse_backbone(value);
    else if (key == "net.blocks") network.blocks = parse_blocks(value);
    else if (key == "net.head_block") {
      const auto b = parse_blocks(value);
      if (b.size() != 1) throw ConfigError("config key 'net.head_block': expected one filters:kernel pair");
      network.head_block = b[0];
    } else if (key == "net.depthwise_k7") network.depthwise_k7 = to_bool(key, value);
    else if (key == "classes") {
      classes.names = split_list(value);
      grid.num_classes = network.num_classes = static_cast<int>(classes.names.size());
    } else if (key == "loss.obj") weights.obj = to_double(key, value);
    else if (key == "loss.noobj") weights.noobj = to_double(key, value);
    else if (key == "loss.cls") weights.cls = to_double(key, value);
    else if (key == "loss.iou") weights.iou = to_double(key, value);
    else if (key == "loss.yaw") weights.yaw = to_double(key, value);
    else if (key == "checkpoint_every") checkpoint_every = static_cast<int>(to_int(key, value));
    else if (key == "val_every") val_every = static_cast<int>(to_int(key, value));
    else if (key == "max_train_frames") max_train_frames = static_cast<int>(to_int(key, value));
    else if (key == "threshold") threshold = to_double(key, value);
    else if (key == "nms_iou") nms_iou = to_optional(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const ArgumentError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (flip_prob < 0.0 || flip_prob > 1.0 || contrast_prob < 0.0 || contrast_prob > 1.0) {
    throw ConfigError("augmentation probabilities must lie in [0, 1]");
  }
  if (!(contrast_min > 0.0) || contrast_max < contrast_min) {
    throw ConfigError("contrast range must satisfy 0 < contrast_min <= contrast_max");
  }
  if (classes.names.empty()) throw ConfigError("classes must name at least one class");
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("grad_clip must be positive or off");
  if (checkpoint_every < 0 || val_every < 0 || max_train_frames < 0) {
    throw ConfigError("checkpoint_every, val_every and max_train_frames must be >= 0");
  }
  if (!(threshold >= 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in [0, 1)");
  try {
    grid.validate();
    network.validate();
    weights.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  if (grid.S != network.grid_side()) {
    throw ConfigError("grid.S = " + std::to_string(grid.S) + " does not match net.input_size / 32 = " +
                      std::to_string(network.grid_side()));
  }
}

std::string TrainConfig::echo() const {
  std::ostringstream out;
  std::string class_list;
  for (std::size_t i = 0; i < classes.names.size(); ++i) class_list += (i ? "," : "") + classes.names[i];
  out << "data_root = " << data_root << '\n'
      << "split_dir = " << split_dir << '\n'
      << "output_dir = " << output_dir << '\n'
      << "learning_rate = " << fmt(learning_rate) << '\n'
      << "weight_decay = " << fmt(weight_decay) << '\n'
      << "batch_size = " << batch_size << '\n'
      << "epochs = " << epochs << '\n'
      << "seed = " << seed << '\n'
      << "cosine_schedule = " << (cosine_schedule ? "true" : "false") << '\n'
      << "grad_clip = " << fmt_optional(grad_clip) << '\n'
      << "augment_flip = " << (augment_flip ? "true" : "false") << '\n'
      << "augment_contrast = " << (augment_contrast ? "true" : "false") << '\n'
      << "flip_prob = " << fmt(flip_prob) << '\n'
      << "contrast_prob = " << fmt(contrast_prob) << '\n'
      << "contrast_min = " << fmt(contrast_min) << '\n'
      << "contrast_max = " << fmt(contrast_max) << '\n'
      << "init_head_prior = " << (init_head_prior ? "true" : "false") << '\n'
      << "classes = " << class_list << '\n'
      << grid_echo(grid)
      << "net.input_size = " << network.input_size << '\n'
      << "net.backbone = " << to_string(network.backbone) << '\n'
      << "net.blocks = " << format_blocks(network.blocks) << '\n'
      << "net.head_block = " << format_blocks({network.head_block}) << '\n'
      << "net.depthwise_k7 = " << (network.depthwise_k7 ? "true" : "false") << '\n'
      << "loss.obj = " << fmt(weights.obj) << '\n'
      << "loss.noobj = " << fmt(weights.noobj) << '\n'
      << "loss.cls = " << fmt(weights.cls) << '\n'
      << "loss.iou = " << fmt(weights.iou) << '\n'
      << "loss.yaw = " << fmt(weights.yaw) << '\n'
      << "checkpoint_every = " << checkpoint_every << '\n'
      << "val_every = " << val_every << '\n'
      << "max_train_frames = " << max_train_frames << '\n'
      << "threshold = " << fmt(threshold) << '\n'
      << "nms_iou = " << fmt_optional(nms_iou) << '\n';
  return out.str();
}

std::filesystem::path TrainConfig::resolved_data_root() const {
  if (!data_root.empty()) return data_root;
  if (const char* env = std::getenv(kDataRootEnv); env && *env) return env;
  throw ConfigError(std::string("no dataset root: set data_root or ") + kDataRootEnv);
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("config line " + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  for (const auto& [key, value] : parse_key_values(text)) cfg.set(key, value);
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string grid_echo(const GridSpec& g) {
  std::ostringstream out;
  out << "grid.S = " << g.S << '\n'
      << "grid.x_range = " << fmt(g.x_min) << "," << fmt(g.x_max) << '\n'
      << "grid.y_range = " << fmt(g.y_min) << "," << fmt(g.y_max) << '\n'
      << "grid.z_range = " << fmt(g.z_min) << "," << fmt(g.z_max) << '\n'
      << "grid.dim_max = " << fmt(g.w_max) << "," << fmt(g.h_max) << "," << fmt(g.l_max) << '\n';
  return out.str();
}

std::string model_echo(const TrainConfig& cfg) {
  std::string class_list;
  for (std::size_t i = 0; i < cfg.classes.names.size(); ++i) class_list += (i ? "," : "") + cfg.classes.names[i];
  return cfg.network.echo() + grid_echo(cfg.grid) + "classes = " + class_list + '\n';
}

}  // namespace mononext
