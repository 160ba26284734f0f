#pragma once

// Training/prediction configuration. Files hold one `key = value` per line;
// `#` starts a comment. Unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mononext/grid_codec.hpp"
#include "mononext/kitti_io.hpp"
#include "mononext/loss.hpp"
#include "mononext/network.hpp"

namespace mononext {

inline constexpr const char* kDataRootEnv = "MONONEXT_DATA_ROOT";

struct TrainConfig {
  std::string data_root;   // KITTI "training" folder; falls back to $MONONEXT_DATA_ROOT
  std::string split_dir;   // holds train.txt / val.txt; empty means every frame trains
  std::string output_dir = "runs/default";

  double learning_rate = 1e-4;
  double weight_decay = 1e-6;
  int batch_size = 8;
  int epochs = 200;
  std::uint64_t seed = 0;
  bool cosine_schedule = false;
  std::optional<double> grad_clip;

  bool augment_flip = true;
  bool augment_contrast = true;
  double flip_prob = 0.5;
  double contrast_prob = 0.5;
  double contrast_min = 1.0;
  double contrast_max = 1.5;

  /// Start the position, dimension and yaw head biases at the mean training
  /// target instead of zero.
  bool init_head_prior = true;

  GridSpec grid;
  NetworkConfig network;
  LossWeights weights;
  ClassMap classes;

  int checkpoint_every = 10;  // epochs; 0 keeps only the final and best checkpoints
  int val_every = 1;          // epochs; 0 disables validation
  int max_train_frames = 0;   // 0 = no limit
  double threshold = 0.5;
  std::optional<double> nms_iou = 0.3;

  /// Applies one key. Throws ConfigError on an unknown key or a bad value.
  void set(const std::string& key, const std::string& value);
  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
  /// Every key in canonical form, loadable by parse_config.
  std::string echo() const;
  /// data_root, or the environment fallback when empty.
  std::filesystem::path resolved_data_root() const;
};

/// `key = value` pairs in file order. Throws ParseError naming the line.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

std::string grid_echo(const GridSpec& g);
/// What a checkpoint must agree with: network, grid and class names.
std::string model_echo(const TrainConfig& cfg);

}  // namespace mononext
