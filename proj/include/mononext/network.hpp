#pragma once

// The detector: backbone (stride 32) -> ConvNext block schedule -> five task
// heads whose outputs are concatenated into the grid channel layout.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mononext/grid_codec.hpp"
#include "mononext/layers.hpp"

namespace mononext {

enum class BackboneKind { MobileNetV2Like, Tiny };
enum class Task { Conf, Class, Pos, Dim, Yaw };

const char* to_string(BackboneKind kind);
BackboneKind parse_backbone(const std::string& text);
Task parse_task(const std::string& text);

struct BlockSpec {
  int filters = 0;
  int kernel = 0;
  bool operator==(const BlockSpec&) const = default;
};

struct NetworkConfig {
  int input_size = 480;  // square RGB input; must be 32 * grid side
  BackboneKind backbone = BackboneKind::MobileNetV2Like;
  std::vector<BlockSpec> blocks{{512, 3}, {256, 4}, {256, 3}, {128, 3}};
  BlockSpec head_block{256, 1};
  int num_classes = 1;
  bool depthwise_k7 = true;

  int grid_side() const { return input_size / 32; }
  /// Throws ArgumentError on an invalid configuration.
  void validate() const;
  /// Canonical text form; checkpoints store it and compare digests.
  std::string echo() const;
  bool operator==(const NetworkConfig&) const = default;
};

std::string format_blocks(const std::vector<BlockSpec>& blocks);
std::vector<BlockSpec> parse_blocks(const std::string& text);

/// Output channels of the backbone.
int backbone_channels(BackboneKind kind);
int task_channels(Task task, int num_classes);

class MonoNext {
 public:
  MonoNext(const NetworkConfig& cfg, std::uint64_t seed);

  const NetworkConfig& config() const { return cfg_; }

  Tensor backbone_forward(const Tensor& images, bool train = false);
  Tensor feature_extractor_forward(const Tensor& images, bool train = false);
  /// Activated head output in feature-map row order.
  Tensor head_forward(const Tensor& features, Task task, bool train = false);

  /// N x S x S x (1 + C + 7) in grid order: output row r is depth row r, which
  /// reads feature row S - 1 - r (the bottom of the image is the nearest depth).
  Tensor forward(const Tensor& images, bool train = false);
  /// Backpropagates d loss / d forward() output; gradients accumulate.
  void backward(const Tensor& d_output);

  std::vector<GridTensor> to_grids(const Tensor& output) const;
  Tensor grids_to_tensor(const std::vector<GridTensor>& grids) const;

  std::vector<Parameter*> parameters();
  void zero_grad();
  std::size_t parameter_count();

 private:
  void check_input(const Tensor& images) const;
  void initialize(std::uint64_t seed);

  NetworkConfig cfg_;
  Sequential backbone_;
  Sequential trunk_;
  std::array<Sequential, 5> heads_;
  std::array<Tensor, 5> head_outputs_;  // cached activations for backward
};

std::size_t count_parameters(const NetworkConfig& cfg);

}  // namespace mononext
