#pragma once

// Training and prediction drivers.

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mononext/config.hpp"
#include "mononext/evaluator.hpp"
#include "mononext/network.hpp"
#include "mononext/tensor.hpp"

namespace mononext {

struct StepRecord {
  int epoch = 0;
  long step = 0;
  LossBreakdown loss;  // batch mean
  double seconds = 0.0;
  std::vector<std::string> frame_ids;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown mean_loss;
  std::optional<double> val_recognition;
  std::optional<double> val_ap50;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::vector<std::filesystem::path> checkpoints;
  std::optional<std::filesystem::path> best_checkpoint;
  std::filesystem::path final_checkpoint;
};

struct TrainHooks {
  /// Stop after this many optimizer steps (0 = run every epoch).
  long max_steps = 0;
  std::function<void(const StepRecord&)> on_step;
};

/// One training example after augmentation, resizing and target encoding.
struct Sample {
  std::string frame_id;
  std::vector<float> input;  // input_size^2 * 3, interleaved RGB in [0, 1]
  GridTensor target;
};

/// Ground-truth boxes of the configured classes; other labels are dropped.
std::vector<BoxSpec> target_boxes(const std::vector<LabelRecord>& labels, const ClassMap& classes);

/// Applies flip/contrast per the config (drawing from `rng`), resizes and encodes.
Sample prepare_sample(const Frame& frame, const TrainConfig& cfg, std::mt19937_64* rng);

/// Mean of the position, dimension and yaw channels over responsible cells,
/// nullopt when no target holds an object.
std::optional<std::array<double, 7>> mean_box_target(const std::vector<GridTensor>& targets, const GridSpec& g);

/// Sets the pos/dim/yaw head biases so the initial sigmoid outputs equal `mean`.
void apply_head_prior(MonoNext& model, const std::array<double, 7>& mean);

Tensor stack_inputs(const std::vector<Sample>& samples, int input_size);

/// Writes steps.tsv, epochs.tsv, config.txt and checkpoints under cfg.output_dir.
TrainLog train(const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Reads the step rows of a steps.tsv file.
std::vector<StepRecord> read_step_log(const std::filesystem::path& path);

struct PredictOptions {
  double threshold = 0.5;
  std::optional<double> nms_iou = 0.3;
  int batch_size = 8;
};

/// Builds the model described by `cfg` and loads `checkpoint`, refusing on a
/// config mismatch.
MonoNext load_model(const std::filesystem::path& checkpoint, const TrainConfig& cfg);
/// The stored config of a checkpoint applied over `base` (network, grid, classes).
TrainConfig config_from_checkpoint(const std::filesystem::path& checkpoint, TrainConfig base = {});

std::map<std::string, std::vector<BoxSpec>> predict_frames(MonoNext& model, const std::vector<Frame>& frames,
                                                           const GridSpec& grid, const PredictOptions& opts);

/// One KITTI detection file per frame (16 fields, bottom-anchored y).
void write_predictions(const std::filesystem::path& out_dir, const std::vector<Frame>& frames,
                       const std::map<std::string, std::vector<BoxSpec>>& boxes, const ClassMap& classes);

/// Detections keyed by frame for the evaluator, using the frame's image size
/// for the projected 2D boxes.
std::map<std::string, std::vector<Detection>> to_detections(const std::vector<Frame>& frames,
                                                            const std::map<std::string, std::vector<BoxSpec>>& boxes);
std::vector<EvalFrame> to_eval_frames(const std::vector<Frame>& frames, const EvalClasses& classes);

std::vector<Frame> load_frames(const std::filesystem::path& root, const std::vector<std::string>& ids);

}  // namespace mononext
