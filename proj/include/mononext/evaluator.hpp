#pragma once

// KITTI-style scoring for one object class.
//
// Detections are matched greedily in descending score; each claims the
// unmatched counted ground truth with the highest IoU at or above the
// threshold. Ground truths harder than the evaluated level, flagged ignore
// (neighbour classes such as Van), or outside the evaluated range neither
// count as misses nor turn detections on them into false positives.
// Unmatched detections mostly inside a DontCare region are ignored as well.

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mononext/geometry.hpp"
#include "mononext/grid_codec.hpp"
#include "mononext/kitti_io.hpp"

namespace mononext {

using Box2d = std::array<double, 4>;  // left, top, right, bottom

struct GroundTruth {
  BoxSpec box;
  Difficulty level = Difficulty::Easy;
  bool ignore = false;
};

struct Detection {
  BoxSpec box;  // box.score holds the confidence
  std::optional<Box2d> bbox2d;
};

enum class DetOutcome { TruePositive, FalsePositive, Ignored };

struct MatchResult {
  std::vector<DetOutcome> outcome;  // per detection, input order
  std::vector<double> score;
  std::vector<double> matched_iou;  // 0 unless a true positive
  std::vector<int> matched_gt;      // -1 unless a true positive
  std::vector<bool> gt_counted;
  std::vector<bool> gt_matched;

  int num_gt() const;
  int num_tp() const;
};

using IouFn = std::function<double(const BoxSpec&, const BoxSpec&)>;

struct MatchOptions {
  double iou_threshold = 0.7;
  /// Require IoU > threshold instead of IoU >= threshold.
  bool strict = false;
  /// Ground truths of a harder level are not counted.
  Difficulty level = Difficulty::Hard;
  std::vector<Box2d> dontcare;
};

MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                             const IouFn& iou_fn, const MatchOptions& opts);

enum class ApProtocol { R11, R40 };
const char* to_string(ApProtocol p);
ApProtocol parse_protocol(const std::string& text);

struct FrameMatches {
  std::string frame_id;
  MatchResult result;
};

/// Interpolated AP over the pooled, score-ranked detections of all frames.
/// nullopt when there is no counted ground truth.
std::optional<double> average_precision(const std::vector<FrameMatches>& frames, ApProtocol protocol);

struct EvalFrame {
  std::string frame_id;
  std::vector<GroundTruth> gts;
  std::vector<Box2d> dontcare;
};

struct LevelMetrics {
  std::optional<double> ap70;
  std::optional<double> ap50;
  double mean_iou = 0.0;
  std::optional<double> recognition;
  int num_gt = 0;
};

struct EvalReport {
  ApProtocol protocol = ApProtocol::R11;
  int frames = 0;
  std::array<LevelMetrics, 3> levels;  // Easy, Moderate, Hard

  /// Human-readable table, percentages for AP and recognition.
  std::string table() const;
  /// One `key = value` per line, values in [0, 1] or "nan" when undefined.
  std::string key_values() const;
};

/// `range`, when given, drops ground truths whose center lies outside the
/// grid's x/z extent from the counts.
EvalReport evaluate(const std::map<std::string, std::vector<Detection>>& predictions,
                    const std::vector<EvalFrame>& ground_truth, ApProtocol protocol,
                    const std::optional<GridSpec>& range = std::nullopt);

struct EvalClasses {
  std::string target = "Car";
  std::vector<std::string> ignored{"Van"};
};

EvalFrame make_eval_frame(const std::string& frame_id, const std::vector<LabelRecord>& labels,
                          const EvalClasses& classes);
std::vector<Detection> make_detections(const std::vector<LabelRecord>& labels, const EvalClasses& classes);

/// Every *.txt file in `dir`, keyed by stem.
std::map<std::string, std::vector<LabelRecord>> load_label_dir(const std::filesystem::path& dir);

}  // namespace mononext
