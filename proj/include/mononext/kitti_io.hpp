#pragma once

// KITTI object-detection files: labels, P2 calibration, split lists, frames,
// and the two training augmentations (horizontal flip, contrast boost).

#include <array>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mononext/geometry.hpp"
#include "mononext/image.hpp"

namespace mononext {

struct LabelRecord {
  std::string class_name;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox2d{};  // left, top, right, bottom
  std::array<double, 3> dims{};    // h, w, l
  std::array<double, 3> location{};  // x, y (bottom of box), z
  double rotation_y = 0.0;
  std::optional<double> score;

  bool operator==(const LabelRecord&) const = default;
};

/// `line_number` only decorates error messages.
LabelRecord parse_label_line(std::string_view line, int line_number = 1);
std::string format_label_line(const LabelRecord& record);

std::vector<LabelRecord> parse_label_file(const std::filesystem::path& path);
void write_label_file(const std::filesystem::path& path, const std::vector<LabelRecord>& records);

struct CalibBundle {
  std::array<double, 12> p2{};  // row-major 3x4

  double at(int row, int col) const { return p2[row * 4 + col]; }
  /// Pixel coordinates of a camera-frame point, or nullopt when the point
  /// does not lie in front of the camera.
  std::optional<std::array<double, 2>> project(const Vec3& point) const;
  bool operator==(const CalibBundle&) const = default;
};

CalibBundle parse_calib_text(std::string_view text);
CalibBundle parse_calib(const std::filesystem::path& path);
void write_calib(const std::filesystem::path& path, const CalibBundle& calib);

enum class Difficulty { Easy = 0, Moderate = 1, Hard = 2, Ignored = 3 };
const char* to_string(Difficulty level);

Difficulty assign_difficulty(const LabelRecord& record);

struct Frame {
  std::string frame_id;
  Image image;
  std::vector<LabelRecord> labels;
  CalibBundle calib;
};

/// `root` holds image_2/, label_2/ and calib/ (the KITTI "training" folder).
Frame load_frame(const std::filesystem::path& root, const std::string& frame_id);
void save_frame(const std::filesystem::path& root, const Frame& frame);
/// Sorted frame ids that have a label file under root/label_2.
std::vector<std::string> list_frames(const std::filesystem::path& root);

struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

std::vector<std::string> read_id_file(const std::filesystem::path& path);
void write_id_file(const std::filesystem::path& path, const std::vector<std::string>& ids);

/// Reads train.txt and val.txt from `image_set_dir` and keeps the ids present
/// in `available`. Ids listed in both files stay in train only.
SplitSpec make_split(const std::filesystem::path& image_set_dir,
                     const std::vector<std::string>& available);

/// Seeded shuffle-and-cut split over `ids` (used for the 80/20 configuration).
SplitSpec make_seeded_split(std::vector<std::string> ids, double train_fraction,
                            std::uint64_t seed);

/// Mirrors the image left-right and transforms labels and P2 to match.
Frame flip_frame(const Frame& frame);

/// Per-channel contrast stretch about the image mean. Throws on factor <= 0.
Image adjust_contrast(const Image& image, double factor);

/// KITTI class names mapped to contiguous class ids.
struct ClassMap {
  std::vector<std::string> names{"Car"};
  std::optional<int> id_of(std::string_view name) const;
};

/// Converts a label to the internal box (center y shifted up by h/2).
BoxSpec label_to_box(const LabelRecord& record, int class_id);

/// Converts a box back to a KITTI record; bbox2d is the projected corner hull
/// clipped to the image, or all zeros when the box is behind the camera.
LabelRecord box_to_label(const BoxSpec& box, const std::string& class_name,
                         const CalibBundle& calib, int image_width, int image_height);

}  // namespace mononext
