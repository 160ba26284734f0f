#pragma once

// Bird's-eye-view grid targets.
//
// A GridTensor holds S x S cells, each with 1 + C + 7 channels laid out as
//   [conf | class_0 .. class_{C-1} | tx ty tz | tw th tl | tyaw]
// Rows index depth (z), columns index lateral position (x). Every channel is
// in [0, 1]: tx and tz are offsets inside the cell, ty is relative to the
// vertical range, dimensions are divided by dim_max, and yaw is mapped
// linearly from (-pi, pi] onto (0, 1].

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mononext/geometry.hpp"

namespace mononext {

struct GridSpec {
  int S = 15;
  double x_min = -55.0, x_max = 55.0;
  double y_min = -2.0, y_max = 13.0;
  double z_min = 0.0, z_max = 85.0;
  double w_max = 4.0, h_max = 4.0, l_max = 8.0;
  int num_classes = 1;

  int channels() const { return 1 + num_classes + 7; }
  int class_channel(int c) const { return 1 + c; }
  int pos_channel() const { return 1 + num_classes; }  // tx, ty, tz
  int dim_channel() const { return 4 + num_classes; }  // tw, th, tl
  int yaw_channel() const { return 7 + num_classes; }

  /// Throws ArgumentError when an invariant does not hold.
  void validate() const;
  bool operator==(const GridSpec&) const = default;
};

struct CellIndex {
  int row = 0;  // depth
  int col = 0;  // lateral
  bool operator==(const CellIndex&) const = default;
};

class GridTensor {
 public:
  GridTensor() = default;
  GridTensor(int S, int num_classes);
  explicit GridTensor(const GridSpec& g) : GridTensor(g.S, g.num_classes) {}

  int side() const { return S_; }
  int num_classes() const { return C_; }
  int channels() const { return 1 + C_ + 7; }
  int cells() const { return S_ * S_; }

  double& at(int row, int col, int ch) { return values_[index(row, col, ch)]; }
  double at(int row, int col, int ch) const { return values_[index(row, col, ch)]; }
  std::span<double> cell(int row, int col) {
    return {values_.data() + index(row, col, 0), static_cast<std::size_t>(channels())};
  }
  std::span<const double> cell(int row, int col) const {
    return {values_.data() + index(row, col, 0), static_cast<std::size_t>(channels())};
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool matches(const GridSpec& g) const { return S_ == g.S && C_ == g.num_classes; }
  bool same_shape(const GridTensor& other) const { return S_ == other.S_ && C_ == other.C_; }
  bool operator==(const GridTensor&) const = default;

 private:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * S_ + col) * channels() + ch;
  }
  int S_ = 0;
  int C_ = 0;
  std::vector<double> values_;
};

/// Cell containing (x, z); coordinates exactly on the upper bound fall in the
/// last cell, anything outside the ranges gives nullopt.
std::optional<CellIndex> cell_index(double x, double z, const GridSpec& g);

/// Objects whose center lies outside the x, y or z range are skipped. When
/// several objects share a cell the one with the smallest z is kept.
GridTensor encode(std::span<const BoxSpec> objects, const GridSpec& g);

/// Inverts the encoding for one cell; the returned box has no score set.
BoxSpec decode_cell(std::span<const double> cell, int row, int col, const GridSpec& g);

struct DecodeOptions {
  double threshold = 0.5;
  std::optional<double> nms_iou = 0.3;
};

/// Cells with conf > threshold become boxes scored by their confidence,
/// optionally thinned by greedy rotated-BEV NMS, sorted by descending score.
std::vector<BoxSpec> decode(const GridTensor& t, const GridSpec& g, const DecodeOptions& opts);

/// Greedy suppression over boxes already sorted by descending score.
std::vector<BoxSpec> nms_bev(std::vector<BoxSpec> boxes, double iou_threshold);

}  // namespace mononext
