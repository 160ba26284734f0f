#include "mononext/grid_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mononext/error.hpp"

namespace mononext {

namespace {

constexpr double kPi = std::numbers::pi;

int bin(double v, double lo, double hi, int S) {
  const int i = static_cast<int>(std::floor((v - lo) / (hi - lo) * S));
  return std::clamp(i, 0, S - 1);
}

}  // namespace

void GridSpec::validate() const {
  if (S < 1) throw ArgumentError("GridSpec: S must be >= 1");
  if (num_classes < 1) throw ArgumentError("GridSpec: num_classes must be >= 1");
  if (!(x_max > x_min) || !(y_max > y_min) || !(z_max > z_min)) {
    throw ArgumentError("GridSpec: every range must be nonempty");
  }
  if (!(w_max > 0.0) || !(h_max > 0.0) || !(l_max > 0.0)) {
    throw ArgumentError("GridSpec: dim_max must be positive");
  }
}

GridTensor::GridTensor(int S, int num_classes) : S_(S), C_(num_classes) {
  if (S < 1 || num_classes < 1) throw ArgumentError("GridTensor: S and C must be >= 1");
  values_.assign(static_cast<std::size_t>(S) * S * channels(), 0.0);
}

std::optional<CellIndex> cell_index(double x, double z, const GridSpec& g) {
  if (!(x >= g.x_min && x <= g.x_max && z >= g.z_min && z <= g.z_max)) return std::nullopt;
  return CellIndex{bin(z, g.z_min, g.z_max, g.S), bin(x, g.x_min, g.x_max, g.S)};
}

GridTensor encode(std::span<const BoxSpec> objects, const GridSpec& g) {
  g.validate();
  GridTensor t(g);
  std::vector<const BoxSpec*> owner(static_cast<std::size_t>(g.S) * g.S, nullptr);
  for (const BoxSpec& b : objects) {
    if (b.class_id < 0 || b.class_id >= g.num_classes) {
      throw ArgumentError("encode: class id " + std::to_string(b.class_id) + " outside [0, " +
                          std::to_string(g.num_classes) + ")");
    }
    if (!(b.center.y >= g.y_min && b.center.y <= g.y_max)) continue;
    const auto cell = cell_index(b.center.x, b.center.z, g);
    if (!cell) continue;
    const BoxSpec*& slot = owner[static_cast<std::size_t>(cell->row) * g.S + cell->col];
    if (slot == nullptr || b.center.z < slot->center.z) slot = &b;
  }

  for (int row = 0; row < g.S; ++row) {
    for (int col = 0; col < g.S; ++col) {
      const BoxSpec* b = owner[static_cast<std::size_t>(row) * g.S + col];
      if (b == nullptr) continue;
      auto c = t.cell(row, col);
      c[0] = 1.0;
      c[g.class_channel(b->class_id)] = 1.0;
      const int p = g.pos_channel();
      c[p + 0] = std::clamp((b->center.x - g.x_min) / (g.x_max - g.x_min) * g.S - col, 0.0, 1.0);
      c[p + 1] = (b->center.y - g.y_min) / (g.y_max - g.y_min);
      c[p + 2] = std::clamp((b->center.z - g.z_min) / (g.z_max - g.z_min) * g.S - row, 0.0, 1.0);
      const int d = g.dim_channel();
      c[d + 0] = std::clamp(b->w / g.w_max, 0.0, 1.0);
      c[d + 1] = std::clamp(b->h / g.h_max, 0.0, 1.0);
      c[d + 2] = std::clamp(b->l / g.l_max, 0.0, 1.0);
      c[g.yaw_channel()] = (normalize_angle(b->yaw) + kPi) / (2.0 * kPi);
    }
  }
  return t;
}

BoxSpec decode_cell(std::span<const double> c, int row, int col, const GridSpec& g) {
  BoxSpec b;
  const int p = g.pos_channel();
  b.center.x = g.x_min + (col + c[p + 0]) / g.S * (g.x_max - g.x_min);
  b.center.y = g.y_min + c[p + 1] * (g.y_max - g.y_min);
  b.center.z = g.z_min + (row + c[p + 2]) / g.S * (g.z_max - g.z_min);
  const int d = g.dim_channel();
  b.w = c[d + 0] * g.w_max;
  b.h = c[d + 1] * g.h_max;
  b.l = c[d + 2] * g.l_max;
  b.yaw = normalize_angle(c[g.yaw_channel()] * 2.0 * kPi - kPi);
  int best = 0;
  for (int k = 1; k < g.num_classes; ++k) {
    if (c[g.class_channel(k)] > c[g.class_channel(best)]) best = k;
  }
  b.class_id = best;
  return b;
}

std::vector<BoxSpec> nms_bev(std::vector<BoxSpec> boxes, double iou_threshold) {
  std::vector<BoxSpec> kept;
  for (auto& candidate : boxes) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const BoxSpec& k) {
      return bev_iou(k, candidate) > iou_threshold;
    });
    if (!suppressed) kept.push_back(std::move(candidate));
  }
  return kept;
}

std::vector<BoxSpec> decode(const GridTensor& t, const GridSpec& g, const DecodeOptions& opts) {
  if (!t.matches(g)) throw ArgumentError("decode: tensor shape does not match GridSpec");
  std::vector<BoxSpec> boxes;
  for (int row = 0; row < g.S; ++row) {
    for (int col = 0; col < g.S; ++col) {
      const auto c = t.cell(row, col);
      if (!(c[0] > opts.threshold)) continue;
      BoxSpec b = decode_cell(c, row, col, g);
      b.score = c[0];
      boxes.push_back(b);
    }
  }
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const BoxSpec& a, const BoxSpec& b) { return *a.score > *b.score; });
  if (opts.nms_iou) return nms_bev(std::move(boxes), *opts.nms_iou);
  return boxes;
}

}  // namespace mononext
