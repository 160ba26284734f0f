#include "mononext/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include <opencv2/imgproc.hpp>

#include "mononext/error.hpp"

namespace mononext {

namespace {

using Rgb = std::array<double, 3>;

cv::Scalar to_scalar(const Rgb& c, double shade) {
  return cv::Scalar(std::clamp(c[0] * shade, 0.0, 255.0), std::clamp(c[1] * shade, 0.0, 255.0),
                    std::clamp(c[2] * shade, 0.0, 255.0));
}

void paint_background(cv::Mat& img, const CalibBundle& calib, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-15.0, 15.0);
  const double sky_shift = jitter(rng);
  const double road_shift = jitter(rng);
  const int horizon = static_cast<int>(std::round(calib.at(1, 2)));
  std::uniform_int_distribution<int> noise(-6, 6);
  for (int r = 0; r < img.rows; ++r) {
    auto* row = img.ptr<cv::Vec3b>(r);
    for (int c = 0; c < img.cols; ++c) {
      double base[3];
      if (r < horizon) {
        const double t = static_cast<double>(r) / std::max(horizon, 1);
        base[0] = 120 + 60 * t + sky_shift;
        base[1] = 160 + 40 * t + sky_shift;
        base[2] = 215 + 20 * t + sky_shift;
      } else {
        base[0] = base[1] = base[2] = 95 + road_shift;
      }
      const int n = noise(rng);
      for (int ch = 0; ch < 3; ++ch) row[c][ch] = cv::saturate_cast<std::uint8_t>(base[ch] + n);
    }
  }
  // Lane markings at fixed lateral offsets give a depth cue.
  for (double lane_x : {-5.4, -1.8, 1.8, 5.4}) {
    std::vector<cv::Point> pts;
    for (double z = 2.0; z <= 90.0; z += 2.0) {
      if (const auto uv = calib.project({lane_x, 1.65, z})) {
        pts.emplace_back(static_cast<int>(std::round((*uv)[0])), static_cast<int>(std::round((*uv)[1])));
      }
    }
    cv::polylines(img, pts, false, cv::Scalar(230, 230, 230), 2, cv::LINE_AA);
  }
}

void paint_box(cv::Mat& img, const BoxSpec& box, const CalibBundle& calib, const Rgb& body) {
  const auto corners = box_corners_3d(box);
  // Corners 0/1 and 4/5 are the front (+l/2) edge of the footprint.
  struct Face {
    std::array<int, 4> idx;
    Rgb color;
    double shade;
  };
  const std::array<Face, 5> faces{{
      {{0, 1, 5, 4}, {250, 240, 170}, 1.0},  // front: light
      {{2, 3, 7, 6}, {200, 40, 40}, 1.0},    // back: tail lights
      {{1, 2, 6, 5}, body, 0.75},
      {{3, 0, 4, 7}, body, 0.75},
      {{4, 5, 6, 7}, body, 1.0},
  }};
  std::vector<std::pair<double, const Face*>> order;
  for (const auto& f : faces) {
    double d = 0.0;
    for (int i : f.idx) {
      const auto& p = corners[i];
      d += std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    }
    order.emplace_back(d, &f);
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [dist, face] : order) {
    std::vector<cv::Point> pts;
    for (int i : face->idx) {
      const auto uv = calib.project(corners[i]);
      if (!uv) return;
      pts.emplace_back(static_cast<int>(std::round((*uv)[0])), static_cast<int>(std::round((*uv)[1])));
    }
    cv::fillConvexPoly(img, pts, to_scalar(face->color, face->shade), cv::LINE_AA);
    cv::polylines(img, pts, true, to_scalar(face->color, face->shade * 0.5), 1, cv::LINE_AA);
  }
}

double sample_yaw(std::mt19937_64& rng) {
  std::discrete_distribution<int> heading({35, 35, 15, 15});
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  constexpr double pi = std::numbers::pi;
  const std::array<double, 4> base{pi / 2, -pi / 2, 0.0, pi};
  return normalize_angle(base[heading(rng)] + jitter(rng));
}

}  // namespace

CalibBundle kitti_reference_calib() {
  return CalibBundle{{7.215377e+02, 0.0, 6.095593e+02, 4.485728e+01, 0.0, 7.215377e+02, 1.728540e+02,
                      2.163791e-01, 0.0, 0.0, 1.0, 2.745884e-03}};
}

Frame make_synthetic_frame(const std::string& frame_id, std::mt19937_64& rng, const SyntheticOptions& opts) {
  if (opts.min_objects < 0 || opts.max_objects < opts.min_objects) {
    throw ArgumentError("synthetic: need 0 <= min_objects <= max_objects");
  }
  Frame frame;
  frame.frame_id = frame_id;
  frame.calib = kitti_reference_calib();

  std::uniform_int_distribution<int> count_dist(opts.min_objects, opts.max_objects);
  std::uniform_real_distribution<double> xs(-opts.x_half_width, opts.x_half_width);
  std::uniform_real_distribution<double> zs(opts.z_min, opts.z_max);
  std::uniform_real_distribution<double> hs(1.4, 1.7), ws(1.55, 1.85), ls(3.4, 4.5);
  std::uniform_real_distribution<double> hue(0.0, 255.0);

  const int wanted = count_dist(rng);
  std::vector<BoxSpec> boxes;
  std::set<std::pair<int, int>> used_cells;
  std::vector<std::array<double, 4>> rects;
  for (int attempt = 0; attempt < 200 && static_cast<int>(boxes.size()) < wanted; ++attempt) {
    BoxSpec b;
    b.h = hs(rng);
    b.w = ws(rng);
    b.l = ls(rng);
    b.yaw = sample_yaw(rng);
    b.center = {xs(rng), opts.camera_height - 0.5 * b.h, zs(rng)};
    const std::pair<int, int> cell{static_cast<int>(std::floor(b.center.z / opts.cell_z)),
                                   static_cast<int>(std::floor((b.center.x - opts.x_origin) / opts.cell_x))};
    if (used_cells.contains(cell)) continue;
    // Fully inside the image, so labels carry no truncation.
    const auto rec = box_to_label(b, "Car", frame.calib, opts.width, opts.height);
    bool inside = true;
    for (const auto& corner : box_corners_3d(b)) {
      const auto uv = frame.calib.project(corner);
      if (!uv || (*uv)[0] < 1.0 || (*uv)[0] > opts.width - 1.0 || (*uv)[1] < 1.0 ||
          (*uv)[1] > opts.height - 1.0) {
        inside = false;
      }
    }
    if (!inside || rec.bbox2d[3] - rec.bbox2d[1] < 26.0) continue;
    BoxSpec padded = b;
    padded.w += 1.0;
    padded.l += 1.0;
    const bool overlaps = std::any_of(boxes.begin(), boxes.end(), [&](const BoxSpec& o) {
      BoxSpec po = o;
      po.w += 1.0;
      po.l += 1.0;
      return bev_iou(padded, po) > 0.0;
    });
    if (overlaps) continue;
    // Keep every car mostly visible: little 2D overlap with earlier ones.
    const bool hidden = std::any_of(rects.begin(), rects.end(), [&](const std::array<double, 4>& o) {
      const double iw = std::min(o[2], rec.bbox2d[2]) - std::max(o[0], rec.bbox2d[0]);
      const double ih = std::min(o[3], rec.bbox2d[3]) - std::max(o[1], rec.bbox2d[1]);
      if (iw <= 0.0 || ih <= 0.0) return false;
      const double inter = iw * ih;
      const double area_a = (o[2] - o[0]) * (o[3] - o[1]);
      const double area_b = (rec.bbox2d[2] - rec.bbox2d[0]) * (rec.bbox2d[3] - rec.bbox2d[1]);
      return inter > 0.2 * std::min(area_a, area_b);
    });
    if (hidden) continue;
    used_cells.insert(cell);
    rects.push_back(rec.bbox2d);
    boxes.push_back(b);
  }

  cv::Mat img(opts.height, opts.width, CV_8UC3);
  paint_background(img, frame.calib, rng);
  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return boxes[a].center.z > boxes[b].center.z; });
  std::vector<Rgb> colors;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double h = hue(rng);
    colors.push_back({60 + 0.6 * h, 60 + 0.6 * (255 - h), 90 + 0.4 * std::fmod(h * 7.0, 255.0)});
  }
  for (std::size_t i : order) paint_box(img, boxes[i], frame.calib, colors[i]);

  frame.image = Image(opts.width, opts.height);
  std::copy(img.data, img.data + frame.image.pixels.size(), frame.image.pixels.begin());
  for (const auto& b : boxes) frame.labels.push_back(box_to_label(b, "Car", frame.calib, opts.width, opts.height));
  return frame;
}

std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root, int count,
                                                 std::uint64_t seed, const SyntheticOptions& opts) {
  if (count < 0) throw ArgumentError("synthetic: frame count must be >= 0");
  std::mt19937_64 rng(seed);
  std::vector<std::string> ids;
  for (int i = 0; i < count; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "%06d", i);
    save_frame(root, make_synthetic_frame(id, rng, opts));
    ids.emplace_back(id);
  }
  return ids;
}

}  // namespace mononext
