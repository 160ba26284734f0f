#include "mononext/visualize.hpp"

#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "mononext/error.hpp"

namespace mononext {

namespace {

// BGR, as OpenCV writes it.
const cv::Scalar kGreen(0, 200, 0);
const cv::Scalar kBlue(255, 80, 0);
const cv::Scalar kBlack(0, 0, 0);

constexpr double kPixelsPerMeter = 8.0;
constexpr double kBehindMargin = 10.0;

cv::Point to_point(double u, double v) {
  return {static_cast<int>(std::lround(u)), static_cast<int>(std::lround(v))};
}

bool draw_wireframe(cv::Mat& img, const BoxSpec& box, const CalibBundle& calib, const cv::Scalar& color) {
  const auto corners = box_corners_3d(box);
  std::array<cv::Point, 8> px;
  for (int i = 0; i < 8; ++i) {
    if (!(corners[i].z > 0.0)) return false;
    const auto uv = calib.project(corners[i]);
    if (!uv) return false;
    px[i] = to_point((*uv)[0], (*uv)[1]);
  }
  for (int i = 0; i < 4; ++i) {
    cv::line(img, px[i], px[(i + 1) % 4], color, 2, cv::LINE_AA);
    cv::line(img, px[4 + i], px[4 + (i + 1) % 4], color, 2, cv::LINE_AA);
    cv::line(img, px[i], px[4 + i], color, 2, cv::LINE_AA);
  }
  // Cross on the front face marks the heading.
  cv::line(img, px[0], px[5], color, 1, cv::LINE_AA);
  cv::line(img, px[1], px[4], color, 1, cv::LINE_AA);
  return true;
}

struct BevCanvas {
  double x_min, z_min, z_max;
  cv::Mat img;

  cv::Point map(double x, double z) const {
    return to_point((x - x_min) * kPixelsPerMeter, (z_max - z) * kPixelsPerMeter);
  }
  bool contains(const cv::Point& p) const { return p.x >= 0 && p.y >= 0 && p.x < img.cols && p.y < img.rows; }
};

bool draw_footprint(BevCanvas& canvas, const BoxSpec& box, const cv::Scalar& color) {
  std::vector<cv::Point> pts;
  bool visible = false;
  for (const auto& c : box_to_bev_corners(box)) {
    pts.push_back(canvas.map(c.x, c.z));
    visible = visible || canvas.contains(pts.back());
  }
  if (!visible) return false;
  cv::polylines(canvas.img, pts, true, color, 2, cv::LINE_AA);
  cv::line(canvas.img, pts[0], pts[1], color, 4, cv::LINE_AA);  // front edge
  return true;
}

void write_png(const std::filesystem::path& path, const cv::Mat& img) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), img);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

}  // namespace

VisualizeResult visualize(const Frame& frame, const std::vector<BoxSpec>& dets, const std::vector<BoxSpec>& gts,
                          const std::filesystem::path& out_dir, const GridSpec& grid) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());
  VisualizeResult res;

  cv::Mat camera(frame.image.height, frame.image.width, CV_8UC3);
  if (!frame.image.empty()) {
    cv::Mat rgb(frame.image.height, frame.image.width, CV_8UC3, const_cast<std::uint8_t*>(frame.image.pixels.data()));
    cv::cvtColor(rgb, camera, cv::COLOR_RGB2BGR);
  }
  for (const auto& b : gts) res.camera_gt += draw_wireframe(camera, b, frame.calib, kGreen);
  for (const auto& b : dets) res.camera_pred += draw_wireframe(camera, b, frame.calib, kBlue);
  res.camera_path = out_dir / (frame.frame_id + "_camera.png");
  if (!camera.empty()) write_png(res.camera_path, camera);

  BevCanvas bev{grid.x_min, std::min(grid.z_min, 0.0) - kBehindMargin, grid.z_max, {}};
  const int w = static_cast<int>(std::ceil((grid.x_max - grid.x_min) * kPixelsPerMeter)) + 1;
  const int h = static_cast<int>(std::ceil((bev.z_max - bev.z_min) * kPixelsPerMeter)) + 1;
  bev.img = cv::Mat(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
  for (int i = 0; i <= grid.S; ++i) {
    const double x = grid.x_min + (grid.x_max - grid.x_min) * i / grid.S;
    const double z = grid.z_min + (grid.z_max - grid.z_min) * i / grid.S;
    cv::line(bev.img, bev.map(x, grid.z_min), bev.map(x, grid.z_max), cv::Scalar(225, 225, 225), 1);
    cv::line(bev.img, bev.map(grid.x_min, z), bev.map(grid.x_max, z), cv::Scalar(225, 225, 225), 1);
  }
  const cv::Point ego = bev.map(0.0, 0.0);
  const std::vector<cv::Point> ego_marker{ego + cv::Point(0, -10), ego + cv::Point(-7, 6), ego + cv::Point(7, 6)};
  cv::fillConvexPoly(bev.img, ego_marker, kBlack, cv::LINE_AA);
  for (const auto& b : gts) res.bev_gt += draw_footprint(bev, b, kGreen);
  for (const auto& b : dets) res.bev_pred += draw_footprint(bev, b, kBlue);
  res.bev_path = out_dir / (frame.frame_id + "_bev.png");
  write_png(res.bev_path, bev.img);
  return res;
}

}  // namespace mononext
