#pragma once

// Oriented 3D boxes in the KITTI camera frame (x right, y down, z forward).
//
// BoxSpec stores the geometric center of the box. KITTI label files anchor
// location.y at the box bottom; the conversion lives in kitti_io.
//
// Footprint convention: at yaw 0 the length axis points along +x and the width
// axis along +z. A positive yaw rotates the heading from +x towards -z, so the
// heading vector is (cos yaw, -sin yaw) in the (x, z) plane.

#include <array>
#include <optional>
#include <vector>

namespace mononext {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct BoxSpec {
  Vec3 center;
  double w = 1.0;  // across the heading
  double h = 1.0;  // vertical
  double l = 1.0;  // along the heading
  double yaw = 0.0;
  int class_id = 0;
  std::optional<double> score;
};

struct Point2 {
  double x = 0.0;
  double z = 0.0;
};

/// Ordered (x, z) vertices. Boxes always produce counter-clockwise quads.
using BevPolygon = std::vector<Point2>;

/// Maps theta into (-pi, pi]. Throws ArgumentError for non-finite input.
double normalize_angle(double theta);

BevPolygon box_to_bev_corners(const BoxSpec& box);

/// The eight corners: indices 0-3 are the bottom face (largest y), 4-7 the top
/// face, both in footprint order.
std::array<Vec3, 8> box_corners_3d(const BoxSpec& box);

/// Signed shoelace area; positive for counter-clockwise vertex order.
double signed_area(const BevPolygon& poly);
bool is_convex(const BevPolygon& poly);

/// Area of the intersection of two convex polygons. Either orientation is
/// accepted; non-convex input throws ArgumentError. Touching polygons give 0.
double polygon_intersection_area(const BevPolygon& a, const BevPolygon& b);

double bev_iou(const BoxSpec& a, const BoxSpec& b);
double iou3d(const BoxSpec& a, const BoxSpec& b);

/// IoU of the yaw-free axis-aligned boxes with extents w along x, h along y and
/// l along z.
double aabb_iou3d(const BoxSpec& a, const BoxSpec& b);

/// Gradient of aabb_iou3d with respect to the first box.
struct AabbIouGrad {
  double iou = 0.0;
  std::array<double, 3> d_center{};  // d/d(x, y, z)
  std::array<double, 3> d_dims{};    // d/d(w, h, l)
};
AabbIouGrad aabb_iou3d_grad(const BoxSpec& a, const BoxSpec& b);

}  // namespace mononext
