#include "mononext/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "mononext/error.hpp"

namespace mononext {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.z - o.z) - (a.z - o.z) * (b.x - o.x);
}

BevPolygon ccw(const BevPolygon& poly) {
  if (signed_area(poly) >= 0.0) return poly;
  return BevPolygon(poly.rbegin(), poly.rend());
}

// Clips `subject` by the half-planes of the CCW convex polygon `clip`.
BevPolygon clip_convex(const BevPolygon& subject, const BevPolygon& clip) {
  BevPolygon output = subject;
  const std::size_t n = clip.size();
  for (std::size_t e = 0; e < n && !output.empty(); ++e) {
    const Point2& e0 = clip[e];
    const Point2& e1 = clip[(e + 1) % n];
    BevPolygon input;
    input.swap(output);
    const std::size_t m = input.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Point2& cur = input[i];
      const Point2& prev = input[(i + m - 1) % m];
      const double dc = cross(e0, e1, cur);
      const double dp = cross(e0, e1, prev);
      auto intersect = [&] {
        const double t = dp / (dp - dc);
        return Point2{prev.x + t * (cur.x - prev.x), prev.z + t * (cur.z - prev.z)};
      };
      if (dc >= 0.0) {
        if (dp < 0.0) output.push_back(intersect());
        output.push_back(cur);
      } else if (dp > 0.0) {
        output.push_back(intersect());
      }
    }
  }
  return output;
}

// Orders a pair canonically so that pairwise ops are exactly symmetric.
bool box_less(const BoxSpec& a, const BoxSpec& b) {
  return std::tie(a.center.x, a.center.z, a.center.y, a.w, a.l, a.h, a.yaw) <
         std::tie(b.center.x, b.center.z, b.center.y, b.w, b.l, b.h, b.yaw);
}

bool same_footprint(const BoxSpec& a, const BoxSpec& b) {
  return a.center.x == b.center.x && a.center.z == b.center.z && a.w == b.w && a.l == b.l &&
         a.yaw == b.yaw;
}

double footprint_intersection(const BoxSpec& a, const BoxSpec& b) {
  if (same_footprint(a, b)) return a.w * a.l;
  const BoxSpec& first = box_less(a, b) ? a : b;
  const BoxSpec& second = box_less(a, b) ? b : a;
  // Cheap rejection on circumscribed circles.
  const double dx = first.center.x - second.center.x;
  const double dz = first.center.z - second.center.z;
  const double ra = 0.5 * std::hypot(first.w, first.l);
  const double rb = 0.5 * std::hypot(second.w, second.l);
  if (dx * dx + dz * dz >= (ra + rb) * (ra + rb)) return 0.0;
  const BevPolygon clipped = clip_convex(box_to_bev_corners(first), box_to_bev_corners(second));
  if (clipped.size() < 3) return 0.0;
  return std::max(0.0, signed_area(clipped));
}

double vertical_overlap(const BoxSpec& a, const BoxSpec& b) {
  const double top = std::max(a.center.y - 0.5 * a.h, b.center.y - 0.5 * b.h);
  const double bottom = std::min(a.center.y + 0.5 * a.h, b.center.y + 0.5 * b.h);
  return std::max(0.0, bottom - top);
}

}  // namespace

double normalize_angle(double theta) {
  if (!std::isfinite(theta)) throw ArgumentError("normalize_angle: non-finite angle");
  double r = std::fmod(theta, kTwoPi);
  if (r > std::numbers::pi) r -= kTwoPi;
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

BevPolygon box_to_bev_corners(const BoxSpec& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  const std::array<Point2, 4> local{{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
  BevPolygon out;
  out.reserve(4);
  for (const auto& p : local) {
    out.push_back({box.center.x + c * p.x + s * p.z, box.center.z - s * p.x + c * p.z});
  }
  return out;
}

std::array<Vec3, 8> box_corners_3d(const BoxSpec& box) {
  const BevPolygon foot = box_to_bev_corners(box);
  std::array<Vec3, 8> out;
  const double bottom = box.center.y + 0.5 * box.h;
  const double top = box.center.y - 0.5 * box.h;
  for (int i = 0; i < 4; ++i) {
    out[i] = {foot[i].x, bottom, foot[i].z};
    out[i + 4] = {foot[i].x, top, foot[i].z};
  }
  return out;
}

double signed_area(const BevPolygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % n];
    acc += p.x * q.z - q.x * p.z;
  }
  return 0.5 * acc;
}

bool is_convex(const BevPolygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  double scale = 0.0;
  for (const auto& p : poly) scale = std::max({scale, std::abs(p.x), std::abs(p.z)});
  const double eps = 1e-12 * std::max(1.0, scale * scale);
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
    if (std::abs(c) <= eps) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0) {
      sign = s;
    } else if (s != sign) {
      return false;
    }
  }
  return sign != 0;
}

double polygon_intersection_area(const BevPolygon& a, const BevPolygon& b) {
  if (!is_convex(a) || !is_convex(b)) {
    throw ArgumentError("polygon_intersection_area: inputs must be convex polygons");
  }
  const BevPolygon clipped = clip_convex(ccw(a), ccw(b));
  if (clipped.size() < 3) return 0.0;
  return std::max(0.0, signed_area(clipped));
}

double bev_iou(const BoxSpec& a, const BoxSpec& b) {
  if (same_footprint(a, b)) return 1.0;
  const double inter = footprint_intersection(a, b);
  const double uni = a.w * a.l + b.w * b.l - inter;
  if (inter <= 0.0 || uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou3d(const BoxSpec& a, const BoxSpec& b) {
  const double dy = vertical_overlap(a, b);
  if (dy <= 0.0) return 0.0;
  if (same_footprint(a, b) && a.center.y == b.center.y && a.h == b.h) return 1.0;
  const double inter = footprint_intersection(a, b) * dy;
  const double uni = a.w * a.l * a.h + b.w * b.l * b.h - inter;
  if (inter <= 0.0 || uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double aabb_iou3d(const BoxSpec& a, const BoxSpec& b) {
  return aabb_iou3d_grad(a, b).iou;
}

AabbIouGrad aabb_iou3d_grad(const BoxSpec& a, const BoxSpec& b) {
  const std::array<double, 3> ca{a.center.x, a.center.y, a.center.z};
  const std::array<double, 3> cb{b.center.x, b.center.y, b.center.z};
  const std::array<double, 3> ea{a.w, a.h, a.l};
  const std::array<double, 3> eb{b.w, b.h, b.l};

  std::array<double, 3> overlap{};
  std::array<double, 3> d_ov_center{};
  std::array<double, 3> d_ov_ext{};
  for (int k = 0; k < 3; ++k) {
    const double a_lo = ca[k] - 0.5 * ea[k];
    const double a_hi = ca[k] + 0.5 * ea[k];
    const double b_lo = cb[k] - 0.5 * eb[k];
    const double b_hi = cb[k] + 0.5 * eb[k];
    const double hi = std::min(a_hi, b_hi);
    const double lo = std::max(a_lo, b_lo);
    if (hi > lo) {
      const bool a_sets_hi = a_hi <= b_hi;
      const bool a_sets_lo = a_lo >= b_lo;
      // Nested intervals use the inner extent so identical boxes give exactly 1.
      if (a_sets_hi && a_sets_lo)
        overlap[k] = ea[k];
      else if (!a_sets_hi && !a_sets_lo)
        overlap[k] = eb[k];
      else
        overlap[k] = hi - lo;
      d_ov_center[k] = (a_sets_hi ? 1.0 : 0.0) - (a_sets_lo ? 1.0 : 0.0);
      d_ov_ext[k] = 0.5 * ((a_sets_hi ? 1.0 : 0.0) + (a_sets_lo ? 1.0 : 0.0));
    }
  }

  AabbIouGrad g;
  const double inter = overlap[0] * overlap[1] * overlap[2];
  const double vol_a = ea[0] * ea[1] * ea[2];
  const double vol_b = eb[0] * eb[1] * eb[2];
  const double uni = vol_a + vol_b - inter;
  if (inter <= 0.0 || uni <= 0.0) return g;
  g.iou = std::min(1.0, inter / uni);

  for (int k = 0; k < 3; ++k) {
    const double others = overlap[(k + 1) % 3] * overlap[(k + 2) % 3];
    const double d_inter_c = others * d_ov_center[k];
    const double d_inter_e = others * d_ov_ext[k];
    const double d_vol_e = ea[(k + 1) % 3] * ea[(k + 2) % 3];
    // d(I/U) with U = Va + Vb - I.
    g.d_center[k] = (d_inter_c * uni + inter * d_inter_c) / (uni * uni);
    g.d_dims[k] = (d_inter_e * uni - inter * (d_vol_e - d_inter_e)) / (uni * uni);
  }
  return g;
}

}  // namespace mononext
