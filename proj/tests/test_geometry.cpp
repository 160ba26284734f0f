#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mononext/error.hpp"
#include "mononext/geometry.hpp"

using namespace mononext;

namespace {

constexpr double kPi = std::numbers::pi;

BoxSpec make_box(double x, double y, double z, double w, double h, double l, double yaw) {
  BoxSpec b;
  b.center = {x, y, z};
  b.w = w;
  b.h = h;
  b.l = l;
  b.yaw = yaw;
  return b;
}

BevPolygon square(double cx, double cz, double side) {
  double s = side / 2;
  return {{cx - s, cz - s}, {cx + s, cz - s}, {cx + s, cz + s}, {cx - s, cz + s}};
}

// Point-in-footprint by projecting onto the heading axes, independent of the
// corner construction.
bool inside_footprint(const BoxSpec& b, double px, double pz) {
  double dx = px - b.center.x, dz = pz - b.center.z;
  double c = std::cos(b.yaw), s = std::sin(b.yaw);
  double along = dx * c - dz * s;
  double across = dx * s + dz * c;
  return std::abs(along) <= b.l / 2 && std::abs(across) <= b.w / 2;
}

double monte_carlo_bev_iou(const BoxSpec& a, const BoxSpec& b, int samples, std::mt19937_64& rng) {
  double ra = 0.5 * std::hypot(a.w, a.l), rb = 0.5 * std::hypot(b.w, b.l);
  double x0 = std::min(a.center.x - ra, b.center.x - rb), x1 = std::max(a.center.x + ra, b.center.x + rb);
  double z0 = std::min(a.center.z - ra, b.center.z - rb), z1 = std::max(a.center.z + ra, b.center.z + rb);
  std::uniform_real_distribution<double> ux(x0, x1), uz(z0, z1);
  long in_a = 0, in_b = 0, both = 0;
  for (int i = 0; i < samples; ++i) {
    double px = ux(rng), pz = uz(rng);
    bool ia = inside_footprint(a, px, pz), ib = inside_footprint(b, px, pz);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

BoxSpec random_box(std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> pos(-spread, spread), dim(0.5, 6.0), yaw(-kPi, kPi), y(0.0, 2.0);
  return make_box(pos(rng), y(rng), pos(rng), dim(rng), dim(rng), dim(rng), normalize_angle(yaw(rng)));
}

bool same_point_set(BevPolygon a, BevPolygon b, double tol) {
  if (a.size() != b.size()) return false;
  for (const auto& p : a) {
    auto it = std::find_if(b.begin(), b.end(),
                           [&](const Point2& q) { return std::abs(p.x - q.x) < tol && std::abs(p.z - q.z) < tol; });
    if (it == b.end()) return false;
    b.erase(it);
  }
  return true;
}

}  // namespace

TEST(NormalizeAngle, Examples) {
  EXPECT_DOUBLE_EQ(normalize_angle(0.0), 0.0);
  EXPECT_NEAR(normalize_angle(kPi + 0.1), -kPi + 0.1, 1e-12);
  EXPECT_NEAR(normalize_angle(-3 * kPi), kPi, 1e-12);
  EXPECT_NEAR(normalize_angle(kPi), kPi, 0.0);
  EXPECT_NEAR(normalize_angle(-kPi), kPi, 1e-12);
}

TEST(NormalizeAngle, RangeAndCongruence) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 10000; ++i) {
    double t = u(rng);
    double r = normalize_angle(t);
    EXPECT_GT(r, -kPi);
    EXPECT_LE(r, kPi);
    double k = (t - r) / (2 * kPi);
    EXPECT_NEAR(k, std::round(k), 1e-9);
  }
}

TEST(NormalizeAngle, RejectsNonFinite) {
  EXPECT_THROW(normalize_angle(std::nan("")), ArgumentError);
  EXPECT_THROW(normalize_angle(INFINITY), ArgumentError);
}

TEST(BevCorners, AxisAlignedExample) {
  auto poly = box_to_bev_corners(make_box(0, 0, 0, 2, 1, 4, 0));
  BevPolygon expected{{2, -1}, {2, 1}, {-2, 1}, {-2, -1}};
  EXPECT_TRUE(same_point_set(poly, expected, 1e-12));
  EXPECT_GT(signed_area(poly), 0.0);
}

TEST(BevCorners, QuarterTurnSwapsExtents) {
  auto poly = box_to_bev_corners(make_box(0, 0, 0, 2, 1, 4, kPi / 2));
  BevPolygon expected{{1, -2}, {1, 2}, {-1, 2}, {-1, -2}};
  EXPECT_TRUE(same_point_set(poly, expected, 1e-12));
}

TEST(BevCorners, AreaAndOrientationForRandomBoxes) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    BoxSpec b = random_box(rng, 30.0);
    auto poly = box_to_bev_corners(b);
    ASSERT_EQ(poly.size(), 4u);
    EXPECT_NEAR(signed_area(poly), b.w * b.l, 1e-9);
    EXPECT_TRUE(is_convex(poly));
  }
}

TEST(BevCorners, HeadingConvention) {
  // Positive yaw turns the heading from +x towards -z.
  BoxSpec b = make_box(0, 0, 0, 1, 1, 4, kPi / 2);
  auto poly = box_to_bev_corners(b);
  double zmin = 1e9;
  for (const auto& p : poly) zmin = std::min(zmin, p.z);
  EXPECT_NEAR(zmin, -2.0, 1e-12);
}

TEST(Corners3d, BottomFaceHasLargestY) {
  BoxSpec b = make_box(1, 1.0, 10, 1.6, 1.5, 4.0, 0.3);
  auto c = box_corners_3d(b);
  auto poly = box_to_bev_corners(b);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(c[i].y, 1.75, 1e-12);
    EXPECT_NEAR(c[i + 4].y, 0.25, 1e-12);
    EXPECT_NEAR(c[i].x, poly[i].x, 1e-12);
    EXPECT_NEAR(c[i].z, poly[i].z, 1e-12);
  }
}

TEST(PolygonIntersection, Examples) {
  EXPECT_NEAR(polygon_intersection_area(square(0, 0, 1), square(0, 0, 1)), 1.0, 1e-12);
  EXPECT_NEAR(polygon_intersection_area(square(0, 0, 1), square(0.5, 0, 1)), 0.5, 1e-12);
  EXPECT_EQ(polygon_intersection_area(square(0, 0, 1), square(1, 0, 1)), 0.0);  // shared edge
  EXPECT_EQ(polygon_intersection_area(square(0, 0, 1), square(3, 3, 1)), 0.0);
}

TEST(PolygonIntersection, RotatedSquareAgainstMonteCarlo) {
  BoxSpec a = make_box(0, 0, 0, 1, 1, 1, 0);
  BoxSpec b = make_box(0, 0, 0, 1, 1, 1, kPi / 4);
  double area = polygon_intersection_area(box_to_bev_corners(a), box_to_bev_corners(b));
  // Independent estimate of the overlap area over the unit square.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  long hits = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) hits += inside_footprint(b, u(rng), u(rng));
  EXPECT_NEAR(area, static_cast<double>(hits) / n, 5e-3);
  EXPECT_NEAR(area, 0.8284, 5e-3);
}

TEST(PolygonIntersection, AcceptsClockwiseInput) {
  BevPolygon a = square(0, 0, 2);
  BevPolygon b = square(1, 1, 2);
  std::reverse(b.begin(), b.end());
  EXPECT_NEAR(polygon_intersection_area(a, b), 1.0, 1e-12);
}

TEST(PolygonIntersection, RejectsNonConvex) {
  BevPolygon dart{{0, 0}, {2, 1}, {0, 0.5}, {-2, 1}};
  EXPECT_THROW(polygon_intersection_area(dart, square(0, 0, 1)), ArgumentError);
}

TEST(BevIou, Examples) {
  BoxSpec a = make_box(0, 0, 0, 1, 1, 1, 0);
  EXPECT_DOUBLE_EQ(bev_iou(a, a), 1.0);
  EXPECT_EQ(bev_iou(a, make_box(5, 0, 0, 1, 1, 1, 0)), 0.0);
  EXPECT_NEAR(bev_iou(a, make_box(0.5, 0, 0, 1, 1, 1, 0)), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(bev_iou(a, make_box(0, 0, 0, 1, 1, 1, kPi / 4)), 0.7071, 5e-3);
}

TEST(BevIou, MatchesMonteCarloOnRandomPairs) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    BoxSpec a = random_box(rng, 2.0), b = random_box(rng, 2.0);
    double mc = monte_carlo_bev_iou(a, b, 1000000, rng);
    EXPECT_NEAR(bev_iou(a, b), mc, 5e-3) << "pair " << i;
  }
}

TEST(BevIou, SymmetricAndBounded) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    BoxSpec a = random_box(rng, 3.0), b = random_box(rng, 3.0);
    double ab = bev_iou(a, b), ba = bev_iou(b, a);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(iou3d(a, b), iou3d(b, a), 1e-12);
    EXPECT_NEAR(aabb_iou3d(a, b), aabb_iou3d(b, a), 1e-12);
    EXPECT_LE(aabb_iou3d(a, b), 1.0);
    EXPECT_DOUBLE_EQ(bev_iou(a, a), 1.0);
    EXPECT_DOUBLE_EQ(iou3d(a, a), 1.0);
    EXPECT_DOUBLE_EQ(aabb_iou3d(a, a), 1.0);
  }
}

TEST(BevIou, InvariantUnderRigidMotion) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ang(-kPi, kPi), shift(-20.0, 20.0);
  for (int i = 0; i < 500; ++i) {
    BoxSpec a = random_box(rng, 3.0), b = random_box(rng, 3.0);
    double phi = ang(rng), tx = shift(rng), tz = shift(rng);
    // Rotating a yaw by phi turns its heading (cos, -sin) by the same angle.
    auto move = [&](BoxSpec box) {
      double c = std::cos(phi), s = std::sin(phi);
      double x = box.center.x, z = box.center.z;
      box.center.x = c * x + s * z + tx;
      box.center.z = -s * x + c * z + tz;
      box.yaw = normalize_angle(box.yaw + phi);
      return box;
    };
    EXPECT_NEAR(bev_iou(move(a), move(b)), bev_iou(a, b), 1e-9);
  }
}

TEST(Iou3d, Examples) {
  BoxSpec a = make_box(0, 0, 0, 2, 2, 3, 0.4);
  BoxSpec above = a;
  above.center.y = -3.0;
  EXPECT_EQ(iou3d(a, above), 0.0);
  BoxSpec half = a;
  half.center.y = 1.0;  // heights overlap by h/2
  EXPECT_NEAR(iou3d(a, half), 1.0 / 3.0, 1e-12);
}

TEST(Iou3d, BoundedByBevIouForEqualHeights) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    BoxSpec a = random_box(rng, 2.0), b = random_box(rng, 2.0);
    b.center.y = a.center.y;
    b.h = a.h;
    EXPECT_NEAR(iou3d(a, b), bev_iou(a, b), 1e-12);
  }
}

TEST(AabbIou, Examples) {
  BoxSpec a = make_box(0, 0, 0, 1, 1, 1, 0.7);
  EXPECT_DOUBLE_EQ(aabb_iou3d(a, a), 1.0);
  EXPECT_NEAR(aabb_iou3d(a, make_box(0.5, 0, 0, 1, 1, 1, -2.0)), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(aabb_iou3d(a, make_box(0, 1.0, 0, 1, 1, 1, 0)), 0.0);
  EXPECT_EQ(aabb_iou3d(a, make_box(0, 0, 2.5, 1, 1, 1, 0)), 0.0);
}

TEST(AabbIou, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> off(-0.6, 0.6), dim(1.0, 3.0);
  const double h = 1e-6;
  int checked = 0;
  while (checked < 200) {
    BoxSpec b = make_box(0, 0, 0, dim(rng), dim(rng), dim(rng), 0);
    BoxSpec a = make_box(off(rng), off(rng), off(rng), dim(rng), dim(rng), dim(rng), 0);
    auto g = aabb_iou3d_grad(a, b);
    EXPECT_NEAR(g.iou, aabb_iou3d(a, b), 1e-15);
    double* fields[6] = {&a.center.x, &a.center.y, &a.center.z, &a.w, &a.h, &a.l};
    double analytic[6] = {g.d_center[0], g.d_center[1], g.d_center[2], g.d_dims[0], g.d_dims[1], g.d_dims[2]};
    for (int k = 0; k < 6; ++k) {
      double keep = *fields[k];
      *fields[k] = keep + h;
      double up = aabb_iou3d(a, b);
      *fields[k] = keep - h;
      double down = aabb_iou3d(a, b);
      *fields[k] = keep;
      EXPECT_NEAR((up - down) / (2 * h), analytic[k], 1e-6) << "field " << k;
    }
    ++checked;
  }
}
