#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mononext/error.hpp"
#include "mononext/geometry.hpp"
#include "mononext/loss.hpp"

using namespace mononext;

namespace {

GridSpec grid_with(int S, int C) {
  GridSpec g;
  g.S = S;
  g.num_classes = C;
  return g;
}

GridTensor random_target(std::mt19937_64& rng, const GridSpec& g, double p_object) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, g.num_classes - 1);
  GridTensor t(g);
  for (int r = 0; r < g.S; ++r)
    for (int c = 0; c < g.S; ++c) {
      if (u(rng) >= p_object) continue;
      t.at(r, c, 0) = 1.0;
      t.at(r, c, g.class_channel(cls(rng))) = 1.0;
      for (int k = 0; k < 3; ++k) t.at(r, c, g.pos_channel() + k) = 0.05 + 0.9 * u(rng);
      for (int k = 0; k < 3; ++k) t.at(r, c, g.dim_channel() + k) = 0.2 + 0.7 * u(rng);
      t.at(r, c, g.yaw_channel()) = u(rng);
    }
  return t;
}

// Independent evaluation of the weighted sums straight from the channel layout.
LossBreakdown oracle_loss(const GridTensor& p, const GridTensor& t, const GridSpec& g, const LossWeights& w) {
  LossBreakdown out;
  double cw = (g.x_max - g.x_min) / g.S, cd = (g.z_max - g.z_min) / g.S;
  for (int r = 0; r < g.S; ++r)
    for (int c = 0; c < g.S; ++c) {
      double dc = p.at(r, c, 0) - t.at(r, c, 0);
      if (t.at(r, c, 0) != 1.0) {
        out.conf += w.noobj * dc * dc;
        continue;
      }
      out.conf += w.obj * dc * dc;
      for (int k = 0; k < g.num_classes; ++k) {
        double d = p.at(r, c, g.class_channel(k)) - t.at(r, c, g.class_channel(k));
        out.cls += w.cls * d * d;
      }
      auto box = [&](const GridTensor& x) {
        BoxSpec b;
        b.center.x = g.x_min + (c + x.at(r, c, g.pos_channel())) * cw;
        b.center.y = g.y_min + x.at(r, c, g.pos_channel() + 1) * (g.y_max - g.y_min);
        b.center.z = g.z_min + (r + x.at(r, c, g.pos_channel() + 2)) * cd;
        b.w = x.at(r, c, g.dim_channel()) * g.w_max;
        b.h = x.at(r, c, g.dim_channel() + 1) * g.h_max;
        b.l = x.at(r, c, g.dim_channel() + 2) * g.l_max;
        return b;
      };
      BoxSpec bp = box(p), bt = box(t);
      // Per-axis interval overlap.
      auto overlap = [](double c1, double e1, double c2, double e2) {
        return std::max(0.0, std::min(c1 + e1 / 2, c2 + e2 / 2) - std::max(c1 - e1 / 2, c2 - e2 / 2));
      };
      double inter = overlap(bp.center.x, bp.w, bt.center.x, bt.w) * overlap(bp.center.y, bp.h, bt.center.y, bt.h) *
                     overlap(bp.center.z, bp.l, bt.center.z, bt.l);
      double uni = bp.w * bp.h * bp.l + bt.w * bt.h * bt.l - inter;
      double iou = uni > 0 ? inter / uni : 0.0;
      double dy = p.at(r, c, g.yaw_channel()) - t.at(r, c, g.yaw_channel());
      out.box += w.iou * (1 - iou) * (1 - iou) + w.yaw * dy * dy;
    }
  out.total = out.conf + out.cls + out.box;
  return out;
}

// Smallest distance between interval endpoints of the decoded pred/target boxes
// in any object cell, in meters.
double kink_distance(const GridTensor& p, const GridTensor& t, const GridSpec& g) {
  double best = 1e9;
  double cw = (g.x_max - g.x_min) / g.S, cd = (g.z_max - g.z_min) / g.S;
  for (int r = 0; r < g.S; ++r)
    for (int c = 0; c < g.S; ++c) {
      if (t.at(r, c, 0) != 1.0) continue;
      double scale_c[3] = {cw, g.y_max - g.y_min, cd};
      double scale_d[3] = {g.w_max, g.h_max, g.l_max};
      double off[3] = {g.x_min + c * cw, g.y_min, g.z_min + r * cd};
      for (int a = 0; a < 3; ++a) {
        auto ends = [&](const GridTensor& x) {
          double ctr = off[a] + x.at(r, c, g.pos_channel() + a) * scale_c[a];
          double ext = x.at(r, c, g.dim_channel() + a) * scale_d[a];
          return std::pair{ctr - ext / 2, ctr + ext / 2};
        };
        auto [p0, p1] = ends(p);
        auto [t0, t1] = ends(t);
        for (double u : {p0, p1})
          for (double v : {t0, t1}) best = std::min(best, std::abs(u - v));
        best = std::min(best, std::abs(p1 - p0));
      }
    }
  return best;
}

}  // namespace

TEST(ResponsibilityMask, Examples) {
  GridSpec g;
  GridTensor t(g);
  auto mask = responsibility_mask(t);
  ASSERT_EQ(mask.size(), 225u);
  for (auto m : mask) EXPECT_EQ(m, 0);
  t.at(7, 7, 0) = 1.0;
  t.at(3, 2, 0) = 1.0;
  mask = responsibility_mask(t);
  int ones = 0;
  for (auto m : mask) ones += m;
  EXPECT_EQ(ones, 2);
  EXPECT_EQ(mask[7 * 15 + 7], 1);
  EXPECT_EQ(mask[3 * 15 + 2], 1);
  t.at(0, 0, 0) = 0.5;
  EXPECT_THROW(responsibility_mask(t), ArgumentError);
}

TEST(ConfidenceLoss, Fixtures) {
  GridSpec g;
  LossWeights w;
  GridTensor target(g), pred(g);
  target.at(7, 7, 0) = 1.0;
  EXPECT_DOUBLE_EQ(confidence_loss(pred, target, w), 5.0);
  EXPECT_EQ(confidence_loss(target, target, w), 0.0);

  GridTensor empty(g), low(g);
  for (int r = 0; r < 15; ++r)
    for (int c = 0; c < 15; ++c) low.at(r, c, 0) = 0.1;
  EXPECT_NEAR(confidence_loss(low, empty, w), 2.25, 1e-9);
  EXPECT_THROW(confidence_loss(GridTensor(14, 1), empty, w), ArgumentError);
}

TEST(ClassLoss, Fixtures) {
  GridSpec g = grid_with(15, 2);
  LossWeights w;
  GridTensor target(g);
  target.at(4, 5, 0) = 1.0;
  target.at(4, 5, g.class_channel(0)) = 1.0;
  GridTensor pred = target;
  EXPECT_EQ(class_loss(pred, target, w), 0.0);
  pred.at(4, 5, g.class_channel(0)) = 0.6;
  pred.at(4, 5, g.class_channel(1)) = 0.4;
  EXPECT_NEAR(class_loss(pred, target, w), 0.32, 1e-9);
  // Class channels outside object cells are not penalised.
  pred.at(0, 0, g.class_channel(1)) = 0.9;
  EXPECT_NEAR(class_loss(pred, target, w), 0.32, 1e-9);
}

TEST(BoxLoss, Fixtures) {
  GridSpec g;
  LossWeights w;
  GridTensor target(g);
  double cell[9] = {1, 1, 0.3, 0.2, 0.6, 0.4, 0.375, 0.5, 0.25};
  for (int ch = 0; ch < 9; ++ch) target.at(6, 8, ch) = cell[ch];
  EXPECT_EQ(box_loss(target, target, g, w), 0.0);

  GridTensor yaw_off = target;
  yaw_off.at(6, 8, g.yaw_channel()) += 0.1;
  EXPECT_NEAR(box_loss(yaw_off, target, g, w), 0.01, 1e-9);

  GridTensor half = target;
  half.at(6, 8, g.dim_channel()) *= 0.5;  // nested box with half the volume
  EXPECT_NEAR(box_loss(half, target, g, w), 2.5, 1e-9);
}

TEST(TotalLoss, CombinedFixture) {
  GridSpec g = grid_with(15, 2);
  LossWeights w;
  GridTensor target(g);
  double cell[10] = {1, 1, 0, 0.3, 0.2, 0.6, 0.4, 0.375, 0.5, 0.25};
  for (int ch = 0; ch < 10; ++ch) target.at(6, 8, ch) = cell[ch];
  GridTensor pred = target;
  pred.at(6, 8, 0) = 0.0;
  pred.at(6, 8, g.class_channel(0)) = 0.6;
  pred.at(6, 8, g.class_channel(1)) = 0.4;
  pred.at(6, 8, g.dim_channel()) *= 0.5;
  pred.at(6, 8, g.yaw_channel()) += 0.1;
  LossBreakdown b = total_loss(pred, target, g, w);
  EXPECT_NEAR(b.conf, 5.0, 1e-9);
  EXPECT_NEAR(b.cls, 0.32, 1e-9);
  EXPECT_NEAR(b.box, 2.51, 1e-9);
  EXPECT_NEAR(b.total, 7.83, 1e-9);
}

TEST(TotalLoss, ZeroAtTruth) {
  GridSpec g = grid_with(15, 3);
  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    GridTensor t = random_target(rng, g, 0.1);
    LossBreakdown b = total_loss(t, t, g, LossWeights{});
    EXPECT_EQ(b.conf, 0.0);
    EXPECT_EQ(b.cls, 0.0);
    EXPECT_NEAR(b.box, 0.0, 1e-24);
    EXPECT_NEAR(b.total, 0.0, 1e-24);
  }
}

TEST(TotalLoss, MatchesOracleAndIsNonNegative) {
  GridSpec g = grid_with(15, 2);
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LossWeights w{2.0, 0.5, 3.0, 7.0, 1.5};
  for (int i = 0; i < 100; ++i) {
    GridTensor t = random_target(rng, g, 0.2);
    GridTensor p(g);
    for (double& v : p.values()) v = u(rng);
    LossBreakdown b = total_loss(p, t, g, w);
    LossBreakdown o = oracle_loss(p, t, g, w);
    EXPECT_NEAR(b.conf, o.conf, 1e-9);
    EXPECT_NEAR(b.cls, o.cls, 1e-9);
    EXPECT_NEAR(b.box, o.box, 1e-9);
    EXPECT_NEAR(b.total, b.conf + b.cls + b.box, 1e-9);
    EXPECT_GE(b.conf, 0.0);
    EXPECT_GE(b.cls, 0.0);
    EXPECT_GE(b.box, 0.0);
    EXPECT_DOUBLE_EQ(confidence_loss(p, t, w), b.conf);
    EXPECT_DOUBLE_EQ(class_loss(p, t, w), b.cls);
    EXPECT_DOUBLE_EQ(box_loss(p, t, g, w), b.box);
  }
}

TEST(TotalLoss, WeightLinearity) {
  GridSpec g;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GridTensor t = random_target(rng, g, 0.2);
  GridTensor p(g);
  for (double& v : p.values()) v = u(rng);
  LossWeights base;
  base.yaw = 0.0;
  LossWeights yaw_only{0, 0, 0, 0, 1};
  LossBreakdown b0 = total_loss(p, t, g, base);
  double yaw_term = total_loss(p, t, g, yaw_only).box;
  const double k = 3.5;
  // obj and noobj both feed the confidence sum; split them through separate runs.
  LossWeights obj_only{1, 0, 0, 0, 0}, noobj_only{0, 1, 0, 0, 0};
  double obj_term = total_loss(p, t, g, obj_only).conf;
  double noobj_term = total_loss(p, t, g, noobj_only).conf;
  EXPECT_NEAR(b0.conf, 5 * obj_term + noobj_term, 1e-9);

  LossWeights w = base;
  w.obj *= k;
  EXPECT_NEAR(total_loss(p, t, g, w).conf, k * 5 * obj_term + noobj_term, 1e-9);
  w = base;
  w.noobj *= k;
  EXPECT_NEAR(total_loss(p, t, g, w).conf, 5 * obj_term + k * noobj_term, 1e-9);
  w = base;
  w.cls *= k;
  LossBreakdown bc = total_loss(p, t, g, w);
  EXPECT_NEAR(bc.cls, k * b0.cls, 1e-9);
  EXPECT_DOUBLE_EQ(bc.conf, b0.conf);
  EXPECT_DOUBLE_EQ(bc.box, b0.box);
  w = base;
  w.iou *= k;
  LossBreakdown bi = total_loss(p, t, g, w);
  EXPECT_NEAR(bi.box, k * b0.box, 1e-9);
  EXPECT_DOUBLE_EQ(bi.conf, b0.conf);
  w = base;
  w.yaw = k;
  EXPECT_NEAR(total_loss(p, t, g, w).box, b0.box + k * yaw_term, 1e-9);
}

TEST(TotalLoss, LocalityOfNonObjectCells) {
  GridSpec g = grid_with(15, 2);
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    GridTensor t = random_target(rng, g, 0.2);
    GridTensor p(g);
    for (double& v : p.values()) v = u(rng);
    LossBreakdown before = total_loss(p, t, g, LossWeights{});
    for (int r = 0; r < g.S; ++r)
      for (int c = 0; c < g.S; ++c)
        if (t.at(r, c, 0) == 0.0)
          for (int ch = 0; ch < g.channels(); ++ch) p.at(r, c, ch) = u(rng);
    LossBreakdown after = total_loss(p, t, g, LossWeights{});
    EXPECT_EQ(after.cls, before.cls);
    EXPECT_EQ(after.box, before.box);
  }
}

TEST(TotalLoss, ShapeErrors) {
  GridSpec g;
  LossWeights w;
  EXPECT_THROW(total_loss(GridTensor(15, 2), GridTensor(g), g, w), ArgumentError);
  EXPECT_THROW(box_loss(GridTensor(14, 1), GridTensor(14, 1), g, w), ArgumentError);
  LossWeights bad;
  bad.iou = -1;
  EXPECT_THROW(bad.validate(), ArgumentError);
}

TEST(TotalLossGrad, MatchesCentralDifferences) {
  GridSpec g = grid_with(3, 1);
  LossWeights w;
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-5;
  int grids = 0;
  while (grids < 20) {
    GridTensor t = random_target(rng, g, 0.6);
    GridTensor p(g);
    for (double& v : p.values()) v = u(rng);
    // Nudge object cells towards their targets so most IoUs are nonzero.
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        if (t.at(r, c, 0) == 1.0)
          for (int ch = g.pos_channel(); ch < g.channels(); ++ch)
            p.at(r, c, ch) = std::clamp(t.at(r, c, ch) + 0.15 * (u(rng) - 0.5), 0.01, 0.99);
    if (kink_distance(p, t, g) < 1e-4) continue;
    ++grids;
    LossWithGrad lg = total_loss_with_grad(p, t, g, w);
    EXPECT_NEAR(lg.loss.total, total_loss(p, t, g, w).total, 1e-12);
    for (std::size_t i = 0; i < p.values().size(); ++i) {
      double keep = p.values()[i];
      p.values()[i] = keep + h;
      double up = total_loss(p, t, g, w).total;
      p.values()[i] = keep - h;
      double down = total_loss(p, t, g, w).total;
      p.values()[i] = keep;
      double numeric = (up - down) / (2 * h);
      double analytic = lg.grad.values()[i];
      double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-3});
      EXPECT_LT(rel, 1e-4) << "grid " << grids << " entry " << i << " numeric " << numeric << " analytic "
                           << analytic;
    }
  }
}

TEST(BatchMean, AveragesFrames) {
  LossBreakdown a{1, 2, 3, 6}, b{3, 4, 5, 12};
  LossBreakdown m = batch_mean({a, b});
  EXPECT_DOUBLE_EQ(m.conf, 2);
  EXPECT_DOUBLE_EQ(m.cls, 3);
  EXPECT_DOUBLE_EQ(m.box, 4);
  EXPECT_DOUBLE_EQ(m.total, 9);
}
