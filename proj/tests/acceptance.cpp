// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. `--skip-overfit` leaves out the long training run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "mononext/config.hpp"
#include "mononext/evaluator.hpp"
#include "mononext/geometry.hpp"
#include "mononext/grid_codec.hpp"
#include "mononext/kitti_io.hpp"
#include "mononext/loss.hpp"
#include "mononext/network.hpp"
#include "mononext/pipeline.hpp"
#include "mononext/synthetic.hpp"
#include "test_util.hpp"
#include "toy_corpus.hpp"

using namespace mononext;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Checker {
 public:
  explicit Checker(Outcome& o) : o_(o) {}
  void expect(bool cond, const std::string& what) {
    if (!cond && o_.pass) {
      o_.pass = false;
      o_.detail = what;
    }
  }

 private:
  Outcome& o_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

// 1. Codec round trip.
Outcome codec_round_trip() {
  Outcome o;
  Checker check(o);
  auto t0 = std::chrono::steady_clock::now();
  GridSpec g;
  g.num_classes = 3;
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double max_pos = 0, max_yaw = 0;
  const double cw = (g.x_max - g.x_min) / g.S, cd = (g.z_max - g.z_min) / g.S;
  for (int scene = 0; scene < 1000; ++scene) {
    std::set<std::pair<int, int>> used;
    std::vector<BoxSpec> boxes;
    int n = 1 + static_cast<int>(u(rng) * 20);
    while (static_cast<int>(boxes.size()) < n) {
      int r = static_cast<int>(u(rng) * g.S), c = static_cast<int>(u(rng) * g.S);
      if (!used.insert({r, c}).second) continue;
      BoxSpec b;
      b.center = {g.x_min + (c + 0.001 + 0.998 * u(rng)) * cw, g.y_min + (0.001 + 0.998 * u(rng)) * (g.y_max - g.y_min),
                  g.z_min + (r + 0.001 + 0.998 * u(rng)) * cd};
      b.w = 0.05 + 0.94 * g.w_max * u(rng);
      b.h = 0.05 + 0.94 * g.h_max * u(rng);
      b.l = 0.05 + 0.94 * g.l_max * u(rng);
      b.yaw = normalize_angle(-kPi + 2 * kPi * u(rng));
      b.class_id = static_cast<int>(u(rng) * g.num_classes);
      boxes.push_back(b);
    }
    auto decoded = decode(encode(boxes, g), g, {0.5, std::nullopt});
    check.expect(decoded.size() == boxes.size(), "box count changed");
    for (const auto& b : boxes) {
      auto cell = cell_index(b.center.x, b.center.z, g);
      auto it = std::find_if(decoded.begin(), decoded.end(), [&](const BoxSpec& d) {
        return cell_index(d.center.x, d.center.z, g) == cell;
      });
      if (it == decoded.end()) {
        check.expect(false, "object lost");
        continue;
      }
      for (double e : {it->center.x - b.center.x, it->center.y - b.center.y, it->center.z - b.center.z, it->w - b.w,
                       it->h - b.h, it->l - b.l})
        max_pos = std::max(max_pos, std::abs(e));
      max_yaw = std::max(max_yaw, std::abs(normalize_angle(it->yaw - b.yaw)));
      check.expect(it->class_id == b.class_id, "class changed");
    }
  }
  double secs = seconds_since(t0);
  check.expect(max_pos < 1e-6, "position/dimension error too large");
  check.expect(max_yaw < 1e-6, "yaw error too large");
  check.expect(secs < 10.0, "slower than 10 s");
  o.detail = (o.pass ? "" : o.detail + "; ") + fmt("max pos/dim err %.2e, max yaw err %.2e", max_pos, max_yaw) +
             fmt(", %.2f s", secs);
  return o;
}

// 2. Zero at truth and finite-difference gradients.
Outcome loss_gradients() {
  Outcome o;
  Checker check(o);
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_target = [&](const GridSpec& g, double p) {
    GridTensor t(g);
    for (int r = 0; r < g.S; ++r)
      for (int c = 0; c < g.S; ++c) {
        if (u(rng) >= p) continue;
        t.at(r, c, 0) = 1;
        t.at(r, c, g.class_channel(static_cast<int>(u(rng) * g.num_classes))) = 1;
        for (int k = 0; k < 6; ++k) t.at(r, c, g.pos_channel() + k) = 0.1 + 0.8 * u(rng);
        t.at(r, c, g.yaw_channel()) = u(rng);
      }
    return t;
  };
  GridSpec full;
  full.num_classes = 2;
  double worst_zero = 0;
  for (int i = 0; i < 100; ++i) {
    GridTensor t = random_target(full, 0.1);
    worst_zero = std::max(worst_zero, total_loss(t, t, full, LossWeights{}).total);
  }
  check.expect(worst_zero == 0.0, "loss at truth is not zero");

  GridSpec g;
  g.S = 3;
  const double h = 1e-5;
  double worst_rel = 0;
  int grids = 0;
  const double cw = (g.x_max - g.x_min) / g.S, cd = (g.z_max - g.z_min) / g.S;
  const double scale_c[3] = {cw, g.y_max - g.y_min, cd}, scale_d[3] = {g.w_max, g.h_max, g.l_max};
  while (grids < 20) {
    GridTensor t = random_target(g, 0.6);
    GridTensor p(g);
    for (double& v : p.values()) v = u(rng);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        if (t.at(r, c, 0) == 1)
          for (int ch = g.pos_channel(); ch < g.channels(); ++ch)
            p.at(r, c, ch) = std::clamp(t.at(r, c, ch) + 0.15 * (u(rng) - 0.5), 0.01, 0.99);
    // Stay 1e-4 away from the overlap kinks of the axis-aligned IoU.
    double kink = 1e9;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        if (t.at(r, c, 0) != 1) continue;
        for (int a = 0; a < 3; ++a) {
          auto ends = [&](const GridTensor& x) {
            double ctr = x.at(r, c, g.pos_channel() + a) * scale_c[a];
            double ext = x.at(r, c, g.dim_channel() + a) * scale_d[a];
            return std::pair{ctr - ext / 2, ctr + ext / 2};
          };
          auto [p0, p1] = ends(p);
          auto [t0e, t1e] = ends(t);
          for (double a0 : {p0, p1})
            for (double b0 : {t0e, t1e}) kink = std::min(kink, std::abs(a0 - b0));
        }
      }
    if (kink < 1e-4) continue;
    ++grids;
    LossWithGrad lg = total_loss_with_grad(p, t, g, LossWeights{});
    for (std::size_t i = 0; i < p.values().size(); ++i) {
      double keep = p.values()[i];
      p.values()[i] = keep + h;
      double up = total_loss(p, t, g, LossWeights{}).total;
      p.values()[i] = keep - h;
      double down = total_loss(p, t, g, LossWeights{}).total;
      p.values()[i] = keep;
      double numeric = (up - down) / (2 * h), analytic = lg.grad.values()[i];
      double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-3});
      worst_rel = std::max(worst_rel, rel);
    }
  }
  double secs = seconds_since(t0);
  check.expect(worst_rel < 1e-4, "gradient mismatch");
  check.expect(secs < 60.0, "slower than 60 s");
  o.detail = (o.pass ? "" : o.detail + "; ") + fmt("max loss at truth %.1e, worst rel grad err %.2e", worst_zero, worst_rel) +
             fmt(", %.2f s", secs);
  return o;
}

// 3. Hand-computed loss fixtures.
Outcome loss_fixtures() {
  Outcome o;
  Checker check(o);
  LossWeights w;
  check.expect(w.obj == 5 && w.noobj == 1 && w.cls == 1 && w.iou == 10 && w.yaw == 1, "default weights changed");
  GridSpec g;
  GridTensor target(g), zero(g);
  target.at(7, 7, 0) = 1;
  double a = confidence_loss(zero, target, w);
  GridTensor low(g);
  for (int r = 0; r < 15; ++r)
    for (int c = 0; c < 15; ++c) low.at(r, c, 0) = 0.1;
  double b = confidence_loss(low, zero, w);

  GridSpec g2 = g;
  g2.num_classes = 2;
  GridTensor t2(g2);
  const double cell[10] = {1, 1, 0, 0.3, 0.2, 0.6, 0.4, 0.375, 0.5, 0.25};
  for (int ch = 0; ch < 10; ++ch) t2.at(6, 8, ch) = cell[ch];
  GridTensor cls = t2;
  cls.at(6, 8, 1) = 0.6;
  cls.at(6, 8, 2) = 0.4;
  double c = class_loss(cls, t2, w);
  GridTensor yaw = t2;
  yaw.at(6, 8, g2.yaw_channel()) += 0.1;
  double d = box_loss(yaw, t2, g2, w);
  GridTensor half = t2;
  half.at(6, 8, g2.dim_channel()) *= 0.5;
  double e = box_loss(half, t2, g2, w);
  GridTensor all = t2;
  all.at(6, 8, 0) = 0;
  all.at(6, 8, 1) = 0.6;
  all.at(6, 8, 2) = 0.4;
  all.at(6, 8, g2.dim_channel()) *= 0.5;
  all.at(6, 8, g2.yaw_channel()) += 0.1;
  double total = total_loss(all, t2, g2, w).total;

  const double got[6] = {a, b, c, d, e, total};
  const double want[6] = {5.0, 2.25, 0.32, 0.01, 2.5, 7.83};
  std::ostringstream s;
  for (int i = 0; i < 6; ++i) {
    check.expect(std::abs(got[i] - want[i]) <= 1e-9, "fixture " + std::to_string(i) + " off");
    s << (i ? ", " : "") << got[i];
  }
  o.detail = (o.pass ? "" : o.detail + "; ") + s.str();
  return o;
}

bool inside(const BoxSpec& b, double px, double pz) {
  double dx = px - b.center.x, dz = pz - b.center.z, c = std::cos(b.yaw), s = std::sin(b.yaw);
  return std::abs(dx * c - dz * s) <= b.l / 2 && std::abs(dx * s + dz * c) <= b.w / 2;
}

// 4. Rotated IoU against Monte-Carlo.
Outcome rotated_iou() {
  Outcome o;
  Checker check(o);
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1004);
  std::uniform_real_distribution<double> pos(-2, 2), dim(0.5, 6), ang(-kPi, kPi), unit(0, 1);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    BoxSpec a, b;
    for (BoxSpec* x : {&a, &b}) {
      x->center = {pos(rng), 0, pos(rng)};
      x->w = dim(rng);
      x->l = dim(rng);
      x->yaw = normalize_angle(ang(rng));
    }
    double ra = 0.5 * std::hypot(a.w, a.l), rb = 0.5 * std::hypot(b.w, b.l);
    double x0 = std::min(a.center.x - ra, b.center.x - rb), x1 = std::max(a.center.x + ra, b.center.x + rb);
    double z0 = std::min(a.center.z - ra, b.center.z - rb), z1 = std::max(a.center.z + ra, b.center.z + rb);
    long ia = 0, ib = 0, both = 0;
    for (int k = 0; k < 1000000; ++k) {
      double px = x0 + (x1 - x0) * unit(rng), pz = z0 + (z1 - z0) * unit(rng);
      bool pa = inside(a, px, pz), pb = inside(b, px, pz);
      ia += pa;
      ib += pb;
      both += pa && pb;
    }
    double mc = static_cast<double>(both) / static_cast<double>(ia + ib - both);
    worst = std::max(worst, std::abs(bev_iou(a, b) - mc));
  }
  BoxSpec sq;
  sq.w = sq.l = 1;
  BoxSpec turned = sq;
  turned.yaw = kPi / 4;
  double diamond = bev_iou(sq, turned);
  double secs = seconds_since(t0);
  check.expect(worst < 5e-3, "Monte-Carlo disagreement");
  check.expect(std::abs(diamond - 0.7071) < 5e-3, "45 degree square case off");
  check.expect(secs < 120.0, "slower than 2 min");
  o.detail = (o.pass ? "" : o.detail + "; ") + fmt("worst |iou - mc| %.2e, 45 deg square %.4f", worst, diamond) +
             fmt(", %.1f s", secs);
  return o;
}

// 5. AP oracle and toy corpus regression.
Outcome ap_oracle() {
  Outcome o;
  Checker check(o);
  using mononext::testing::toy_cube;
  IouFn f = [](const BoxSpec& a, const BoxSpec& b) { return iou3d(a, b); };
  std::vector<Detection> dets{{toy_cube(0, 10, 0.9), std::nullopt}, {toy_cube(30, 10, 0.8), std::nullopt},
                              {toy_cube(10, 10, 0.7), std::nullopt}};
  std::vector<GroundTruth> gts{{toy_cube(0, 10), Difficulty::Easy, false}, {toy_cube(10, 10), Difficulty::Easy, false}};
  auto m = match_detections(dets, gts, f, {});
  double ap = *average_precision({{"x", m}}, ApProtocol::R11);
  check.expect(std::abs(ap - 0.8485) < 1e-4 && std::abs(ap - (6 + 5 * 2.0 / 3.0) / 11) < 1e-6, "R11 fixture off");

  auto toy = mononext::testing::make_toy_corpus();
  EvalReport r = evaluate(toy.detections, toy.frames, ApProtocol::R11);
  const double ap70[3] = {6.0 / 11, 7.0 / 11, 6.0 / 11};
  const double ap50[3] = {(6 + 5 * 2.0 / 3.0) / 11, 10.0 / 11, 7.5 / 11};
  const double rec[3] = {1.0, 1.0, 0.75};
  const int ngt[3] = {2, 3, 4};
  for (int i = 0; i < 3; ++i) {
    const auto& l = r.levels[i];
    check.expect(l.ap70 && std::abs(*l.ap70 - ap70[i]) < 1e-12, "toy ap70 level " + std::to_string(i));
    check.expect(l.ap50 && std::abs(*l.ap50 - ap50[i]) < 1e-12, "toy ap50 level " + std::to_string(i));
    check.expect(std::abs(l.mean_iou - 0.8) < 1e-12, "toy mean IoU level " + std::to_string(i));
    check.expect(l.recognition && std::abs(*l.recognition - rec[i]) < 1e-12, "toy recognition level " + std::to_string(i));
    check.expect(l.num_gt == ngt[i], "toy gt count level " + std::to_string(i));
  }
  const std::string table =
      "                                 Easy   Moderate       Hard\n"
      "Mean IoU                       0.8000     0.8000     0.8000\n"
      "mAP(IoU>0.7) (%)                54.55      63.64      54.55\n"
      "mAP(IoU>0.5) (%)                84.85      90.91      68.18\n"
      "Average Recognition (%)        100.00     100.00      75.00\n"
      "Ground truths                       2          3          4\n"
      "protocol R11, 3 frames\n";
  check.expect(r.table() == table, "toy table text differs");
  o.detail = (o.pass ? "" : o.detail + "; ") + fmt("R11 fixture %.6f", ap);
  return o;
}

// 6. Shape suite.
Outcome shapes() {
  Outcome o;
  Checker check(o);
  std::mt19937_64 rng(1006);
  std::uniform_real_distribution<float> u(0, 1);
  Tensor x(1, 480, 480, 3);
  for (float& v : x.data) v = u(rng);
  std::ostringstream s;
  for (BackboneKind kind : {BackboneKind::Tiny, BackboneKind::MobileNetV2Like}) {
    for (int C : {1, 3}) {
      NetworkConfig cfg;
      cfg.backbone = kind;
      cfg.num_classes = C;
      MonoNext model(cfg, 0);
      Tensor feat = model.feature_extractor_forward(x);
      check.expect(feat.h == 15 && feat.w == 15 && feat.c == 128, "feature map shape");
      const Task tasks[5] = {Task::Conf, Task::Class, Task::Pos, Task::Dim, Task::Yaw};
      const int widths[5] = {1, C, 3, 3, 1};
      for (int t = 0; t < 5; ++t) {
        Tensor h = model.head_forward(feat, tasks[t]);
        check.expect(h.h == 15 && h.w == 15 && h.c == widths[t], "head shape");
      }
      auto grids = model.to_grids(model.forward(x));
      const GridTensor& grid = grids.at(0);
      check.expect(grid.side() == 15 && grid.channels() == 1 + C + 7, "grid shape");
      if (C == 1) check.expect(grid.channels() == 9, "nine values per cell at C=1");
      double worst = 0;
      for (int r = 0; r < 15; ++r)
        for (int c = 0; c < 15; ++c) {
          double sum = 0;
          for (int k = 0; k < C; ++k) sum += grid.at(r, c, 1 + k);
          worst = std::max(worst, std::abs(sum - 1));
          for (double v : grid.cell(r, c)) check.expect(v >= 0 && v <= 1, "output outside [0,1]");
        }
      check.expect(worst < 1e-6, "class channels do not sum to 1");
      s << (s.tellp() ? ", " : "") << to_string(kind) << " C=" << C << " -> (15,15," << grid.channels() << ")";
    }
  }
  o.detail = (o.pass ? "" : o.detail + "; ") + s.str();
  return o;
}

// 7. Overfit smoke on synthetic frames.
Outcome overfit() {
  Outcome o;
  Checker check(o);
  auto t0 = std::chrono::steady_clock::now();
  TempDir data, out;
  auto ids = write_synthetic_dataset(data.path, 16, 7);
  TrainConfig cfg;
  cfg.data_root = data.path.string();
  cfg.output_dir = out.path.string();
  cfg.network.backbone = BackboneKind::Tiny;
  cfg.network.blocks = {{128, 3}, {128, 3}};
  cfg.network.head_block = {64, 1};
  cfg.augment_flip = false;
  cfg.augment_contrast = false;
  cfg.epochs = 300;
  cfg.batch_size = 4;
  cfg.learning_rate = 5e-4;
  cfg.checkpoint_every = 0;
  cfg.val_every = 0;
  TrainLog log = train(cfg);
  MonoNext model = load_model(log.final_checkpoint, cfg);
  auto frames = load_frames(data.path, ids);
  auto boxes = predict_frames(model, frames, cfg.grid, {cfg.threshold, cfg.nms_iou, 8});
  EvalReport r = evaluate(to_detections(frames, boxes), to_eval_frames(frames, EvalClasses{}), ApProtocol::R11);
  const auto& hard = r.levels[2];
  double recog = hard.recognition.value_or(0), ap50 = hard.ap50.value_or(0);
  double mins = seconds_since(t0) / 60;
  check.expect(recog >= 0.9, "training-set recognition below 0.9");
  check.expect(ap50 >= 0.5, "training-set AP@0.5 below 0.5");
  check.expect(mins <= 30, "slower than 30 min");
  o.detail = (o.pass ? "" : o.detail + "; ") + fmt("recognition %.3f, AP@0.5 %.3f", recog, ap50) +
             fmt(", %.0f ground truths", hard.num_gt) + fmt(", %.1f min", mins);
  return o;
}

// 8. Determinism.
Outcome determinism() {
  Outcome o;
  Checker check(o);
  TempDir data, out1, out2;
  auto ids = write_synthetic_dataset(data.path, 6, 8);
  TrainConfig cfg;
  cfg.data_root = data.path.string();
  cfg.network.backbone = BackboneKind::Tiny;
  cfg.network.blocks = {{32, 3}, {128, 3}};
  cfg.network.head_block = {16, 1};
  cfg.batch_size = 2;
  cfg.epochs = 5;
  cfg.learning_rate = 1e-3;
  cfg.checkpoint_every = 0;
  cfg.val_every = 0;
  TrainHooks hooks;
  hooks.max_steps = 5;
  cfg.output_dir = out1.path.string();
  TrainLog a = train(cfg, hooks);
  cfg.output_dir = out2.path.string();
  TrainLog b = train(cfg, hooks);
  check.expect(a.steps.size() == 5 && b.steps.size() == 5, "expected 5 steps");
  for (std::size_t i = 0; i < std::min(a.steps.size(), b.steps.size()); ++i)
    check.expect(a.steps[i].loss.total == b.steps[i].loss.total, "loss sequences differ");

  auto frames = load_frames(data.path, ids);
  MonoNext m1 = load_model(a.final_checkpoint, cfg);
  MonoNext m2 = load_model(b.final_checkpoint, cfg);
  Tensor x = stack_inputs({prepare_sample(frames[0], cfg, nullptr), prepare_sample(frames[1], cfg, nullptr)}, 480);
  Tensor y1 = m1.forward(x), y2 = m2.forward(x);
  check.expect(y1.data == y2.data, "reloaded models disagree");
  std::ostringstream s;
  s << "5-step losses";
  for (const auto& st : a.steps) s << ' ' << st.loss.total;
  o.detail = (o.pass ? "" : o.detail + "; ") + s.str();
  return o;
}

// 9. Augmentation invariants.
Outcome augmentation() {
  Outcome o;
  Checker check(o);
  std::mt19937_64 rng(1009);
  std::uniform_real_distribution<double> u(0, 1);
  double worst_inv = 0, worst_eq = 0;
  int compared = 0, excluded = 0;
  GridSpec g;
  const double cw = (g.x_max - g.x_min) / g.S;
  for (int scene = 0; scene < 200; ++scene) {
    Frame f;
    f.frame_id = "000000";
    f.image = Image(1242, 8);
    for (auto& px : f.image.pixels) px = static_cast<std::uint8_t>(u(rng) * 255);
    f.calib = kitti_reference_calib();
    int n = 1 + static_cast<int>(u(rng) * 12);
    for (int i = 0; i < n; ++i) {
      LabelRecord r;
      r.class_name = "Car";
      r.truncation = 0;
      r.alpha = normalize_angle(-kPi + 2 * kPi * u(rng));
      double left = u(rng) * 1000;
      r.bbox2d = {left, 150, left + 40 + 100 * u(rng), 250};
      r.dims = {1.3 + u(rng), 1.5 + u(rng), 3 + 2 * u(rng)};
      r.location = {-50 + 100 * u(rng), 1.0 + u(rng), 2 + 80 * u(rng)};
      r.rotation_y = normalize_angle(-kPi + 2 * kPi * u(rng));
      f.labels.push_back(r);
    }
    Frame back = flip_frame(flip_frame(f));
    check.expect(back.image.pixels == f.image.pixels, "image flip is not an involution");
    for (int k = 0; k < 12; ++k) worst_inv = std::max(worst_inv, std::abs(back.calib.p2[k] - f.calib.p2[k]));
    for (std::size_t i = 0; i < f.labels.size(); ++i) {
      const auto &a = f.labels[i], &b = back.labels[i];
      for (int k = 0; k < 3; ++k) worst_inv = std::max(worst_inv, std::abs(a.location[k] - b.location[k]));
      for (int k = 0; k < 4; ++k) worst_inv = std::max(worst_inv, std::abs(a.bbox2d[k] - b.bbox2d[k]));
      worst_inv = std::max(worst_inv, std::abs(normalize_angle(a.rotation_y - b.rotation_y)));
      worst_inv = std::max(worst_inv, std::abs(normalize_angle(a.alpha - b.alpha)));
    }

    ClassMap classes;
    GridTensor plain = encode(target_boxes(f.labels, classes), g);
    GridTensor flipped = encode(target_boxes(flip_frame(f).labels, classes), g);
    // Cells whose object sits within 1e-9 of a lateral cell edge may clamp differently.
    std::set<std::pair<int, int>> boundary;
    for (const auto& b : target_boxes(f.labels, classes)) {
      double frac = (b.center.x - g.x_min) / cw;
      if (std::abs(frac - std::round(frac)) < 1e-9) {
        if (auto idx = cell_index(b.center.x, b.center.z, g)) boundary.insert({idx->row, idx->col});
      }
    }
    for (int r = 0; r < g.S; ++r)
      for (int c = 0; c < g.S; ++c) {
        if (boundary.contains({r, g.S - 1 - c})) {
          ++excluded;
          continue;
        }
        auto src = plain.cell(r, g.S - 1 - c);
        auto dst = flipped.cell(r, c);
        for (int ch = 0; ch < g.channels(); ++ch) {
          double want = src[ch];
          if (src[0] == 1 && ch == g.pos_channel()) want = 1 - src[ch];
          if (src[0] == 1 && ch == g.yaw_channel()) want = src[ch] >= 0.5 ? 1.5 - src[ch] : 0.5 - src[ch];
          worst_eq = std::max(worst_eq, std::abs(dst[ch] - want));
        }
        compared += src[0] == 1;
      }
  }
  check.expect(worst_inv <= 1e-9, "flip involution error above 1e-9");
  check.expect(worst_eq <= 1e-9, "encode/flip equivariance error above 1e-9");
  o.detail = (o.pass ? "" : o.detail + "; ") + fmt("involution err %.1e, equivariance err %.1e", worst_inv, worst_eq) +
             fmt(", %.0f object cells compared, %.0f excluded", compared, excluded);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  bool skip_overfit = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--skip-overfit") == 0) skip_overfit = true;

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "codec round trip", codec_round_trip},   {2, "loss zero-at-truth and gradient check", loss_gradients},
      {3, "hand-computed loss fixtures", loss_fixtures}, {4, "rotated IoU oracle", rotated_iou},
      {5, "AP oracle", ap_oracle},                 {6, "shape suite", shapes},
      {7, "overfit smoke", overfit},               {8, "determinism", determinism},
      {9, "augmentation invariants", augmentation},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (c.id == 7 && skip_overfit) {
      std::printf("SKIP %d %s\n", c.id, c.name);
      continue;
    }
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
