#include "mononext/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mononext/error.hpp"

namespace mononext {

namespace {

double box2d_overlap_fraction(const Box2d& det, const Box2d& region) {
  const double area = (det[2] - det[0]) * (det[3] - det[1]);
  if (area <= 0.0) return 0.0;
  const double iw = std::min(det[2], region[2]) - std::max(det[0], region[0]);
  const double ih = std::min(det[3], region[3]) - std::max(det[1], region[1]);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih / area;
}

std::string fmt_pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v * 100.0);
  return buf;
}

std::string fmt_unit(const std::optional<double>& v) {
  if (!v) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

}  // namespace

int MatchResult::num_gt() const {
  return static_cast<int>(std::count(gt_counted.begin(), gt_counted.end(), true));
}

int MatchResult::num_tp() const {
  return static_cast<int>(std::count(outcome.begin(), outcome.end(), DetOutcome::TruePositive));
}

MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                             const IouFn& iou_fn, const MatchOptions& opts) {
  MatchResult res;
  const std::size_t nd = dets.size();
  res.outcome.assign(nd, DetOutcome::FalsePositive);
  res.score.resize(nd);
  res.matched_iou.assign(nd, 0.0);
  res.matched_gt.assign(nd, -1);
  res.gt_counted.resize(gts.size());
  res.gt_matched.assign(gts.size(), false);
  for (std::size_t j = 0; j < gts.size(); ++j) {
    const auto& g = gts[j];
    res.gt_counted[j] = !g.ignore && g.level != Difficulty::Ignored &&
                        static_cast<int>(g.level) <= static_cast<int>(opts.level);
  }
  for (std::size_t i = 0; i < nd; ++i) res.score[i] = dets[i].box.score.value_or(1.0);

  std::vector<std::size_t> order(nd);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return res.score[a] > res.score[b]; });

  auto passes = [&](double iou) { return opts.strict ? iou > opts.iou_threshold : iou >= opts.iou_threshold; };

  for (std::size_t i : order) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (!res.gt_counted[j] || res.gt_matched[j]) continue;
      const double iou = iou_fn(dets[i].box, gts[j].box);
      if (passes(iou) && iou > best_iou) {
        best = static_cast<int>(j);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      res.outcome[i] = DetOutcome::TruePositive;
      res.matched_iou[i] = best_iou;
      res.matched_gt[i] = best;
      res.gt_matched[best] = true;
      continue;
    }
    bool ignored = false;
    for (std::size_t j = 0; j < gts.size() && !ignored; ++j) {
      if (!res.gt_counted[j] && passes(iou_fn(dets[i].box, gts[j].box))) ignored = true;
    }
    if (!ignored && dets[i].bbox2d) {
      for (const auto& region : opts.dontcare) {
        if (box2d_overlap_fraction(*dets[i].bbox2d, region) > 0.5) {
          ignored = true;
          break;
        }
      }
    }
    res.outcome[i] = ignored ? DetOutcome::Ignored : DetOutcome::FalsePositive;
  }
  return res;
}

const char* to_string(ApProtocol p) { return p == ApProtocol::R11 ? "R11" : "R40"; }

ApProtocol parse_protocol(const std::string& text) {
  if (text == "r11" || text == "R11") return ApProtocol::R11;
  if (text == "r40" || text == "R40") return ApProtocol::R40;
  throw ArgumentError("unknown AP protocol '" + text + "' (expected r11 or r40)");
}

std::optional<double> average_precision(const std::vector<FrameMatches>& frames, ApProtocol protocol) {
  struct Entry {
    double score;
    bool tp;
    const std::string* frame;
    std::size_t index;
  };
  std::vector<Entry> entries;
  long total_gt = 0;
  for (const auto& f : frames) {
    total_gt += f.result.num_gt();
    for (std::size_t i = 0; i < f.result.outcome.size(); ++i) {
      const auto o = f.result.outcome[i];
      if (o == DetOutcome::Ignored) continue;
      entries.push_back({f.result.score[i], o == DetOutcome::TruePositive, &f.frame_id, i});
    }
  }
  if (total_gt == 0) return std::nullopt;
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (*a.frame != *b.frame) return *a.frame < *b.frame;
    return a.index < b.index;
  });

  std::vector<double> recall, precision;
  long tp = 0;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].tp) ++tp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
  }
  // Suffix maximum gives the interpolated precision.
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);

  const int points = protocol == ApProtocol::R11 ? 11 : 40;
  double sum = 0.0;
  for (int i = 0; i < points; ++i) {
    const double r = protocol == ApProtocol::R11 ? i / 10.0 : (i + 1) / 40.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r - 1e-12);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / points;
}

std::string EvalReport::table() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-26s %10s %10s %10s\n", "", "Easy", "Moderate", "Hard");
  out << buf;
  auto row = [&](const char* label, auto&& cell) {
    std::snprintf(buf, sizeof(buf), "%-26s %10s %10s %10s\n", label, cell(levels[0]).c_str(),
                  cell(levels[1]).c_str(), cell(levels[2]).c_str());
    out << buf;
  };
  row("Mean IoU", [](const LevelMetrics& m) {
    char b[32];
    std::snprintf(b, sizeof(b), "%.4f", m.mean_iou);
    return std::string(b);
  });
  row("mAP(IoU>0.7) (%)", [](const LevelMetrics& m) { return fmt_pct(m.ap70); });
  row("mAP(IoU>0.5) (%)", [](const LevelMetrics& m) { return fmt_pct(m.ap50); });
  row("Average Recognition (%)", [](const LevelMetrics& m) { return fmt_pct(m.recognition); });
  row("Ground truths", [](const LevelMetrics& m) { return std::to_string(m.num_gt); });
  out << "protocol " << to_string(protocol) << ", " << frames << " frames\n";
  return out.str();
}

std::string EvalReport::key_values() const {
  std::ostringstream out;
  out << "protocol = " << to_string(protocol) << '\n' << "frames = " << frames << '\n';
  const char* names[3] = {"easy", "moderate", "hard"};
  for (int i = 0; i < 3; ++i) {
    const auto& m = levels[i];
    out << names[i] << ".ap70 = " << fmt_unit(m.ap70) << '\n'
        << names[i] << ".ap50 = " << fmt_unit(m.ap50) << '\n'
        << names[i] << ".mean_iou = " << fmt_unit(m.mean_iou) << '\n'
        << names[i] << ".recognition = " << fmt_unit(m.recognition) << '\n'
        << names[i] << ".num_gt = " << m.num_gt << '\n';
  }
  return out.str();
}

EvalReport evaluate(const std::map<std::string, std::vector<Detection>>& predictions,
                    const std::vector<EvalFrame>& ground_truth, ApProtocol protocol,
                    const std::optional<GridSpec>& range) {
  std::map<std::string, const EvalFrame*> by_id;
  for (const auto& f : ground_truth) by_id[f.frame_id] = &f;
  for (const auto& [id, dets] : predictions) {
    if (!by_id.contains(id)) throw ArgumentError("evaluate: prediction for unknown frame " + id);
  }

  std::vector<EvalFrame> frames = ground_truth;
  if (range) {
    for (auto& f : frames)
      for (auto& g : f.gts)
        if (!cell_index(g.box.center.x, g.box.center.z, *range)) g.ignore = true;
  }

  static const std::vector<Detection> kNone;
  const IouFn iou = [](const BoxSpec& a, const BoxSpec& b) { return iou3d(a, b); };

  EvalReport report;
  report.protocol = protocol;
  report.frames = static_cast<int>(frames.size());
  for (int level = 0; level < 3; ++level) {
    auto run = [&](double threshold, bool strict) {
      std::vector<FrameMatches> out;
      for (const auto& f : frames) {
        const auto it = predictions.find(f.frame_id);
        MatchOptions opts;
        opts.iou_threshold = threshold;
        opts.strict = strict;
        opts.level = static_cast<Difficulty>(level);
        opts.dontcare = f.dontcare;
        out.push_back({f.frame_id, match_detections(it == predictions.end() ? kNone : it->second, f.gts, iou, opts)});
      }
      return out;
    };
    LevelMetrics& m = report.levels[level];
    const auto at70 = run(0.7, false);
    const auto at50 = run(0.5, false);
    const auto at10 = run(0.1, true);
    m.ap70 = average_precision(at70, protocol);
    m.ap50 = average_precision(at50, protocol);

    double iou_sum = 0.0;
    int tps = 0;
    for (const auto& f : at50) {
      for (std::size_t i = 0; i < f.result.outcome.size(); ++i) {
        if (f.result.outcome[i] != DetOutcome::TruePositive) continue;
        iou_sum += f.result.matched_iou[i];
        ++tps;
      }
    }
    m.mean_iou = tps ? iou_sum / tps : 0.0;

    int counted = 0, matched = 0;
    for (const auto& f : at10) {
      counted += f.result.num_gt();
      for (std::size_t j = 0; j < f.result.gt_matched.size(); ++j) {
        if (f.result.gt_counted[j] && f.result.gt_matched[j]) ++matched;
      }
    }
    m.num_gt = counted;
    if (counted) m.recognition = static_cast<double>(matched) / counted;
  }
  return report;
}

EvalFrame make_eval_frame(const std::string& frame_id, const std::vector<LabelRecord>& labels,
                          const EvalClasses& classes) {
  EvalFrame f;
  f.frame_id = frame_id;
  for (const auto& r : labels) {
    if (r.class_name == "DontCare") {
      f.dontcare.push_back(r.bbox2d);
    } else if (r.class_name == classes.target) {
      f.gts.push_back({label_to_box(r, 0), assign_difficulty(r), false});
    } else if (std::find(classes.ignored.begin(), classes.ignored.end(), r.class_name) != classes.ignored.end()) {
      f.gts.push_back({label_to_box(r, 0), assign_difficulty(r), true});
    }
  }
  return f;
}

std::vector<Detection> make_detections(const std::vector<LabelRecord>& labels, const EvalClasses& classes) {
  std::vector<Detection> out;
  for (const auto& r : labels) {
    if (r.class_name != classes.target) continue;
    Detection d;
    d.box = label_to_box(r, 0);
    if (!d.box.score) d.box.score = 1.0;
    d.bbox2d = r.bbox2d;
    out.push_back(d);
  }
  return out;
}

std::map<std::string, std::vector<LabelRecord>> load_label_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, std::vector<LabelRecord>> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    out[entry.path().stem().string()] = parse_label_file(entry.path());
  }
  return out;
}

}  // namespace mononext
