#include "mononext/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "mononext/checkpoint.hpp"
#include "mononext/config.hpp"
#include "mononext/error.hpp"
#include "mononext/evaluator.hpp"
#include "mononext/pipeline.hpp"
#include "mononext/synthetic.hpp"
#include "mononext/visualize.hpp"

namespace mononext {

namespace {

struct SplitArgs {
  std::string data_root, out, image_sets;
  double fraction = 0.8;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string config;
  std::optional<std::string> data_root, split_dir, out, epochs, batch_size, lr, seed, backbone;
  std::vector<std::string> sets;
  long max_steps = 0;
};

struct PredictArgs {
  std::string checkpoint, config, data_root, split_dir, subset = "val", ids_file, out;
  std::optional<std::string> threshold, nms_iou;
};

struct EvalArgs {
  std::string pred, gt, protocol = "r11", kv_out, target = "Car";
  std::vector<std::string> ignored{"Van"};
  bool all_gt = false;
};

struct VisArgs {
  std::string data_root, frame, pred, out;
};

struct SynthArgs {
  std::string out;
  int frames = 16;
  std::uint64_t seed = 0;
};

std::filesystem::path data_root_or_env(const std::string& flag) {
  TrainConfig cfg;
  cfg.data_root = flag;
  return cfg.resolved_data_root();
}

int cmd_split(const SplitArgs& a, std::ostream& out) {
  const auto root = data_root_or_env(a.data_root);
  const auto available = list_frames(root);
  const SplitSpec split = a.image_sets.empty() ? make_seeded_split(available, a.fraction, a.seed)
                                               : make_split(a.image_sets, available);
  std::filesystem::create_directories(a.out);
  write_id_file(std::filesystem::path(a.out) / "train.txt", split.train);
  write_id_file(std::filesystem::path(a.out) / "val.txt", split.val);
  out << "train " << split.train.size() << "\nval " << split.val.size() << '\n';
  return 0;
}

TrainConfig train_config(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_config(a.config);
  if (a.data_root) cfg.set("data_root", *a.data_root);
  if (a.split_dir) cfg.set("split_dir", *a.split_dir);
  if (a.out) cfg.set("output_dir", *a.out);
  if (a.epochs) cfg.set("epochs", *a.epochs);
  if (a.batch_size) cfg.set("batch_size", *a.batch_size);
  if (a.lr) cfg.set("learning_rate", *a.lr);
  if (a.seed) cfg.set("seed", *a.seed);
  if (a.backbone) cfg.set("net.backbone", *a.backbone);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const TrainConfig cfg = train_config(a);
  TrainHooks hooks;
  hooks.max_steps = a.max_steps;
  hooks.on_step = [&out](const StepRecord& r) {
    out << "epoch " << r.epoch << " step " << r.step << " loss " << r.loss.total << " (conf " << r.loss.conf
        << ", cls " << r.loss.cls << ", box " << r.loss.box << ")\n";
  };
  const TrainLog log = train(cfg, hooks);
  out << "final checkpoint " << log.final_checkpoint.string() << '\n';
  if (log.best_checkpoint) out << "best checkpoint " << log.best_checkpoint->string() << '\n';
  return 0;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  TrainConfig cfg = a.config.empty() ? config_from_checkpoint(a.checkpoint) : load_config(a.config);
  if (!a.data_root.empty()) cfg.data_root = a.data_root;
  if (a.threshold) cfg.set("threshold", *a.threshold);
  if (a.nms_iou) cfg.set("nms_iou", *a.nms_iou);
  MonoNext model = load_model(a.checkpoint, cfg);
  const auto root = cfg.resolved_data_root();

  std::vector<std::string> ids;
  if (!a.ids_file.empty()) {
    ids = read_id_file(a.ids_file);
  } else if (!a.split_dir.empty()) {
    const auto split = make_split(a.split_dir, list_frames(root));
    if (a.subset != "train" && a.subset != "val") throw ArgumentError("--subset must be train or val");
    ids = a.subset == "train" ? split.train : split.val;
  } else {
    ids = list_frames(root);
  }
  const PredictOptions popts{cfg.threshold, cfg.nms_iou, cfg.batch_size};
  std::size_t written = 0, boxes = 0;
  for (std::size_t i = 0; i < ids.size(); i += 64) {
    const std::vector<std::string> chunk(ids.begin() + static_cast<std::ptrdiff_t>(i),
                                         ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), i + 64)));
    const auto frames = load_frames(root, chunk);
    const auto dets = predict_frames(model, frames, cfg.grid, popts);
    write_predictions(a.out, frames, dets, cfg.classes);
    written += frames.size();
    for (const auto& [id, list] : dets) boxes += list.size();
  }
  out << "wrote " << written << " prediction files (" << boxes << " boxes) to " << a.out << '\n';
  return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto protocol = parse_protocol(a.protocol);
  EvalClasses classes;
  classes.target = a.target;
  classes.ignored = a.ignored;
  const auto gt_labels = load_label_dir(a.gt);
  const auto pred_labels = load_label_dir(a.pred);
  std::map<std::string, std::vector<Detection>> predictions;
  for (const auto& [id, labels] : pred_labels) {
    if (!gt_labels.contains(id)) throw ArgumentError("prediction file " + id + ".txt has no ground truth");
    predictions[id] = make_detections(labels, classes);
  }
  std::vector<EvalFrame> frames;
  for (const auto& [id, labels] : gt_labels) {
    if (a.all_gt || predictions.contains(id)) frames.push_back(make_eval_frame(id, labels, classes));
  }
  const EvalReport report = evaluate(predictions, frames, protocol);
  out << report.table();
  if (!a.kv_out.empty()) {
    std::ofstream kv(a.kv_out);
    if (!kv) throw IoError("cannot write " + a.kv_out);
    kv << report.key_values();
  }
  return 0;
}

int cmd_visualize(const VisArgs& a, std::ostream& out) {
  const auto root = data_root_or_env(a.data_root);
  const Frame frame = load_frame(root, a.frame);
  const ClassMap classes;
  std::vector<BoxSpec> gts, dets;
  for (const auto& r : frame.labels) {
    if (r.class_name != "DontCare") gts.push_back(label_to_box(r, classes.id_of(r.class_name).value_or(0)));
  }
  if (!a.pred.empty()) {
    for (const auto& r : parse_label_file(std::filesystem::path(a.pred) / (a.frame + ".txt"))) {
      dets.push_back(label_to_box(r, classes.id_of(r.class_name).value_or(0)));
    }
  }
  const auto res = visualize(frame, dets, gts, a.out);
  out << res.camera_path.string() << '\n' << res.bev_path.string() << '\n';
  return 0;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto ids = write_synthetic_dataset(a.out, a.frames, a.seed);
  out << "wrote " << ids.size() << " frames to " << a.out << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monocular 3D car detection on a bird's-eye-view grid", "mononext"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Write train.txt/val.txt for a dataset");
  split_cmd->add_option("--data-root", split.data_root, "KITTI training folder (default $MONONEXT_DATA_ROOT)");
  split_cmd->add_option("--out", split.out, "Directory for train.txt and val.txt")->required();
  split_cmd->add_option("--image-sets", split.image_sets, "Directory with reference train.txt/val.txt lists");
  split_cmd->add_option("--fraction", split.fraction, "Train fraction of the seeded split")
      ->check(CLI::Range(0.0, 1.0));
  split_cmd->add_option("--seed", split.seed, "Seed of the seeded split");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", tr.config, "key = value config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--data-root", tr.data_root, "Overrides data_root");
  train_cmd->add_option("--split-dir", tr.split_dir, "Overrides split_dir");
  train_cmd->add_option("--out", tr.out, "Overrides output_dir");
  train_cmd->add_option("--epochs", tr.epochs, "Overrides epochs");
  train_cmd->add_option("--batch-size", tr.batch_size, "Overrides batch_size");
  train_cmd->add_option("--lr", tr.lr, "Overrides learning_rate");
  train_cmd->add_option("--seed", tr.seed, "Overrides seed");
  train_cmd->add_option("--backbone", tr.backbone, "mobilenet_v2_like or tiny_backbone");
  train_cmd->add_option("--set", tr.sets, "Any config key, as key=value (repeatable)");
  train_cmd->add_option("--max-steps", tr.max_steps, "Stop after this many optimizer steps");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Write KITTI detection files");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--config", pr.config, "Config that must match the checkpoint")->check(CLI::ExistingFile);
  predict_cmd->add_option("--data-root", pr.data_root, "KITTI training folder");
  predict_cmd->add_option("--split-dir", pr.split_dir, "Directory with train.txt/val.txt");
  predict_cmd->add_option("--subset", pr.subset, "train or val (with --split-dir)");
  predict_cmd->add_option("--ids", pr.ids_file, "File of frame ids to predict");
  predict_cmd->add_option("--out", pr.out, "Output directory")->required();
  predict_cmd->add_option("--threshold", pr.threshold, "Confidence threshold");
  predict_cmd->add_option("--nms-iou", pr.nms_iou, "BEV NMS IoU, or off");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score detection files against labels");
  eval_cmd->add_option("--pred", ev.pred, "Directory of detection files")->required();
  eval_cmd->add_option("--gt", ev.gt, "Directory of label files")->required();
  eval_cmd->add_option("--protocol", ev.protocol, "r11 or r40");
  eval_cmd->add_option("--kv", ev.kv_out, "Also write key = value results here");
  eval_cmd->add_option("--class", ev.target, "Evaluated class");
  eval_cmd->add_option("--ignore-class", ev.ignored, "Neighbour classes that are neither hits nor misses");
  eval_cmd->add_flag("--all-gt", ev.all_gt, "Count label files without a detection file as empty predictions");

  VisArgs vis;
  auto* vis_cmd = app.add_subcommand("visualize", "Render camera and BEV views of one frame");
  vis_cmd->add_option("--data-root", vis.data_root, "KITTI training folder");
  vis_cmd->add_option("--frame", vis.frame, "Frame id")->required();
  vis_cmd->add_option("--pred", vis.pred, "Directory of detection files");
  vis_cmd->add_option("--out", vis.out, "Output directory")->required();

  SynthArgs syn;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic KITTI-layout dataset");
  synth_cmd->add_option("--out", syn.out, "Dataset root")->required();
  synth_cmd->add_option("--frames", syn.frames, "Number of frames")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--seed", syn.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*split_cmd) return cmd_split(split, out);
    if (*train_cmd) return cmd_train(tr, out);
    if (*predict_cmd) return cmd_predict(pr, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*vis_cmd) return cmd_visualize(vis, out);
    if (*synth_cmd) return cmd_synth(syn, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace mononext
