#include "mononext/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mononext/checkpoint.hpp"
#include "mononext/error.hpp"
#include "mononext/optimizer.hpp"

namespace mononext {

namespace {

constexpr int kValChunk = 64;

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "nan"; }

class TsvWriter {
 public:
  TsvWriter(const std::filesystem::path& path, const std::string& header) : out_(path) {
    if (!out_) throw IoError("cannot write " + path.string());
    out_ << header << '\n' << std::flush;
  }
  void row(const std::string& line) { out_ << line << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

std::string breakdown_text(const LossBreakdown& b) {
  return "conf=" + num(b.conf) + " cls=" + num(b.cls) + " box=" + num(b.box) + " total=" + num(b.total);
}

// Recognition and AP@0.5 over every counted ground truth (the Hard pool).
std::pair<std::optional<double>, std::optional<double>> validate_frames(
    MonoNext& model, const std::filesystem::path& root, const std::vector<std::string>& ids,
    const TrainConfig& cfg) {
  std::map<std::string, std::vector<Detection>> dets;
  std::vector<EvalFrame> gts;
  const PredictOptions popts{cfg.threshold, cfg.nms_iou, cfg.batch_size};
  EvalClasses classes;
  classes.target = cfg.classes.names.front();
  for (std::size_t i = 0; i < ids.size(); i += kValChunk) {
    const std::vector<std::string> chunk(ids.begin() + static_cast<std::ptrdiff_t>(i),
                                         ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), i + kValChunk)));
    const auto frames = load_frames(root, chunk);
    const auto boxes = predict_frames(model, frames, cfg.grid, popts);
    dets.merge(to_detections(frames, boxes));
    for (auto& f : to_eval_frames(frames, classes)) gts.push_back(std::move(f));
  }
  const auto report = evaluate(dets, gts, ApProtocol::R11);
  return {report.levels[2].recognition, report.levels[2].ap50};
}

}  // namespace

std::vector<BoxSpec> target_boxes(const std::vector<LabelRecord>& labels, const ClassMap& classes) {
  std::vector<BoxSpec> out;
  for (const auto& r : labels) {
    if (const auto id = classes.id_of(r.class_name)) out.push_back(label_to_box(r, *id));
  }
  return out;
}

Sample prepare_sample(const Frame& frame, const TrainConfig& cfg, std::mt19937_64* rng) {
  const Frame* src = &frame;
  Frame flipped;
  Image contrasted;
  const Image* image = &frame.image;
  if (rng && cfg.augment_flip && std::bernoulli_distribution(cfg.flip_prob)(*rng)) {
    flipped = flip_frame(frame);
    src = &flipped;
    image = &flipped.image;
  }
  if (rng && cfg.augment_contrast && std::bernoulli_distribution(cfg.contrast_prob)(*rng)) {
    const double factor = std::uniform_real_distribution<double>(cfg.contrast_min, cfg.contrast_max)(*rng);
    contrasted = adjust_contrast(*image, factor);
    image = &contrasted;
  }
  Sample s;
  s.frame_id = frame.frame_id;
  const int n = cfg.network.input_size;
  s.input.reserve(static_cast<std::size_t>(n) * n * 3);
  append_normalized(resize_bilinear(*image, n, n), s.input);
  const auto boxes = target_boxes(src->labels, cfg.classes);
  s.target = encode(boxes, cfg.grid);
  return s;
}

std::optional<std::array<double, 7>> mean_box_target(const std::vector<GridTensor>& targets, const GridSpec& g) {
  std::array<double, 7> sum{};
  long count = 0;
  for (const auto& t : targets) {
    for (int r = 0; r < t.side(); ++r)
      for (int c = 0; c < t.side(); ++c) {
        const auto cell = t.cell(r, c);
        if (cell[0] != 1.0) continue;
        for (int k = 0; k < 7; ++k) sum[k] += cell[g.pos_channel() + k];
        ++count;
      }
  }
  if (count == 0) return std::nullopt;
  for (double& v : sum) v /= static_cast<double>(count);
  return sum;
}

void apply_head_prior(MonoNext& model, const std::array<double, 7>& mean) {
  auto logit = [](double p) {
    p = std::clamp(p, 0.02, 0.98);
    return static_cast<float>(std::log(p / (1.0 - p)));
  };
  for (Parameter* p : model.parameters()) {
    if (p->name == "head.pos.out.bias") {
      for (int k = 0; k < 3; ++k) p->value[k] = logit(mean[k]);
    } else if (p->name == "head.dim.out.bias") {
      for (int k = 0; k < 3; ++k) p->value[k] = logit(mean[3 + k]);
    } else if (p->name == "head.yaw.out.bias") {
      p->value[0] = logit(mean[6]);
    }
  }
}

Tensor stack_inputs(const std::vector<Sample>& samples, int input_size) {
  Tensor x(static_cast<int>(samples.size()), input_size, input_size, 3);
  const std::size_t per = static_cast<std::size_t>(input_size) * input_size * 3;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].input.size() != per) throw ArgumentError("stack_inputs: sample has the wrong input size");
    std::copy(samples[i].input.begin(), samples[i].input.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return x;
}

std::vector<Frame> load_frames(const std::filesystem::path& root, const std::vector<std::string>& ids) {
  std::vector<Frame> frames;
  frames.reserve(ids.size());
  for (const auto& id : ids) frames.push_back(load_frame(root, id));
  return frames;
}

TrainLog train(const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const auto root = cfg.resolved_data_root();
  const auto available = list_frames(root);
  SplitSpec split;
  if (cfg.split_dir.empty()) {
    split.train = available;
  } else {
    split = make_split(cfg.split_dir, available);
  }
  if (cfg.max_train_frames > 0 && static_cast<int>(split.train.size()) > cfg.max_train_frames) {
    split.train.resize(static_cast<std::size_t>(cfg.max_train_frames));
  }
  if (split.train.empty()) {
    throw ConfigError("no training frames under " + root.string() +
                      (cfg.split_dir.empty() ? std::string() : " for split " + cfg.split_dir));
  }

  const std::filesystem::path out_dir = cfg.output_dir;
  const auto ckpt_dir = out_dir / "checkpoints";
  std::filesystem::create_directories(ckpt_dir);
  {
    std::ofstream echo(out_dir / "config.txt");
    echo << cfg.echo();
  }
  TsvWriter step_log(out_dir / "steps.tsv", "epoch\tstep\tconf\tcls\tbox\ttotal\tseconds\tframes");
  TsvWriter epoch_log(out_dir / "epochs.tsv", "epoch\tconf\tcls\tbox\ttotal\tval_recognition\tval_ap50");

  MonoNext model(cfg.network, cfg.seed);
  if (cfg.init_head_prior) {
    std::vector<GridTensor> targets;
    for (const auto& id : split.train) {
      targets.push_back(encode(target_boxes(parse_label_file(root / "label_2" / (id + ".txt")), cfg.classes), cfg.grid));
    }
    if (const auto mean = mean_box_target(targets, cfg.grid)) apply_head_prior(model, *mean);
  }
  const auto params = model.parameters();
  AdamW opt(params, {cfg.learning_rate, cfg.weight_decay});
  std::mt19937_64 rng(cfg.seed);
  const std::string echo = model_echo(cfg);

  const long steps_per_epoch = static_cast<long>((split.train.size() + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = steps_per_epoch * cfg.epochs;
  TrainLog log;
  long step = 0;
  std::optional<double> best_recognition;
  std::vector<std::string> order = split.train;
  bool stop = false;

  for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown epoch_sum;
    long epoch_steps = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::size_t last = std::min(order.size(), first + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Sample> samples;
      std::vector<std::string> ids;
      for (std::size_t i = first; i < last; ++i) {
        samples.push_back(prepare_sample(load_frame(root, order[i]), cfg, &rng));
        ids.push_back(order[i]);
      }
      const double inv_batch = 1.0 / static_cast<double>(samples.size());

      model.zero_grad();
      const Tensor output = model.forward(stack_inputs(samples, cfg.network.input_size), true);
      const auto preds = model.to_grids(output);
      std::vector<LossBreakdown> parts;
      std::vector<GridTensor> grads;
      for (std::size_t b = 0; b < samples.size(); ++b) {
        auto lw = total_loss_with_grad(preds[b], samples[b].target, cfg.grid, cfg.weights);
        for (double& g : lw.grad.values()) g *= inv_batch;
        parts.push_back(lw.loss);
        grads.push_back(std::move(lw.grad));
      }
      const LossBreakdown loss = batch_mean(parts);
      ++step;
      if (!std::isfinite(loss.total)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                            " frames [" + join(ids, ',') + "]: " + breakdown_text(loss));
      }
      model.backward(model.grids_to_tensor(grads));
      if (cfg.grad_clip) clip_grad_norm(params, *cfg.grad_clip);
      const double lr_scale =
          cfg.cosine_schedule ? 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step - 1) / total_steps))
                              : 1.0;
      opt.step(lr_scale);

      StepRecord rec;
      rec.epoch = epoch;
      rec.step = step;
      rec.loss = loss;
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.frame_ids = ids;
      step_log.row(std::to_string(epoch) + '\t' + std::to_string(step) + '\t' + num(loss.conf) + '\t' +
                   num(loss.cls) + '\t' + num(loss.box) + '\t' + num(loss.total) + '\t' + num(rec.seconds) + '\t' +
                   join(ids, ','));
      if (hooks.on_step) hooks.on_step(rec);
      log.steps.push_back(std::move(rec));

      epoch_sum.conf += loss.conf;
      epoch_sum.cls += loss.cls;
      epoch_sum.box += loss.box;
      ++epoch_steps;
      if (hooks.max_steps > 0 && step >= hooks.max_steps) {
        stop = true;
        break;
      }
    }

    EpochRecord er;
    er.epoch = epoch;
    er.mean_loss.conf = epoch_sum.conf / epoch_steps;
    er.mean_loss.cls = epoch_sum.cls / epoch_steps;
    er.mean_loss.box = epoch_sum.box / epoch_steps;
    er.mean_loss.total = er.mean_loss.conf + er.mean_loss.cls + er.mean_loss.box;
    if (cfg.val_every > 0 && !split.val.empty() && epoch % cfg.val_every == 0) {
      std::tie(er.val_recognition, er.val_ap50) = validate_frames(model, root, split.val, cfg);
      if (er.val_recognition && (!best_recognition || *er.val_recognition > *best_recognition)) {
        best_recognition = er.val_recognition;
        const auto best = ckpt_dir / "best.ckpt";
        save_checkpoint(best, echo, params);
        log.best_checkpoint = best;
      }
    }
    epoch_log.row(std::to_string(epoch) + '\t' + num(er.mean_loss.conf) + '\t' + num(er.mean_loss.cls) + '\t' +
                  num(er.mean_loss.box) + '\t' + num(er.mean_loss.total) + '\t' + opt_num(er.val_recognition) +
                  '\t' + opt_num(er.val_ap50));
    log.epochs.push_back(er);
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch);
      save_checkpoint(ckpt_dir / name, echo, params);
      log.checkpoints.push_back(ckpt_dir / name);
    }
  }
  log.final_checkpoint = ckpt_dir / "last.ckpt";
  save_checkpoint(log.final_checkpoint, echo, params);
  log.checkpoints.push_back(log.final_checkpoint);
  return log;
}

std::vector<StepRecord> read_step_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<StepRecord> out;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() < 7) throw ParseError(path.string() + ":" + std::to_string(number) + ": expected 8 columns");
    StepRecord r;
    try {
      r.epoch = std::stoi(fields[0]);
      r.step = std::stol(fields[1]);
      r.loss.conf = std::stod(fields[2]);
      r.loss.cls = std::stod(fields[3]);
      r.loss.box = std::stod(fields[4]);
      r.loss.total = std::stod(fields[5]);
      r.seconds = std::stod(fields[6]);
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": malformed number");
    }
    if (fields.size() > 7) {
      std::stringstream ids(fields[7]);
      while (std::getline(ids, f, ',')) r.frame_ids.push_back(f);
    }
    out.push_back(std::move(r));
  }
  return out;
}

TrainConfig config_from_checkpoint(const std::filesystem::path& checkpoint, TrainConfig base) {
  for (const auto& [key, value] : parse_key_values(read_checkpoint_config(checkpoint))) {
    if (key == "net.num_classes") continue;  // implied by classes
    base.set(key, value);
  }
  return base;
}

MonoNext load_model(const std::filesystem::path& checkpoint, const TrainConfig& cfg) {
  cfg.validate();
  MonoNext model(cfg.network, cfg.seed);
  load_checkpoint(checkpoint, model_echo(cfg), model.parameters());
  return model;
}

std::map<std::string, std::vector<BoxSpec>> predict_frames(MonoNext& model, const std::vector<Frame>& frames,
                                                           const GridSpec& grid, const PredictOptions& opts) {
  if (opts.batch_size < 1) throw ArgumentError("predict: batch_size must be >= 1");
  const int n = model.config().input_size;
  const DecodeOptions dopts{opts.threshold, opts.nms_iou};
  std::map<std::string, std::vector<BoxSpec>> out;
  for (std::size_t first = 0; first < frames.size(); first += opts.batch_size) {
    const std::size_t last = std::min(frames.size(), first + static_cast<std::size_t>(opts.batch_size));
    std::vector<Sample> samples;
    for (std::size_t i = first; i < last; ++i) {
      Sample s;
      s.frame_id = frames[i].frame_id;
      append_normalized(resize_bilinear(frames[i].image, n, n), s.input);
      samples.push_back(std::move(s));
    }
    const auto grids = model.to_grids(model.forward(stack_inputs(samples, n), false));
    for (std::size_t i = 0; i < samples.size(); ++i) out[samples[i].frame_id] = decode(grids[i], grid, dopts);
  }
  return out;
}

void write_predictions(const std::filesystem::path& out_dir, const std::vector<Frame>& frames,
                       const std::map<std::string, std::vector<BoxSpec>>& boxes, const ClassMap& classes) {
  std::filesystem::create_directories(out_dir);
  for (const auto& f : frames) {
    std::vector<LabelRecord> records;
    if (const auto it = boxes.find(f.frame_id); it != boxes.end()) {
      for (const auto& b : it->second) {
        if (b.class_id < 0 || b.class_id >= static_cast<int>(classes.names.size())) {
          throw ArgumentError("write_predictions: class id out of range");
        }
        records.push_back(box_to_label(b, classes.names[b.class_id], f.calib, f.image.width, f.image.height));
      }
    }
    write_label_file(out_dir / (f.frame_id + ".txt"), records);
  }
}

std::map<std::string, std::vector<Detection>> to_detections(const std::vector<Frame>& frames,
                                                            const std::map<std::string, std::vector<BoxSpec>>& boxes) {
  std::map<std::string, std::vector<Detection>> out;
  for (const auto& f : frames) {
    auto& dets = out[f.frame_id];
    const auto it = boxes.find(f.frame_id);
    if (it == boxes.end()) continue;
    for (const auto& b : it->second) {
      Detection d;
      d.box = b;
      d.bbox2d = box_to_label(b, "", f.calib, f.image.width, f.image.height).bbox2d;
      dets.push_back(d);
    }
  }
  return out;
}

std::vector<EvalFrame> to_eval_frames(const std::vector<Frame>& frames, const EvalClasses& classes) {
  std::vector<EvalFrame> out;
  for (const auto& f : frames) out.push_back(make_eval_frame(f.frame_id, f.labels, classes));
  return out;
}

}  // namespace mononext
