#include "mononext/network.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "mononext/error.hpp"

namespace mononext {

namespace {

constexpr std::array<Task, 5> kTasks{Task::Conf, Task::Class, Task::Pos, Task::Dim, Task::Yaw};
constexpr std::array<int, 5> kTinyChannels{8, 16, 32, 64, 64};

struct InvertedResidualStage {
  int expand, channels, repeats, stride;
};
constexpr std::array<InvertedResidualStage, 7> kMobileNetV2Stages{{
    {1, 16, 1, 1},
    {6, 24, 2, 2},
    {6, 32, 3, 2},
    {6, 64, 4, 2},
    {6, 96, 3, 1},
    {6, 160, 3, 2},
    {6, 320, 1, 1},
}};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void build_backbone(Sequential& net, BackboneKind kind) {
  if (kind == BackboneKind::Tiny) {
    int cin = 3;
    for (std::size_t i = 0; i < kTinyChannels.size(); ++i) {
      const std::string name = "backbone." + std::to_string(i);
      auto conv = std::make_unique<Conv2d>(name + ".conv", cin, kTinyChannels[i], 3, 2);
      if (i == 0) conv->propagate_input_grad = false;
      net.add(std::move(conv));
      net.add(std::make_unique<LayerNorm>(name + ".norm", kTinyChannels[i]));
      net.add(std::make_unique<Gelu>());
      cin = kTinyChannels[i];
    }
    return;
  }
  auto stem = std::make_unique<Conv2d>("backbone.stem.conv", 3, 32, 3, 2, false);
  stem->propagate_input_grad = false;
  net.add(std::move(stem));
  net.add(std::make_unique<LayerNorm>("backbone.stem.norm", 32));
  net.add(std::make_unique<Relu6>());
  int cin = 32;
  int index = 0;
  for (const auto& stage : kMobileNetV2Stages) {
    for (int r = 0; r < stage.repeats; ++r) {
      net.add(make_inverted_residual("backbone.ir" + std::to_string(index++), cin, stage.channels,
                                     r == 0 ? stage.stride : 1, stage.expand));
      cin = stage.channels;
    }
  }
  net.add(std::make_unique<Conv2d>("backbone.last.conv", cin, 1280, 1, 1, false));
  net.add(std::make_unique<LayerNorm>("backbone.last.norm", 1280));
  net.add(std::make_unique<Relu6>());
}

const char* task_name(Task t) {
  switch (t) {
    case Task::Conf: return "conf";
    case Task::Class: return "class";
    case Task::Pos: return "pos";
    case Task::Dim: return "dim";
    case Task::Yaw: return "yaw";
  }
  return "?";
}

}  // namespace

const char* to_string(BackboneKind kind) {
  return kind == BackboneKind::Tiny ? "tiny_backbone" : "mobilenet_v2_like";
}

BackboneKind parse_backbone(const std::string& text) {
  if (text == "tiny_backbone" || text == "tiny") return BackboneKind::Tiny;
  if (text == "mobilenet_v2_like" || text == "mobilenet_v2") return BackboneKind::MobileNetV2Like;
  throw ArgumentError("unknown backbone '" + text + "'");
}

Task parse_task(const std::string& text) {
  for (Task t : kTasks) {
    if (text == task_name(t)) return t;
  }
  throw ArgumentError("unknown task '" + text + "'");
}

int backbone_channels(BackboneKind kind) {
  return kind == BackboneKind::Tiny ? kTinyChannels.back() : 1280;
}

int task_channels(Task task, int num_classes) {
  switch (task) {
    case Task::Conf: return 1;
    case Task::Class: return num_classes;
    case Task::Pos: return 3;
    case Task::Dim: return 3;
    case Task::Yaw: return 1;
  }
  throw ArgumentError("unknown task");
}

std::string format_blocks(const std::vector<BlockSpec>& blocks) {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(blocks[i].filters) + ':' + std::to_string(blocks[i].kernel);
  }
  return out;
}

std::vector<BlockSpec> parse_blocks(const std::string& text) {
  std::vector<BlockSpec> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ArgumentError("block spec '" + item + "' is not filters:kernel");
    try {
      out.push_back({std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw ArgumentError("block spec '" + item + "' is not filters:kernel");
    }
  }
  return out;
}

void NetworkConfig::validate() const {
  if (input_size < 32 || input_size % 32 != 0) throw ArgumentError("NetworkConfig: input_size must be a multiple of 32");
  if (blocks.empty()) throw ArgumentError("NetworkConfig: block schedule is empty");
  for (const auto& b : blocks) {
    if (b.filters < 1 || b.kernel < 1) throw ArgumentError("NetworkConfig: block filters and kernel must be positive");
  }
  if (blocks.back().filters != 128) throw ArgumentError("NetworkConfig: final block must have 128 filters");
  if (head_block.filters < 1 || head_block.kernel < 1) throw ArgumentError("NetworkConfig: bad head block");
  if (num_classes < 1) throw ArgumentError("NetworkConfig: num_classes must be >= 1");
}

std::string NetworkConfig::echo() const {
  std::ostringstream out;
  out << "net.input_size = " << input_size << '\n'
      << "net.backbone = " << to_string(backbone) << '\n'
      << "net.blocks = " << format_blocks(blocks) << '\n'
      << "net.head_block = " << format_blocks({head_block}) << '\n'
      << "net.num_classes = " << num_classes << '\n'
      << "net.depthwise_k7 = " << (depthwise_k7 ? "true" : "false") << '\n';
  return out.str();
}

MonoNext::MonoNext(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  build_backbone(backbone_, cfg_.backbone);
  int cin = backbone_channels(cfg_.backbone);
  for (std::size_t i = 0; i < cfg_.blocks.size(); ++i) {
    const auto& b = cfg_.blocks[i];
    trunk_.add(make_convnext_block("block" + std::to_string(i), cin, b.filters, b.kernel, cfg_.depthwise_k7));
    cin = b.filters;
  }
  for (std::size_t t = 0; t < kTasks.size(); ++t) {
    const std::string name = std::string("head.") + task_name(kTasks[t]);
    heads_[t].add(make_convnext_block(name + ".block", cin, cfg_.head_block.filters, cfg_.head_block.kernel,
                                      cfg_.depthwise_k7));
    heads_[t].add(std::make_unique<Conv2d>(name + ".out", cfg_.head_block.filters,
                                           task_channels(kTasks[t], cfg_.num_classes), 1));
  }
  initialize(seed);
}

void MonoNext::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 0.02f);
  for (Parameter* p : parameters()) {
    if (ends_with(p->name, ".weight")) {
      if (ends_with(p->name, ".proj.weight")) continue;  // residual branch starts as identity
      for (float& v : p->value) {
        float s;
        do {
          s = normal(rng);
        } while (std::abs(s) > 0.04f);
        v = s;
      }
    }
  }
  for (Parameter* p : parameters()) {
    if (p->name == "head.conf.out.bias") std::fill(p->value.begin(), p->value.end(), std::log(0.01f / 0.99f));
  }
}

void MonoNext::check_input(const Tensor& images) const {
  if (images.n < 1 || images.h != cfg_.input_size || images.w != cfg_.input_size || images.c != 3) {
    throw ArgumentError("MonoNext: expected input (N," + std::to_string(cfg_.input_size) + "," +
                        std::to_string(cfg_.input_size) + ",3), got " + images.shape_string());
  }
}

Tensor MonoNext::backbone_forward(const Tensor& images, bool train) {
  check_input(images);
  return backbone_.forward(images, train);
}

Tensor MonoNext::feature_extractor_forward(const Tensor& images, bool train) {
  return trunk_.forward(backbone_forward(images, train), train);
}

Tensor MonoNext::head_forward(const Tensor& features, Task task, bool train) {
  const int t = static_cast<int>(task);
  if (t < 0 || t >= 5) throw ArgumentError("head_forward: unknown task");
  Tensor y = heads_[t].forward(features, train);
  const std::size_t P = y.pixels();
  if (task == Task::Class) {
    for (std::size_t p = 0; p < P; ++p) {
      float* v = y.data.data() + p * y.c;
      float mx = v[0];
      for (int c = 1; c < y.c; ++c) mx = std::max(mx, v[c]);
      float sum = 0.0f;
      for (int c = 0; c < y.c; ++c) {
        v[c] = std::exp(v[c] - mx);
        sum += v[c];
      }
      for (int c = 0; c < y.c; ++c) v[c] /= sum;
    }
  } else {
    for (float& v : y.data) v = 1.0f / (1.0f + std::exp(-v));
  }
  if (train) head_outputs_[t] = y;
  return y;
}

Tensor MonoNext::forward(const Tensor& images, bool train) {
  const Tensor features = feature_extractor_forward(images, train);
  const int S = features.h;
  const int C = cfg_.num_classes;
  Tensor out(features.n, S, features.w, 1 + C + 7);
  int offset = 0;
  for (Task task : kTasks) {
    const Tensor h = head_forward(features, task, train);
    for (int n = 0; n < out.n; ++n)
      for (int r = 0; r < S; ++r)
        for (int c = 0; c < out.w; ++c)
          std::copy_n(h.pixel(n, S - 1 - r, c), h.c, out.pixel(n, r, c) + offset);
    offset += h.c;
  }
  return out;
}

void MonoNext::backward(const Tensor& d_output) {
  Tensor d_features;
  int offset = 0;
  for (std::size_t t = 0; t < kTasks.size(); ++t) {
    const Tensor& act = head_outputs_[t];
    if (act.size() == 0) throw ArgumentError("MonoNext::backward without a training forward pass");
    const int S = act.h;
    Tensor d_logits(act.n, act.h, act.w, act.c);
    for (int n = 0; n < act.n; ++n)
      for (int r = 0; r < S; ++r)
        for (int c = 0; c < act.w; ++c) {
          const float* g = d_output.pixel(n, r, c) + offset;
          const float* a = act.pixel(n, S - 1 - r, c);
          float* d = d_logits.pixel(n, S - 1 - r, c);
          if (kTasks[t] == Task::Class) {
            float dot = 0.0f;
            for (int k = 0; k < act.c; ++k) dot += g[k] * a[k];
            for (int k = 0; k < act.c; ++k) d[k] = a[k] * (g[k] - dot);
          } else {
            for (int k = 0; k < act.c; ++k) d[k] = g[k] * a[k] * (1.0f - a[k]);
          }
        }
    offset += act.c;
    Tensor d = heads_[t].backward(d_logits);
    if (d_features.size() == 0) {
      d_features = std::move(d);
    } else {
      for (std::size_t i = 0; i < d.size(); ++i) d_features.data[i] += d.data[i];
    }
    head_outputs_[t] = Tensor();
  }
  const Tensor d_backbone = trunk_.backward(d_features);
  backbone_.backward(d_backbone);
}

std::vector<GridTensor> MonoNext::to_grids(const Tensor& output) const {
  std::vector<GridTensor> grids;
  for (int n = 0; n < output.n; ++n) {
    GridTensor g(output.h, cfg_.num_classes);
    for (int r = 0; r < output.h; ++r)
      for (int c = 0; c < output.w; ++c) {
        const float* src = output.pixel(n, r, c);
        auto cell = g.cell(r, c);
        for (int k = 0; k < output.c; ++k) cell[k] = src[k];
      }
    grids.push_back(std::move(g));
  }
  return grids;
}

Tensor MonoNext::grids_to_tensor(const std::vector<GridTensor>& grids) const {
  if (grids.empty()) return Tensor();
  const int S = grids.front().side();
  Tensor out(static_cast<int>(grids.size()), S, S, grids.front().channels());
  for (int n = 0; n < out.n; ++n)
    for (int r = 0; r < S; ++r)
      for (int c = 0; c < S; ++c) {
        const auto cell = grids[n].cell(r, c);
        float* dst = out.pixel(n, r, c);
        for (int k = 0; k < out.c; ++k) dst[k] = static_cast<float>(cell[k]);
      }
  return out;
}

std::vector<Parameter*> MonoNext::parameters() {
  std::vector<Parameter*> out;
  backbone_.collect_parameters(out);
  trunk_.collect_parameters(out);
  for (auto& h : heads_) h.collect_parameters(out);
  return out;
}

void MonoNext::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::size_t MonoNext::parameter_count() {
  std::size_t total = 0;
  for (Parameter* p : parameters()) total += p->size();
  return total;
}

std::size_t count_parameters(const NetworkConfig& cfg) {
  MonoNext model(cfg, 0);
  return model.parameter_count();
}

}  // namespace mononext
