#pragma once

// Layers with hand-written backward passes. A layer caches what its backward
// pass needs only when forward runs with train = true; backward must follow
// the matching forward.

#include <memory>
#include <string>
#include <vector>

#include "mononext/kernels.hpp"
#include "mononext/tensor.hpp"

namespace mononext {

class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_parameters(std::vector<Parameter*>& out) { (void)out; }
};

using ModulePtr = std::unique_ptr<Module>;

/// Dense 2D convolution with "same" padding.
class Conv2d : public Module {
 public:
  Conv2d(const std::string& name, int cin, int cout, int kernel, int stride = 1, bool bias = true);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_parameters(std::vector<Parameter*>& out) override;

  Parameter weight;
  Parameter bias;  // empty when disabled
  int cin, cout, kernel, stride;
  /// When false the input gradient is not computed (first layer of the network).
  bool propagate_input_grad = true;

 private:
  Tensor input_;
  ConvGeometry geom_;
};

class DepthwiseConv2d : public Module {
 public:
  DepthwiseConv2d(const std::string& name, int channels, int kernel, int stride = 1, bool bias = true);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_parameters(std::vector<Parameter*>& out) override;

  Parameter weight;
  Parameter bias;
  int channels, kernel, stride;

 private:
  Tensor input_;
  ConvGeometry geom_;
};

/// Normalization over the channel axis of every pixel, with affine gamma/beta.
class LayerNorm : public Module {
 public:
  LayerNorm(const std::string& name, int channels, float eps = 1e-6f);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_parameters(std::vector<Parameter*>& out) override;

  Parameter gamma;
  Parameter beta;

 private:
  float eps_;
  Tensor input_;
  std::vector<float> mean_, rstd_;
};

class Gelu : public Module {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor input_;
};

class Relu6 : public Module {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor input_;
};

class Sequential : public Module {
 public:
  Sequential() = default;
  Sequential& add(ModulePtr m) {
    layers_.push_back(std::move(m));
    return *this;
  }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  std::size_t size() const { return layers_.size(); }
  Module& operator[](std::size_t i) { return *layers_[i]; }

 private:
  std::vector<ModulePtr> layers_;
};

/// y = x + body(x)
class Residual : public Module {
 public:
  explicit Residual(ModulePtr body) : body_(std::move(body)) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_parameters(std::vector<Parameter*>& out) override { body_->collect_parameters(out); }

 private:
  ModulePtr body_;
};

/// ConvNext-style residual sub-block on N channels:
///   x + Conv1x1(N) . GELU . Conv1x1(4N) . LayerNorm . Conv7x7(N)
/// The 7x7 convolution is depthwise unless `depthwise_k7` is false. The last
/// projection is named "<name>.proj" so it can be zero-initialized.
ModulePtr make_convnext_subblock(const std::string& name, int channels, bool depthwise_k7);

/// Conv(kernel, filters) -> sub-block(filters) -> LayerNorm.
ModulePtr make_convnext_block(const std::string& name, int cin, int filters, int kernel, bool depthwise_k7);

/// MobileNetV2 inverted residual with LayerNorm in place of BatchNorm.
ModulePtr make_inverted_residual(const std::string& name, int cin, int cout, int stride, int expand);

}  // namespace mononext
