#include "mononext/layers.hpp"

#include "mononext/error.hpp"

namespace mononext {

namespace {

void check_channels(const Tensor& x, int expected, const std::string& who) {
  if (x.c != expected) {
    throw ArgumentError(who + ": expected " + std::to_string(expected) + " input channels, got " +
                        std::to_string(x.c));
  }
}

}  // namespace

Conv2d::Conv2d(const std::string& name, int cin_, int cout_, int kernel_, int stride_, bool with_bias)
    : weight(name + ".weight", {kernel_, kernel_, cin_, cout_}),
      bias(with_bias ? Parameter(name + ".bias", {cout_}) : Parameter()),
      cin(cin_),
      cout(cout_),
      kernel(kernel_),
      stride(stride_) {}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  check_channels(x, cin, weight.name);
  const auto g = ConvGeometry::same(x.h, x.w, kernel, stride);
  Tensor y;
  kernels::conv2d_forward(x, weight.value, bias.value, cout, g, y);
  if (train) {
    input_ = x;
    geom_ = g;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  Tensor dx;
  kernels::conv2d_backward(input_, weight.value, dy, geom_, propagate_input_grad ? &dx : nullptr,
                           weight.grad, bias.grad);
  input_ = Tensor();
  return dx;
}

void Conv2d::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (bias.size() > 0) out.push_back(&bias);
}

DepthwiseConv2d::DepthwiseConv2d(const std::string& name, int channels_, int kernel_, int stride_, bool with_bias)
    : weight(name + ".weight", {kernel_, kernel_, channels_}),
      bias(with_bias ? Parameter(name + ".bias", {channels_}) : Parameter()),
      channels(channels_),
      kernel(kernel_),
      stride(stride_) {}

Tensor DepthwiseConv2d::forward(const Tensor& x, bool train) {
  check_channels(x, channels, weight.name);
  const auto g = ConvGeometry::same(x.h, x.w, kernel, stride);
  Tensor y;
  kernels::depthwise_forward(x, weight.value, bias.value, g, y);
  if (train) {
    input_ = x;
    geom_ = g;
  }
  return y;
}

Tensor DepthwiseConv2d::backward(const Tensor& dy) {
  Tensor dx;
  kernels::depthwise_backward(input_, weight.value, dy, geom_, &dx, weight.grad, bias.grad);
  input_ = Tensor();
  return dx;
}

void DepthwiseConv2d::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (bias.size() > 0) out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, int channels, float eps)
    : gamma(name + ".gamma", {channels}), beta(name + ".beta", {channels}), eps_(eps) {
  std::fill(gamma.value.begin(), gamma.value.end(), 1.0f);
}

Tensor LayerNorm::forward(const Tensor& x, bool train) {
  check_channels(x, static_cast<int>(gamma.size()), gamma.name);
  Tensor y;
  std::vector<float> mean, rstd;
  kernels::layernorm_forward(x, gamma.value, beta.value, eps_, y, mean, rstd);
  if (train) {
    input_ = x;
    mean_ = std::move(mean);
    rstd_ = std::move(rstd);
  }
  return y;
}

Tensor LayerNorm::backward(const Tensor& dy) {
  Tensor dx;
  kernels::layernorm_backward(input_, gamma.value, mean_, rstd_, dy, dx, gamma.grad, beta.grad);
  input_ = Tensor();
  return dx;
}

void LayerNorm::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

Tensor Gelu::forward(const Tensor& x, bool train) {
  Tensor y(x.n, x.h, x.w, x.c);
  kernels::gelu_forward(x.data, y.data);
  if (train) input_ = x;
  return y;
}

Tensor Gelu::backward(const Tensor& dy) {
  Tensor dx(dy.n, dy.h, dy.w, dy.c);
  kernels::gelu_backward(input_.data, dy.data, dx.data);
  input_ = Tensor();
  return dx;
}

Tensor Relu6::forward(const Tensor& x, bool train) {
  Tensor y(x.n, x.h, x.w, x.c);
  kernels::relu6_forward(x.data, y.data);
  if (train) input_ = x;
  return y;
}

Tensor Relu6::backward(const Tensor& dy) {
  Tensor dx(dy.n, dy.h, dy.w, dy.c);
  kernels::relu6_backward(input_.data, dy.data, dx.data);
  input_ = Tensor();
  return dx;
}

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor cur = x;
  for (auto& layer : layers_) cur = layer->forward(cur, train);
  return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor cur = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

void Sequential::collect_parameters(std::vector<Parameter*>& out) {
  for (auto& layer : layers_) layer->collect_parameters(out);
}

Tensor Residual::forward(const Tensor& x, bool train) {
  Tensor y = body_->forward(x, train);
  if (!y.same_shape(x)) throw ArgumentError("Residual: body changed the shape " + x.shape_string() + " -> " + y.shape_string());
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
  return y;
}

Tensor Residual::backward(const Tensor& dy) {
  Tensor dx = body_->backward(dy);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dy.data[i];
  return dx;
}

ModulePtr make_convnext_subblock(const std::string& name, int channels, bool depthwise_k7) {
  auto body = std::make_unique<Sequential>();
  if (depthwise_k7) {
    body->add(std::make_unique<DepthwiseConv2d>(name + ".dw7", channels, 7));
  } else {
    body->add(std::make_unique<Conv2d>(name + ".conv7", channels, channels, 7));
  }
  body->add(std::make_unique<LayerNorm>(name + ".norm", channels));
  body->add(std::make_unique<Conv2d>(name + ".expand", channels, 4 * channels, 1));
  body->add(std::make_unique<Gelu>());
  body->add(std::make_unique<Conv2d>(name + ".proj", 4 * channels, channels, 1));
  return std::make_unique<Residual>(std::move(body));
}

ModulePtr make_convnext_block(const std::string& name, int cin, int filters, int kernel, bool depthwise_k7) {
  auto block = std::make_unique<Sequential>();
  block->add(std::make_unique<Conv2d>(name + ".conv", cin, filters, kernel));
  block->add(make_convnext_subblock(name + ".sub", filters, depthwise_k7));
  block->add(std::make_unique<LayerNorm>(name + ".norm", filters));
  return block;
}

ModulePtr make_inverted_residual(const std::string& name, int cin, int cout, int stride, int expand) {
  auto body = std::make_unique<Sequential>();
  const int hidden = cin * expand;
  if (expand != 1) {
    body->add(std::make_unique<Conv2d>(name + ".expand", cin, hidden, 1, 1, false));
    body->add(std::make_unique<LayerNorm>(name + ".expand_norm", hidden));
    body->add(std::make_unique<Relu6>());
  }
  body->add(std::make_unique<DepthwiseConv2d>(name + ".dw", hidden, 3, stride, false));
  body->add(std::make_unique<LayerNorm>(name + ".dw_norm", hidden));
  body->add(std::make_unique<Relu6>());
  body->add(std::make_unique<Conv2d>(name + ".project", hidden, cout, 1, 1, false));
  body->add(std::make_unique<LayerNorm>(name + ".project_norm", cout));
  if (stride == 1 && cin == cout) return std::make_unique<Residual>(std::move(body));
  return body;
}

}  // namespace mononext
