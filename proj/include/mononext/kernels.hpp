#pragma once

// Layer kernels. `mononext::kernels` holds the OpenMP-parallel versions used by
// the network; `mononext::kernels::reference` holds direct serial loops with
// double accumulation that the tests use as oracles. Both share signatures.
//
// Weight layouts:
//   dense conv      [k][k][cin][cout]
//   depthwise conv  [k][k][c]
// Backward kernels accumulate into dw / db and overwrite dx.

#include <span>

#include "mononext/tensor.hpp"

namespace mononext {

/// Stride/padding of a 2D convolution with "same" semantics: out = ceil(in / stride),
/// padding split with the smaller half before.
struct ConvGeometry {
  int kernel = 1;
  int stride = 1;
  int pad_top = 0;
  int pad_left = 0;
  int in_h = 0, in_w = 0;
  int out_h = 0, out_w = 0;

  static ConvGeometry same(int in_h, int in_w, int kernel, int stride);
};

namespace kernels {

void conv2d_forward(const Tensor& x, std::span<const float> w, std::span<const float> b, int cout,
                    const ConvGeometry& g, Tensor& y);
void conv2d_backward(const Tensor& x, std::span<const float> w, const Tensor& dy, const ConvGeometry& g,
                     Tensor* dx, std::span<float> dw, std::span<float> db);

void depthwise_forward(const Tensor& x, std::span<const float> w, std::span<const float> b,
                       const ConvGeometry& g, Tensor& y);
void depthwise_backward(const Tensor& x, std::span<const float> w, const Tensor& dy, const ConvGeometry& g,
                        Tensor* dx, std::span<float> dw, std::span<float> db);

/// Normalizes each pixel over its channels. mean/rstd get one entry per pixel.
void layernorm_forward(const Tensor& x, std::span<const float> gamma, std::span<const float> beta, float eps,
                       Tensor& y, std::vector<float>& mean, std::vector<float>& rstd);
void layernorm_backward(const Tensor& x, std::span<const float> gamma, const std::vector<float>& mean,
                        const std::vector<float>& rstd, const Tensor& dy, Tensor& dx,
                        std::span<float> dgamma, std::span<float> dbeta);

void gelu_forward(std::span<const float> x, std::span<float> y);
void gelu_backward(std::span<const float> x, std::span<const float> dy, std::span<float> dx);

void relu6_forward(std::span<const float> x, std::span<float> y);
void relu6_backward(std::span<const float> x, std::span<const float> dy, std::span<float> dx);

namespace reference {

void conv2d_forward(const Tensor& x, std::span<const float> w, std::span<const float> b, int cout,
                    const ConvGeometry& g, Tensor& y);
void conv2d_backward(const Tensor& x, std::span<const float> w, const Tensor& dy, const ConvGeometry& g,
                     Tensor* dx, std::span<float> dw, std::span<float> db);
void depthwise_forward(const Tensor& x, std::span<const float> w, std::span<const float> b,
                       const ConvGeometry& g, Tensor& y);
void depthwise_backward(const Tensor& x, std::span<const float> w, const Tensor& dy, const ConvGeometry& g,
                        Tensor* dx, std::span<float> dw, std::span<float> db);
void layernorm_forward(const Tensor& x, std::span<const float> gamma, std::span<const float> beta, float eps,
                       Tensor& y, std::vector<float>& mean, std::vector<float>& rstd);
void layernorm_backward(const Tensor& x, std::span<const float> gamma, const std::vector<float>& mean,
                        const std::vector<float>& rstd, const Tensor& dy, Tensor& dx,
                        std::span<float> dgamma, std::span<float> dbeta);
void gelu_forward(std::span<const float> x, std::span<float> y);
void gelu_backward(std::span<const float> x, std::span<const float> dy, std::span<float> dx);

}  // namespace reference
}  // namespace kernels
}  // namespace mononext
