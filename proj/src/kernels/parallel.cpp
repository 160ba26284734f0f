// OpenMP kernels. Dense convolutions are lowered to im2col + GEMM; every
// parallel loop writes disjoint outputs, so results do not depend on the
// thread count or schedule.

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>

#include "mononext/error.hpp"
#include "mononext/kernels.hpp"

namespace mononext::kernels {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

constexpr std::ptrdiff_t kRowBlock = 256;
constexpr std::ptrdiff_t kColBlock = 64;

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel == 1 && g.stride == 1 && g.pad_top == 0 && g.pad_left == 0;
}

void check_conv(const Tensor& x, const ConvGeometry& g) {
  if (x.h != g.in_h || x.w != g.in_w) {
    throw ArgumentError("conv: input " + x.shape_string() + " does not match geometry " +
                        std::to_string(g.in_h) + "x" + std::to_string(g.in_w));
  }
}

// Rows: output pixels (n, oy, ox). Columns: (ky, kx, ci). Zero outside the image.
std::vector<float> im2col(const Tensor& x, const ConvGeometry& g) {
  const int k = g.kernel;
  const std::size_t K = static_cast<std::size_t>(k) * k * x.c;
  std::vector<float> col(static_cast<std::size_t>(x.n) * g.out_h * g.out_w * K);
  const int rows = x.n * g.out_h;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int n = r / g.out_h;
    const int oy = r % g.out_h;
    for (int ox = 0; ox < g.out_w; ++ox) {
      float* dst = col.data() + ((static_cast<std::size_t>(n) * g.out_h + oy) * g.out_w + ox) * K;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride + ky - g.pad_top;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride + kx - g.pad_left;
          float* d = dst + (static_cast<std::size_t>(ky) * k + kx) * x.c;
          if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) {
            std::fill_n(d, x.c, 0.0f);
          } else {
            std::copy_n(x.pixel(n, iy, ix), x.c, d);
          }
        }
      }
    }
  }
  return col;
}

// dx[n, iy, ix, :] = sum of the dcol entries that im2col copied from that pixel.
void col2im(const std::vector<float>& dcol, const ConvGeometry& g, Tensor& dx) {
  const int k = g.kernel;
  const std::size_t K = static_cast<std::size_t>(k) * k * dx.c;
  const int rows = dx.n * dx.h;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int n = r / dx.h;
    const int iy = r % dx.h;
    for (int ix = 0; ix < dx.w; ++ix) {
      float* out = dx.pixel(n, iy, ix);
      std::fill_n(out, dx.c, 0.0f);
      for (int ky = 0; ky < k; ++ky) {
        const int ty = iy + g.pad_top - ky;
        if (ty < 0 || ty % g.stride != 0) continue;
        const int oy = ty / g.stride;
        if (oy >= g.out_h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int tx = ix + g.pad_left - kx;
          if (tx < 0 || tx % g.stride != 0) continue;
          const int ox = tx / g.stride;
          if (ox >= g.out_w) continue;
          const float* src = dcol.data() + ((static_cast<std::size_t>(n) * g.out_h + oy) * g.out_w + ox) * K +
                             (static_cast<std::size_t>(ky) * k + kx) * dx.c;
          for (int c = 0; c < dx.c; ++c) out[c] += src[c];
        }
      }
    }
  }
}

// out = a * b over row blocks; a is (P x K), b is (K x N).
void gemm_rows(const float* a, const float* b, float* out, std::ptrdiff_t P, std::ptrdiff_t K,
               std::ptrdiff_t N, bool b_transposed) {
  const std::ptrdiff_t blocks = (P + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::ptrdiff_t r0 = blk * kRowBlock;
    const std::ptrdiff_t len = std::min(kRowBlock, P - r0);
    if (N == 1 || len == 1) {
      // Eigen's matrix-vector kernels round differently depending on buffer alignment.
      for (std::ptrdiff_t r = r0; r < r0 + len; ++r)
        for (std::ptrdiff_t j = 0; j < N; ++j) {
          double acc = 0.0;
          for (std::ptrdiff_t k = 0; k < K; ++k)
            acc += static_cast<double>(a[r * K + k]) * (b_transposed ? b[j * K + k] : b[k * N + j]);
          out[r * N + j] = static_cast<float>(acc);
        }
      continue;
    }
    ConstMapMat A(a + r0 * K, len, K);
    MapMat C(out + r0 * N, len, N);
    if (b_transposed) {
      ConstMapMat B(b, N, K);
      C.noalias() = A * B.transpose();
    } else {
      ConstMapMat B(b, K, N);
      C.noalias() = A * B;
    }
  }
}

// dw (K x N) += a^T (K x P) * dy (P x N), parallel over output column blocks.
void gemm_weight_grad(const float* a, const float* dy, float* dw, std::ptrdiff_t P, std::ptrdiff_t K,
                      std::ptrdiff_t N) {
  if (N == 1) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < K; ++k) {
      double acc = 0.0;
      for (std::ptrdiff_t p = 0; p < P; ++p) acc += static_cast<double>(a[p * K + k]) * dy[p];
      dw[k] += static_cast<float>(acc);
    }
    return;
  }
  ConstMapMat A(a, P, K);
  ConstMapMat D(dy, P, N);
  MapMat W(dw, K, N);
  const std::ptrdiff_t blocks = (N + kColBlock - 1) / kColBlock;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::ptrdiff_t c0 = blk * kColBlock;
    const std::ptrdiff_t len = std::min(kColBlock, N - c0);
    if (len == 1) {
      for (std::ptrdiff_t k = 0; k < K; ++k) {
        double acc = 0.0;
        for (std::ptrdiff_t p = 0; p < P; ++p) acc += static_cast<double>(a[p * K + k]) * dy[p * N + c0];
        dw[k * N + c0] += static_cast<float>(acc);
      }
      continue;
    }
    W.middleCols(c0, len).noalias() += A.transpose() * D.middleCols(c0, len);
  }
}

void column_sums(const Tensor& dy, std::span<float> db) {
  const std::size_t P = dy.pixels();
  std::vector<double> acc(static_cast<std::size_t>(dy.c), 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    const float* row = dy.data.data() + p * dy.c;
    for (int c = 0; c < dy.c; ++c) acc[c] += row[c];
  }
  for (int c = 0; c < dy.c; ++c) db[c] += static_cast<float>(acc[c]);
}

}  // namespace

void conv2d_forward(const Tensor& x, std::span<const float> w, std::span<const float> b, int cout,
                    const ConvGeometry& g, Tensor& y) {
  check_conv(x, g);
  const std::ptrdiff_t K = static_cast<std::ptrdiff_t>(g.kernel) * g.kernel * x.c;
  if (w.size() != static_cast<std::size_t>(K * cout)) throw ArgumentError("conv2d_forward: weight size mismatch");
  y = Tensor(x.n, g.out_h, g.out_w, cout);
  const std::ptrdiff_t P = static_cast<std::ptrdiff_t>(y.pixels());
  if (is_pointwise(g)) {
    gemm_rows(x.data.data(), w.data(), y.data.data(), P, K, cout, false);
  } else {
    const auto col = im2col(x, g);
    gemm_rows(col.data(), w.data(), y.data.data(), P, K, cout, false);
  }
  if (!b.empty()) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < P; ++p) {
      float* row = y.data.data() + p * cout;
      for (int c = 0; c < cout; ++c) row[c] += b[c];
    }
  }
}

void conv2d_backward(const Tensor& x, std::span<const float> w, const Tensor& dy, const ConvGeometry& g,
                     Tensor* dx, std::span<float> dw, std::span<float> db) {
  check_conv(x, g);
  const int cout = dy.c;
  const std::ptrdiff_t K = static_cast<std::ptrdiff_t>(g.kernel) * g.kernel * x.c;
  const std::ptrdiff_t P = static_cast<std::ptrdiff_t>(dy.pixels());
  if (!db.empty()) column_sums(dy, db);
  if (is_pointwise(g)) {
    gemm_weight_grad(x.data.data(), dy.data.data(), dw.data(), P, K, cout);
    if (dx) {
      *dx = Tensor(x.n, x.h, x.w, x.c);
      gemm_rows(dy.data.data(), w.data(), dx->data.data(), P, cout, K, true);
    }
    return;
  }
  {
    const auto col = im2col(x, g);
    gemm_weight_grad(col.data(), dy.data.data(), dw.data(), P, K, cout);
  }
  if (dx) {
    std::vector<float> dcol(static_cast<std::size_t>(P * K));
    gemm_rows(dy.data.data(), w.data(), dcol.data(), P, cout, K, true);
    *dx = Tensor(x.n, x.h, x.w, x.c);
    col2im(dcol, g, *dx);
  }
}

void depthwise_forward(const Tensor& x, std::span<const float> w, std::span<const float> b,
                       const ConvGeometry& g, Tensor& y) {
  check_conv(x, g);
  const int k = g.kernel;
  const int C = x.c;
  y = Tensor(x.n, g.out_h, g.out_w, C);
  const int rows = x.n * g.out_h;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int n = r / g.out_h;
    const int oy = r % g.out_h;
    for (int ox = 0; ox < g.out_w; ++ox) {
      float* out = y.pixel(n, oy, ox);
      if (b.empty()) {
        std::fill_n(out, C, 0.0f);
      } else {
        std::copy_n(b.data(), C, out);
      }
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride + ky - g.pad_top;
        if (iy < 0 || iy >= x.h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride + kx - g.pad_left;
          if (ix < 0 || ix >= x.w) continue;
          const float* in = x.pixel(n, iy, ix);
          const float* wk = w.data() + (static_cast<std::size_t>(ky) * k + kx) * C;
          for (int c = 0; c < C; ++c) out[c] += in[c] * wk[c];
        }
      }
    }
  }
}

void depthwise_backward(const Tensor& x, std::span<const float> w, const Tensor& dy, const ConvGeometry& g,
                        Tensor* dx, std::span<float> dw, std::span<float> db) {
  check_conv(x, g);
  const int k = g.kernel;
  const int C = x.c;
  if (!db.empty()) column_sums(dy, db);

  const int taps = k * k;
#pragma omp parallel for schedule(static)
  for (int t = 0; t < taps; ++t) {
    const int ky = t / k;
    const int kx = t % k;
    std::vector<double> acc(static_cast<std::size_t>(C), 0.0);
    for (int n = 0; n < x.n; ++n)
      for (int oy = 0; oy < g.out_h; ++oy) {
        const int iy = oy * g.stride + ky - g.pad_top;
        if (iy < 0 || iy >= x.h) continue;
        for (int ox = 0; ox < g.out_w; ++ox) {
          const int ix = ox * g.stride + kx - g.pad_left;
          if (ix < 0 || ix >= x.w) continue;
          const float* in = x.pixel(n, iy, ix);
          const float* d = dy.pixel(n, oy, ox);
          for (int c = 0; c < C; ++c) acc[c] += static_cast<double>(in[c] * d[c]);
        }
      }
    float* wk = dw.data() + static_cast<std::size_t>(t) * C;
    for (int c = 0; c < C; ++c) wk[c] += static_cast<float>(acc[c]);
  }

  if (!dx) return;
  *dx = Tensor(x.n, x.h, x.w, C);
  const int rows = x.n * x.h;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int n = r / x.h;
    const int iy = r % x.h;
    for (int ix = 0; ix < x.w; ++ix) {
      float* out = dx->pixel(n, iy, ix);
      for (int ky = 0; ky < k; ++ky) {
        const int ty = iy + g.pad_top - ky;
        if (ty < 0 || ty % g.stride != 0 || ty / g.stride >= g.out_h) continue;
        const int oy = ty / g.stride;
        for (int kx = 0; kx < k; ++kx) {
          const int tx = ix + g.pad_left - kx;
          if (tx < 0 || tx % g.stride != 0 || tx / g.stride >= g.out_w) continue;
          const int ox = tx / g.stride;
          const float* d = dy.pixel(n, oy, ox);
          const float* wk = w.data() + (static_cast<std::size_t>(ky) * k + kx) * C;
          for (int c = 0; c < C; ++c) out[c] += d[c] * wk[c];
        }
      }
    }
  }
}

void layernorm_forward(const Tensor& x, std::span<const float> gamma, std::span<const float> beta, float eps,
                       Tensor& y, std::vector<float>& mean, std::vector<float>& rstd) {
  const std::ptrdiff_t P = static_cast<std::ptrdiff_t>(x.pixels());
  const int C = x.c;
  y = Tensor(x.n, x.h, x.w, C);
  mean.assign(static_cast<std::size_t>(P), 0.0f);
  rstd.assign(static_cast<std::size_t>(P), 0.0f);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < P; ++p) {
    const float* xp = x.data.data() + p * C;
    float* yp = y.data.data() + p * C;
    float m = 0.0f;
    for (int c = 0; c < C; ++c) m += xp[c];
    m /= static_cast<float>(C);
    float v = 0.0f;
    for (int c = 0; c < C; ++c) v += (xp[c] - m) * (xp[c] - m);
    v /= static_cast<float>(C);
    const float r = 1.0f / std::sqrt(v + eps);
    mean[p] = m;
    rstd[p] = r;
    for (int c = 0; c < C; ++c) yp[c] = (xp[c] - m) * r * gamma[c] + beta[c];
  }
}

void layernorm_backward(const Tensor& x, std::span<const float> gamma, const std::vector<float>& mean,
                        const std::vector<float>& rstd, const Tensor& dy, Tensor& dx,
                        std::span<float> dgamma, std::span<float> dbeta) {
  const std::ptrdiff_t P = static_cast<std::ptrdiff_t>(x.pixels());
  const int C = x.c;
  dx = Tensor(x.n, x.h, x.w, C);
  const float inv_c = 1.0f / static_cast<float>(C);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < P; ++p) {
    const float* xp = x.data.data() + p * C;
    const float* dyp = dy.data.data() + p * C;
    float* dxp = dx.data.data() + p * C;
    const float m = mean[p];
    const float r = rstd[p];
    float sum_g = 0.0f, sum_gx = 0.0f;
    for (int c = 0; c < C; ++c) {
      const float gc = dyp[c] * gamma[c];
      sum_g += gc;
      sum_gx += gc * (xp[c] - m) * r;
    }
    for (int c = 0; c < C; ++c) {
      const float xhat = (xp[c] - m) * r;
      dxp[c] = r * (dyp[c] * gamma[c] - sum_g * inv_c - xhat * sum_gx * inv_c);
    }
  }
  std::vector<double> gg(static_cast<std::size_t>(C), 0.0), gb(static_cast<std::size_t>(C), 0.0);
  for (std::ptrdiff_t p = 0; p < P; ++p) {
    const float* xp = x.data.data() + p * C;
    const float* dyp = dy.data.data() + p * C;
    const float m = mean[p];
    const float r = rstd[p];
    for (int c = 0; c < C; ++c) {
      gg[c] += static_cast<double>(dyp[c] * (xp[c] - m) * r);
      gb[c] += dyp[c];
    }
  }
  for (int c = 0; c < C; ++c) {
    dgamma[c] += static_cast<float>(gg[c]);
    dbeta[c] += static_cast<float>(gb[c]);
  }
}

// Eigen's vectorized erf/exp; scalar libm calls were the bottleneck here. Every element goes through
// an aligned fixed-size block so the result does not depend on where a chunk starts in memory.
namespace {

constexpr int kLanes = 16;
using Lanes = Eigen::Array<float, kLanes, 1>;

template <typename F>
void for_each_block(std::ptrdiff_t n, F&& f) {
  const std::ptrdiff_t blocks = (n + kLanes - 1) / kLanes;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const std::ptrdiff_t i0 = b * kLanes;
    f(i0, static_cast<int>(std::min<std::ptrdiff_t>(kLanes, n - i0)));
  }
}

Lanes load(const float* src, int len) {
  Lanes v = Lanes::Zero();
  std::copy_n(src, len, v.data());
  return v;
}

}  // namespace

void gelu_forward(std::span<const float> x, std::span<float> y) {
  constexpr float kInvSqrt2 = static_cast<float>(1.0 / std::numbers::sqrt2);
  for_each_block(static_cast<std::ptrdiff_t>(x.size()), [&](std::ptrdiff_t i0, int len) {
    const Lanes X = load(x.data() + i0, len);
    const Lanes Y = 0.5f * X * (1.0f + (X * kInvSqrt2).erf());
    std::copy_n(Y.data(), len, y.data() + i0);
  });
}

void gelu_backward(std::span<const float> x, std::span<const float> dy, std::span<float> dx) {
  constexpr float kInvSqrt2 = static_cast<float>(1.0 / std::numbers::sqrt2);
  constexpr float kInvSqrt2Pi = static_cast<float>(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  for_each_block(static_cast<std::ptrdiff_t>(x.size()), [&](std::ptrdiff_t i0, int len) {
    const Lanes X = load(x.data() + i0, len);
    const Lanes DY = load(dy.data() + i0, len);
    const Lanes DX = DY * (0.5f * (1.0f + (X * kInvSqrt2).erf()) + X * (-0.5f * X.square()).exp() * kInvSqrt2Pi);
    std::copy_n(DX.data(), len, dx.data() + i0);
  });
}

void relu6_forward(std::span<const float> x, std::span<float> y) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) y[i] = std::clamp(x[i], 0.0f, 6.0f);
}

void relu6_backward(std::span<const float> x, std::span<const float> dy, std::span<float> dx) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) dx[i] = (x[i] > 0.0f && x[i] < 6.0f) ? dy[i] : 0.0f;
}

}  // namespace mononext::kernels
