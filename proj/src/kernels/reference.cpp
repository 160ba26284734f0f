// Direct serial loops. Slow and obviously correct; kept as the oracle for the
// parallel kernels.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mononext/error.hpp"
#include "mononext/kernels.hpp"

namespace mononext {

ConvGeometry ConvGeometry::same(int in_h, int in_w, int kernel, int stride) {
  if (kernel < 1 || stride < 1 || in_h < 1 || in_w < 1) throw ArgumentError("ConvGeometry: bad arguments");
  ConvGeometry g;
  g.kernel = kernel;
  g.stride = stride;
  g.in_h = in_h;
  g.in_w = in_w;
  g.out_h = (in_h + stride - 1) / stride;
  g.out_w = (in_w + stride - 1) / stride;
  const int pad_h = std::max((g.out_h - 1) * stride + kernel - in_h, 0);
  const int pad_w = std::max((g.out_w - 1) * stride + kernel - in_w, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

namespace kernels::reference {

void conv2d_forward(const Tensor& x, std::span<const float> w, std::span<const float> b, int cout,
                    const ConvGeometry& g, Tensor& y) {
  const int cin = x.c;
  const int k = g.kernel;
  y = Tensor(x.n, g.out_h, g.out_w, cout);
  for (int n = 0; n < x.n; ++n)
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox)
        for (int co = 0; co < cout; ++co) {
          double acc = b.empty() ? 0.0 : b[co];
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * g.stride + ky - g.pad_top;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * g.stride + kx - g.pad_left;
              if (ix < 0 || ix >= x.w) continue;
              for (int ci = 0; ci < cin; ++ci) {
                acc += static_cast<double>(x.at(n, iy, ix, ci)) *
                       w[((static_cast<std::size_t>(ky) * k + kx) * cin + ci) * cout + co];
              }
            }
          }
          y.at(n, oy, ox, co) = static_cast<float>(acc);
        }
}

void conv2d_backward(const Tensor& x, std::span<const float> w, const Tensor& dy, const ConvGeometry& g,
                     Tensor* dx, std::span<float> dw, std::span<float> db) {
  const int cin = x.c;
  const int cout = dy.c;
  const int k = g.kernel;
  std::vector<double> gw(dw.size(), 0.0);
  std::vector<double> gb(static_cast<std::size_t>(cout), 0.0);
  std::vector<double> gx(x.size(), 0.0);
  for (int n = 0; n < x.n; ++n)
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox)
        for (int co = 0; co < cout; ++co) {
          const double d = dy.at(n, oy, ox, co);
          gb[co] += d;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * g.stride + ky - g.pad_top;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * g.stride + kx - g.pad_left;
              if (ix < 0 || ix >= x.w) continue;
              for (int ci = 0; ci < cin; ++ci) {
                const std::size_t wi = ((static_cast<std::size_t>(ky) * k + kx) * cin + ci) * cout + co;
                gw[wi] += d * x.at(n, iy, ix, ci);
                gx[x.offset(n, iy, ix, ci)] += d * w[wi];
              }
            }
          }
        }
  for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += static_cast<float>(gw[i]);
  if (!db.empty())
    for (int co = 0; co < cout; ++co) db[co] += static_cast<float>(gb[co]);
  if (dx) {
    *dx = Tensor(x.n, x.h, x.w, x.c);
    for (std::size_t i = 0; i < gx.size(); ++i) dx->data[i] = static_cast<float>(gx[i]);
  }
}

void depthwise_forward(const Tensor& x, std::span<const float> w, std::span<const float> b,
                       const ConvGeometry& g, Tensor& y) {
  const int k = g.kernel;
  y = Tensor(x.n, g.out_h, g.out_w, x.c);
  for (int n = 0; n < x.n; ++n)
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox)
        for (int c = 0; c < x.c; ++c) {
          double acc = b.empty() ? 0.0 : b[c];
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * g.stride + ky - g.pad_top;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * g.stride + kx - g.pad_left;
              if (ix < 0 || ix >= x.w) continue;
              acc += static_cast<double>(x.at(n, iy, ix, c)) * w[(static_cast<std::size_t>(ky) * k + kx) * x.c + c];
            }
          }
          y.at(n, oy, ox, c) = static_cast<float>(acc);
        }
}

void depthwise_backward(const Tensor& x, std::span<const float> w, const Tensor& dy, const ConvGeometry& g,
                        Tensor* dx, std::span<float> dw, std::span<float> db) {
  const int k = g.kernel;
  std::vector<double> gw(dw.size(), 0.0);
  std::vector<double> gb(static_cast<std::size_t>(x.c), 0.0);
  std::vector<double> gx(x.size(), 0.0);
  for (int n = 0; n < x.n; ++n)
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox)
        for (int c = 0; c < x.c; ++c) {
          const double d = dy.at(n, oy, ox, c);
          gb[c] += d;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * g.stride + ky - g.pad_top;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * g.stride + kx - g.pad_left;
              if (ix < 0 || ix >= x.w) continue;
              const std::size_t wi = (static_cast<std::size_t>(ky) * k + kx) * x.c + c;
              gw[wi] += d * x.at(n, iy, ix, c);
              gx[x.offset(n, iy, ix, c)] += d * w[wi];
            }
          }
        }
  for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += static_cast<float>(gw[i]);
  if (!db.empty())
    for (int c = 0; c < x.c; ++c) db[c] += static_cast<float>(gb[c]);
  if (dx) {
    *dx = Tensor(x.n, x.h, x.w, x.c);
    for (std::size_t i = 0; i < gx.size(); ++i) dx->data[i] = static_cast<float>(gx[i]);
  }
}

void layernorm_forward(const Tensor& x, std::span<const float> gamma, std::span<const float> beta, float eps,
                       Tensor& y, std::vector<float>& mean, std::vector<float>& rstd) {
  const std::size_t P = x.pixels();
  const int C = x.c;
  y = Tensor(x.n, x.h, x.w, C);
  mean.assign(P, 0.0f);
  rstd.assign(P, 0.0f);
  for (std::size_t p = 0; p < P; ++p) {
    const float* xp = x.data.data() + p * C;
    double m = 0.0;
    for (int c = 0; c < C; ++c) m += xp[c];
    m /= C;
    double v = 0.0;
    for (int c = 0; c < C; ++c) v += (xp[c] - m) * (xp[c] - m);
    v /= C;
    const double r = 1.0 / std::sqrt(v + eps);
    mean[p] = static_cast<float>(m);
    rstd[p] = static_cast<float>(r);
    for (int c = 0; c < C; ++c) y.data[p * C + c] = static_cast<float>((xp[c] - m) * r * gamma[c] + beta[c]);
  }
}

void layernorm_backward(const Tensor& x, std::span<const float> gamma, const std::vector<float>& mean,
                        const std::vector<float>& rstd, const Tensor& dy, Tensor& dx,
                        std::span<float> dgamma, std::span<float> dbeta) {
  const std::size_t P = x.pixels();
  const int C = x.c;
  dx = Tensor(x.n, x.h, x.w, C);
  std::vector<double> gg(static_cast<std::size_t>(C), 0.0), gb(static_cast<std::size_t>(C), 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    const float* xp = x.data.data() + p * C;
    const float* dyp = dy.data.data() + p * C;
    double sum_g = 0.0, sum_gx = 0.0;
    for (int c = 0; c < C; ++c) {
      const double xhat = (xp[c] - mean[p]) * static_cast<double>(rstd[p]);
      const double gc = static_cast<double>(dyp[c]) * gamma[c];
      gg[c] += dyp[c] * xhat;
      gb[c] += dyp[c];
      sum_g += gc;
      sum_gx += gc * xhat;
    }
    for (int c = 0; c < C; ++c) {
      const double xhat = (xp[c] - mean[p]) * static_cast<double>(rstd[p]);
      const double gc = static_cast<double>(dyp[c]) * gamma[c];
      dx.data[p * C + c] = static_cast<float>(rstd[p] * (gc - sum_g / C - xhat * sum_gx / C));
    }
  }
  for (int c = 0; c < C; ++c) {
    dgamma[c] += static_cast<float>(gg[c]);
    dbeta[c] += static_cast<float>(gb[c]);
  }
}

void gelu_forward(std::span<const float> x, std::span<float> y) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    y[i] = static_cast<float>(0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)));
  }
}

void gelu_backward(std::span<const float> x, std::span<const float> dy, std::span<float> dx) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * v * v) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
    dx[i] = static_cast<float>(dy[i] * (cdf + v * pdf));
  }
}

}  // namespace kernels::reference
}  // namespace mononext
