// Reference vs parallel kernels on shapes from the default network.

#include <benchmark/benchmark.h>

#include <random>

#include "mononext/kernels.hpp"

using namespace mononext;

namespace {

Tensor random_tensor(int n, int h, int w, int c, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  Tensor t(n, h, w, c);
  for (float& v : t.data) v = d(rng);
  return t;
}

std::vector<float> random_vector(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0.0f, 0.1f);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

// Args: spatial size, input channels, output channels, kernel, stride.
template <bool Parallel>
void BM_Conv2dForward(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0)), cin = static_cast<int>(state.range(1));
  const int cout = static_cast<int>(state.range(2)), k = static_cast<int>(state.range(3));
  const int stride = static_cast<int>(state.range(4));
  Tensor x = random_tensor(1, s, s, cin, 1);
  auto w = random_vector(static_cast<std::size_t>(k) * k * cin * cout, 2);
  auto b = random_vector(static_cast<std::size_t>(cout), 3);
  auto g = ConvGeometry::same(s, s, k, stride);
  Tensor y;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::conv2d_forward(x, w, b, cout, g, y);
    else
      kernels::reference::conv2d_forward(x, w, b, cout, g, y);
    benchmark::DoNotOptimize(y.data.data());
  }
}

template <bool Parallel>
void BM_Conv2dBackward(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0)), cin = static_cast<int>(state.range(1));
  const int cout = static_cast<int>(state.range(2)), k = static_cast<int>(state.range(3));
  const int stride = static_cast<int>(state.range(4));
  Tensor x = random_tensor(1, s, s, cin, 1);
  auto w = random_vector(static_cast<std::size_t>(k) * k * cin * cout, 2);
  auto g = ConvGeometry::same(s, s, k, stride);
  Tensor dy = random_tensor(1, g.out_h, g.out_w, cout, 4);
  std::vector<float> dw(w.size()), db(static_cast<std::size_t>(cout));
  Tensor dx;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::conv2d_backward(x, w, dy, g, &dx, dw, db);
    else
      kernels::reference::conv2d_backward(x, w, dy, g, &dx, dw, db);
    benchmark::DoNotOptimize(dx.data.data());
  }
}

template <bool Parallel>
void BM_Depthwise(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
  Tensor x = random_tensor(1, s, s, c, 1);
  auto w = random_vector(static_cast<std::size_t>(49) * c, 2);
  auto b = random_vector(static_cast<std::size_t>(c), 3);
  auto g = ConvGeometry::same(s, s, 7, 1);
  Tensor dy = random_tensor(1, s, s, c, 4);
  std::vector<float> dw(w.size()), db(b.size());
  Tensor y, dx;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::depthwise_forward(x, w, b, g, y);
      kernels::depthwise_backward(x, w, dy, g, &dx, dw, db);
    } else {
      kernels::reference::depthwise_forward(x, w, b, g, y);
      kernels::reference::depthwise_backward(x, w, dy, g, &dx, dw, db);
    }
    benchmark::DoNotOptimize(dx.data.data());
  }
}

template <bool Parallel>
void BM_LayerNorm(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
  Tensor x = random_tensor(1, s, s, c, 1);
  std::vector<float> gamma(static_cast<std::size_t>(c), 1.0f), beta(static_cast<std::size_t>(c), 0.0f);
  std::vector<float> dgamma(gamma.size()), dbeta(beta.size()), mean, rstd;
  Tensor dy = random_tensor(1, s, s, c, 4);
  Tensor y, dx;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::layernorm_forward(x, gamma, beta, 1e-6f, y, mean, rstd);
      kernels::layernorm_backward(x, gamma, mean, rstd, dy, dx, dgamma, dbeta);
    } else {
      kernels::reference::layernorm_forward(x, gamma, beta, 1e-6f, y, mean, rstd);
      kernels::reference::layernorm_backward(x, gamma, mean, rstd, dy, dx, dgamma, dbeta);
    }
    benchmark::DoNotOptimize(dx.data.data());
  }
}

template <bool Parallel>
void BM_Gelu(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto x = random_vector(n, 1), dy = random_vector(n, 2);
  std::vector<float> y(n), dx(n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::gelu_forward(x, y);
      kernels::gelu_backward(x, dy, dx);
    } else {
      kernels::reference::gelu_forward(x, y);
      kernels::reference::gelu_backward(x, dy, dx);
    }
    benchmark::DoNotOptimize(dx.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

// First backbone stage, a pointwise trunk conv and the 7x7 trunk conv at grid resolution.
void conv_shapes(benchmark::internal::Benchmark* b) {
  b->Args({480, 3, 8, 3, 2})->Args({15, 128, 128, 1, 1})->Args({15, 128, 128, 7, 1})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_Conv2dForward<false>)->Apply(conv_shapes);
BENCHMARK(BM_Conv2dForward<true>)->Apply(conv_shapes);
BENCHMARK(BM_Conv2dBackward<false>)->Apply(conv_shapes);
BENCHMARK(BM_Conv2dBackward<true>)->Apply(conv_shapes);
BENCHMARK(BM_Depthwise<false>)->Args({15, 128})->Args({60, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Depthwise<true>)->Args({15, 128})->Args({60, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LayerNorm<false>)->Args({240, 8})->Args({15, 512})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LayerNorm<true>)->Args({240, 8})->Args({15, 512})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gelu<false>)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gelu<true>)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
