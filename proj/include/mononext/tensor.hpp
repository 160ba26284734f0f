#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mononext {

/// Dense float batch in NHWC order.
struct Tensor {
  int n = 0;
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int h_, int w_, int c_, float fill = 0.0f)
      : n(n_), h(h_), w(w_), c(c_), data(static_cast<std::size_t>(n_) * h_ * w_ * c_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(n) * h * w; }
  std::size_t offset(int b, int y, int x, int ch) const {
    return ((static_cast<std::size_t>(b) * h + y) * w + x) * c + ch;
  }
  float& at(int b, int y, int x, int ch) { return data[offset(b, y, x, ch)]; }
  float at(int b, int y, int x, int ch) const { return data[offset(b, y, x, ch)]; }
  float* pixel(int b, int y, int x) { return data.data() + offset(b, y, x, 0); }
  const float* pixel(int b, int y, int x) const { return data.data() + offset(b, y, x, 0); }

  bool same_shape(const Tensor& o) const { return n == o.n && h == o.h && w == o.w && c == o.c; }
  std::string shape_string() const;
};

/// Trainable array with its gradient accumulator.
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<float> value;
  std::vector<float> grad;

  Parameter() = default;
  Parameter(std::string name_, std::vector<int> shape_);
  std::size_t size() const { return value.size(); }
  void zero_grad();
};

}  // namespace mononext
