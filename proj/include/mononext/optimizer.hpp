#pragma once

#include <vector>

#include "mononext/tensor.hpp"

namespace mononext {

struct AdamWOptions {
  double learning_rate = 1e-4;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with decoupled weight decay: p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWOptions opts);

  /// One update from the accumulated gradients. `lr_scale` multiplies the
  /// base learning rate (used by the optional cosine schedule).
  void step(double lr_scale = 1.0);
  long steps() const { return t_; }
  const AdamWOptions& options() const { return opts_; }

 private:
  std::vector<Parameter*> params_;
  AdamWOptions opts_;
  std::vector<std::vector<float>> m_, v_;
  long t_ = 0;
};

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

}  // namespace mononext
