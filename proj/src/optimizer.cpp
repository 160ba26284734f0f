#include "mononext/optimizer.hpp"

#include <cmath>

#include "mononext/error.hpp"

namespace mononext {

AdamW::AdamW(std::vector<Parameter*> params, AdamWOptions opts) : params_(std::move(params)), opts_(opts) {
  if (!(opts_.learning_rate > 0.0)) throw ArgumentError("AdamW: learning rate must be positive");
  if (opts_.weight_decay < 0.0) throw ArgumentError("AdamW: weight decay must be non-negative");
  for (Parameter* p : params_) {
    m_.emplace_back(p->size(), 0.0f);
    v_.emplace_back(p->size(), 0.0f);
  }
}

void AdamW::step(double lr_scale) {
  ++t_;
  const double lr = opts_.learning_rate * lr_scale;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(opts_.beta1);
  const float b2 = static_cast<float>(opts_.beta2);
  const float step_size = static_cast<float>(lr / bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(opts_.eps);
  const float decay = static_cast<float>(1.0 - lr * opts_.weight_decay);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    auto& m = m_[i];
    auto& v = v_[i];
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(p.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      const float g = p.grad[j];
      m[j] = b1 * m[j] + (1.0f - b1) * g;
      v[j] = b2 * v[j] + (1.0f - b2) * g * g;
      p.value[j] *= decay;
      p.value[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
    }
  }
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (float g : p->grad) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const float scale = static_cast<float>(max_norm / norm);
    for (Parameter* p : params)
      for (float& g : p->grad) g *= scale;
  }
  return norm;
}

}  // namespace mononext
