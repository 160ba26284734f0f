#include "mononext/loss.hpp"

#include "mononext/error.hpp"

namespace mononext {

namespace {

void check_shapes(const GridTensor& pred, const GridTensor& target) {
  if (!pred.same_shape(target)) throw ArgumentError("loss: prediction and target shapes differ");
}

double conf_term(const GridTensor& pred, const GridTensor& target, const std::vector<std::uint8_t>& mask,
                 const LossWeights& w, GridTensor* grad) {
  double obj = 0.0;
  double noobj = 0.0;
  const int S = target.side();
  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) {
      const double d = pred.at(r, c, 0) - target.at(r, c, 0);
      const bool is_obj = mask[static_cast<std::size_t>(r) * S + c] != 0;
      (is_obj ? obj : noobj) += d * d;
      if (grad) grad->at(r, c, 0) += 2.0 * (is_obj ? w.obj : w.noobj) * d;
    }
  }
  return w.obj * obj + w.noobj * noobj;
}

double class_term(const GridTensor& pred, const GridTensor& target, const std::vector<std::uint8_t>& mask,
                  const LossWeights& w, GridTensor* grad) {
  double acc = 0.0;
  const int S = target.side();
  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) {
      if (!mask[static_cast<std::size_t>(r) * S + c]) continue;
      for (int k = 0; k < target.num_classes(); ++k) {
        const double d = pred.at(r, c, 1 + k) - target.at(r, c, 1 + k);
        acc += d * d;
        if (grad) grad->at(r, c, 1 + k) += 2.0 * w.cls * d;
      }
    }
  }
  return w.cls * acc;
}

double box_term(const GridTensor& pred, const GridTensor& target, const std::vector<std::uint8_t>& mask,
                const GridSpec& g, const LossWeights& w, GridTensor* grad) {
  double iou_acc = 0.0;
  double yaw_acc = 0.0;
  const int S = target.side();
  const int p = g.pos_channel();
  const int d = g.dim_channel();
  const int y = g.yaw_channel();
  // d(metric quantity) / d(channel value)
  const std::array<double, 3> pos_scale{(g.x_max - g.x_min) / g.S, g.y_max - g.y_min,
                                        (g.z_max - g.z_min) / g.S};
  const std::array<double, 3> dim_scale{g.w_max, g.h_max, g.l_max};
  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) {
      if (!mask[static_cast<std::size_t>(r) * S + c]) continue;
      const BoxSpec pb = decode_cell(pred.cell(r, c), r, c, g);
      const BoxSpec tb = decode_cell(target.cell(r, c), r, c, g);
      const AabbIouGrad ig = aabb_iou3d_grad(pb, tb);
      const double miss = 1.0 - ig.iou;
      iou_acc += miss * miss;
      const double dyaw = pred.at(r, c, y) - target.at(r, c, y);
      yaw_acc += dyaw * dyaw;
      if (grad) {
        const double d_iou = -2.0 * w.iou * miss;
        for (int k = 0; k < 3; ++k) {
          grad->at(r, c, p + k) += d_iou * ig.d_center[k] * pos_scale[k];
          grad->at(r, c, d + k) += d_iou * ig.d_dims[k] * dim_scale[k];
        }
        grad->at(r, c, y) += 2.0 * w.yaw * dyaw;
      }
    }
  }
  return w.iou * iou_acc + w.yaw * yaw_acc;
}

LossBreakdown compute(const GridTensor& pred, const GridTensor& target, const GridSpec& g,
                      const LossWeights& w, GridTensor* grad) {
  check_shapes(pred, target);
  if (!target.matches(g)) throw ArgumentError("loss: tensor shape does not match GridSpec");
  w.validate();
  const auto mask = responsibility_mask(target);
  LossBreakdown out;
  out.conf = conf_term(pred, target, mask, w, grad);
  out.cls = class_term(pred, target, mask, w, grad);
  out.box = box_term(pred, target, mask, g, w, grad);
  out.total = out.conf + out.cls + out.box;
  return out;
}

}  // namespace

void LossWeights::validate() const {
  if (obj < 0 || noobj < 0 || cls < 0 || iou < 0 || yaw < 0) {
    throw ArgumentError("LossWeights: weights must be non-negative");
  }
}

std::vector<std::uint8_t> responsibility_mask(const GridTensor& target) {
  const int S = target.side();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(S) * S, 0);
  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) {
      const double conf = target.at(r, c, 0);
      if (conf != 0.0 && conf != 1.0) {
        throw ArgumentError("responsibility_mask: target confidence must be 0 or 1");
      }
      mask[static_cast<std::size_t>(r) * S + c] = conf == 1.0 ? 1 : 0;
    }
  }
  return mask;
}

double confidence_loss(const GridTensor& pred, const GridTensor& target, const LossWeights& w) {
  check_shapes(pred, target);
  return conf_term(pred, target, responsibility_mask(target), w, nullptr);
}

double class_loss(const GridTensor& pred, const GridTensor& target, const LossWeights& w) {
  check_shapes(pred, target);
  return class_term(pred, target, responsibility_mask(target), w, nullptr);
}

double box_loss(const GridTensor& pred, const GridTensor& target, const GridSpec& g, const LossWeights& w) {
  check_shapes(pred, target);
  if (!target.matches(g)) throw ArgumentError("box_loss: tensor shape does not match GridSpec");
  return box_term(pred, target, responsibility_mask(target), g, w, nullptr);
}

LossBreakdown total_loss(const GridTensor& pred, const GridTensor& target, const GridSpec& g,
                         const LossWeights& w) {
  return compute(pred, target, g, w, nullptr);
}

LossWithGrad total_loss_with_grad(const GridTensor& pred, const GridTensor& target, const GridSpec& g,
                                  const LossWeights& w) {
  LossWithGrad out{{}, GridTensor(pred.side(), pred.num_classes())};
  out.loss = compute(pred, target, g, w, &out.grad);
  return out;
}

LossBreakdown batch_mean(const std::vector<LossBreakdown>& per_frame) {
  LossBreakdown m;
  if (per_frame.empty()) return m;
  for (const auto& b : per_frame) {
    m.conf += b.conf;
    m.cls += b.cls;
    m.box += b.box;
  }
  const double n = static_cast<double>(per_frame.size());
  m.conf /= n;
  m.cls /= n;
  m.box /= n;
  m.total = m.conf + m.cls + m.box;
  return m;
}

}  // namespace mononext
