#pragma once

// Multi-task detection loss over prediction/target grids:
//
//   conf  = l_obj  * sum_obj (C^ - C)^2 + l_noobj * sum_noobj (C^ - C)^2
//   class = l_cls  * sum_obj sum_c (p_c - p^_c)^2
//   box   = l_iou  * sum_obj (1 - IoU)^2 + l_yaw * sum_obj (tyaw - tyaw^)^2
//
// IoU is the axis-aligned 3D IoU between the boxes decoded from the predicted
// and target cells. Sums run over cells; no per-object averaging.

#include <vector>

#include "mononext/grid_codec.hpp"

namespace mononext {

struct LossWeights {
  double obj = 5.0;
  double noobj = 1.0;
  double cls = 1.0;
  double iou = 10.0;
  double yaw = 1.0;
  /// Throws ArgumentError if any weight is negative.
  void validate() const;
};

struct LossBreakdown {
  double conf = 0.0;
  double cls = 0.0;
  double box = 0.0;
  double total = 0.0;
};

/// 1 where the target confidence is 1. Throws if a target confidence is not 0 or 1.
std::vector<std::uint8_t> responsibility_mask(const GridTensor& target);

double confidence_loss(const GridTensor& pred, const GridTensor& target, const LossWeights& w);
double class_loss(const GridTensor& pred, const GridTensor& target, const LossWeights& w);
double box_loss(const GridTensor& pred, const GridTensor& target, const GridSpec& g,
                const LossWeights& w);
LossBreakdown total_loss(const GridTensor& pred, const GridTensor& target, const GridSpec& g,
                         const LossWeights& w);

struct LossWithGrad {
  LossBreakdown loss;
  GridTensor grad;  // d total / d pred, same layout as pred
};

LossWithGrad total_loss_with_grad(const GridTensor& pred, const GridTensor& target,
                                  const GridSpec& g, const LossWeights& w);

/// Mean of the per-frame breakdowns.
LossBreakdown batch_mean(const std::vector<LossBreakdown>& per_frame);

}  // namespace mononext
