#pragma once

#include <span>
#include <vector>

#include "gkr/matrix.hpp"
#include "gkr/model.hpp"

namespace gkr {

struct Sample {
  std::span<const double> fx;
  std::span<const double> fy;
  int label = 0;
};

/// Class-balanced loss of one batch with its gradient, one Matrix per entry of
/// KinshipModel::parameters().
struct BatchGradient {
  double loss = 0.0;
  std::vector<double> logits;
  std::vector<Matrix> grads;
};

/// Whole batch on one tape, evaluated serially. Kept as the reference the
/// parallel kernel is tested against.
BatchGradient batch_gradient_reference(const KinshipModel& model, std::span<const Sample> batch);

/// One tape per sample under OpenMP. Per-sample gradients are weighted by
/// 1/|positives| or 1/|negatives| and summed in sample order, so the result
/// does not depend on the thread count.
BatchGradient batch_gradient(const KinshipModel& model, std::span<const Sample> batch);

std::vector<double> batch_logits_reference(const KinshipModel& model,
                                           std::span<const Sample> samples);
std::vector<double> batch_logits(const KinshipModel& model, std::span<const Sample> samples);

}  // namespace gkr
