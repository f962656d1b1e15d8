#pragma once

#include <vector>

#include "odil/tensor.hpp"

namespace odil {

struct LossResult {
  double loss = 0.0;
  Tensor logits_grad;  // (softmax - one_hot) / batch
};

// Mean softmax cross-entropy over the batch, stabilized by max-subtraction.
// labels must lie in [0, C).
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace odil
