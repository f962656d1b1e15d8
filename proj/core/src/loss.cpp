#include "odil/loss.hpp"

#include <cmath>

#include "odil/error.hpp"

namespace odil {

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) fail_config("softmax_cross_entropy: expected [N,C] logits");
  const std::size_t N = logits.dim(0), C = logits.dim(1);
  if (labels.size() != N) {
    fail_config("softmax_cross_entropy: " + std::to_string(labels.size()) +
                " labels for " + std::to_string(N) + " rows");
  }

  LossResult res;
  res.logits_grad = Tensor({N, C});
  const double inv_n = 1.0 / static_cast<double>(N);
  double total = 0.0;

  for (std::size_t n = 0; n < N; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= C) {
      fail_data("softmax_cross_entropy: label " + std::to_string(label) +
                " out of range [0," + std::to_string(C) + ")");
    }
    const double* row = logits.data() + n * C;
    double* grad = res.logits_grad.data() + n * C;

    double mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      grad[c] = std::exp(row[c] - mx);
      denom += grad[c];
    }
    const double inv_denom = 1.0 / denom;
    for (std::size_t c = 0; c < C; ++c) grad[c] *= inv_denom * inv_n;
    grad[label] -= inv_n;

    // -log softmax[label] = log(sum exp(z - mx)) - (z[label] - mx)
    total += std::log(denom) - (row[label] - mx);
  }
  res.loss = total * inv_n;
  if (!std::isfinite(res.loss)) fail_numeric("softmax_cross_entropy: non-finite loss");
  return res;
}

}  // namespace odil
