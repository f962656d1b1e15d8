#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odil/layers.hpp"
#include "odil/tensor.hpp"

namespace odil {

// Batch Normalization with explicit, inspectable running statistics.
//
// Normalization axes follow the input rank: a [N,H,W,C] input is normalized
// per channel over batch and spatial positions, a [N,F] input per feature
// over the batch. Batch moments use population (biased) variance, and the
// running statistics accumulate the same quantity:
//
//   train: y = gamma * (x - mu_batch) / sqrt(var_batch + eps) + beta
//          running_mean <- momentum * mu_batch  + (1 - momentum) * running_mean
//          running_var  <- momentum * var_batch + (1 - momentum) * running_var
//   eval:  y = gamma * (x - running_mean) / sqrt(running_var + eps) + beta
//
// Train/adapt modes require a normalization population of at least 2 per
// channel, so 1-D BN on a single sample is rejected rather than silently
// producing zero variance.
class BatchNorm : public Layer {
 public:
  BatchNorm(std::string name, std::size_t channels, double eps = 1e-5,
            double momentum = 0.1);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamRef> params() override;
  std::vector<StateRef> state() override;
  void zero_grad() override;

  std::size_t channels() const { return channels_; }

  double eps() const { return eps_[0]; }
  double momentum() const { return momentum_[0]; }
  void set_momentum(double m);

  Tensor gamma;         // per-channel scale, init 1
  Tensor beta;          // per-channel shift, init 0
  Tensor running_mean;  // init 0
  Tensor running_var;   // init 1, never negative
  Tensor gamma_grad;
  Tensor beta_grad;

 private:
  std::size_t channels_;
  Tensor eps_;       // scalar tensors so checkpoints carry them uniformly
  Tensor momentum_;

  // caches for backward
  Tensor cached_xhat_;
  std::vector<double> cached_inv_std_;
  bool has_cache_ = false;
};

// Frozen copy of one model's BN running statistics, labeled with the task it
// was adapted for. Immutable after creation; safe to share across threads.
struct BNSnapshot {
  struct LayerStats {
    std::string layer;  // layer name, part of the signature
    Tensor mean;
    Tensor var;
  };

  int task_id = 0;
  std::string created_by;  // deterministic provenance (policy, sample count)
  std::vector<LayerStats> layers;

  bool signature_matches(const std::vector<BatchNorm*>& bns) const;
  bool bits_equal(const BNSnapshot& o) const;
};

// Copy out / write back the running statistics of an ordered BN layer list.
// restore_bn_stats overwrites (mean, var) bit-exactly and touches nothing
// else; restoring a snapshot taken from the same layers is an exact identity.
BNSnapshot snapshot_bn_stats(const std::vector<BatchNorm*>& bns, int task_id,
                             std::string created_by = {});
void restore_bn_stats(const std::vector<BatchNorm*>& bns, const BNSnapshot& snap);

}  // namespace odil
