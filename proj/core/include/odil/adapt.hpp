#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "odil/batchnorm.hpp"
#include "odil/model.hpp"
#include "odil/tensor.hpp"

namespace odil {

// Per-sample momentum recurrence for forward-only statistics adaptation:
//   a_k = decay * a_{k-1} + increment,  k = 1..num_samples
// starting from `initial`. The sequence converges monotonically to the fixed
// point increment / (1 - decay): strictly increasing when that exceeds
// `initial`, strictly decreasing when below, constant when equal.
struct MomentumSchedule {
  double initial = 0.1;      // a_0
  double decay = 0.94;       // in (0,1)
  double increment = 0.05;   // in (0, initial)
  int num_samples = 10;      // K, >= 1

  void validate() const;
};

// Defaults as used by the experiments. The "rising" preset converges to
// 0.833 (later samples dominate); the "decaying" preset converges to 0.083
// (later samples matter less).
MomentumSchedule rising_momentum_preset(int num_samples);
MomentumSchedule decaying_momentum_preset(int num_samples);

// [a_1 .. a_K] by iterating the recurrence.
std::vector<double> momentum_sequence(const MomentumSchedule& schedule);

// Closed form a_k = decay^k * initial + increment * (1 - decay^k) / (1 - decay).
double momentum_closed_form(const MomentumSchedule& schedule, int k);

enum class SelectionPolicy {
  final_k,       // keep the statistics after all K samples (unsupervised)
  best_labeled,  // keep the candidate scoring best on the labeled K samples
};

enum class AdaptBatchPolicy {
  single_sample,        // one sample per adaptation batch (2-D BN: spatial
                        // positions provide the normalization population)
  replicate_with_noise, // n noisy copies per batch, for 1-D BN or tiny maps
};

struct AdaptationConfig {
  MomentumSchedule schedule;
  SelectionPolicy selection = SelectionPolicy::final_k;
  AdaptBatchPolicy batch_policy = AdaptBatchPolicy::single_sample;
  int replicate_count = 8;       // n >= 2 when replicate_with_noise
  double replicate_noise = 0.01; // Gaussian sigma for the copies

  void validate() const;
};

std::string to_string(SelectionPolicy p);
SelectionPolicy selection_policy_from_string(const std::string& s);
std::string to_string(AdaptBatchPolicy p);
AdaptBatchPolicy batch_policy_from_string(const std::string& s);

// One adaptation sample: an un-batched input (the configured model input
// shape), with a label only when the selection policy needs one.
struct AdaptSample {
  Tensor input;
  std::optional<int> label;
};

// Ordered task-ID -> BN-statistics snapshot map. Task 1 holds the statistics
// of the base training domain; snapshots are immutable once inserted.
class DomainStatsRegistry {
 public:
  void insert(BNSnapshot snap);
  const BNSnapshot& at(int task_id) const;
  bool contains(int task_id) const;
  std::size_t size() const { return snaps_.size(); }
  const std::vector<BNSnapshot>& entries() const { return snaps_; }
  std::vector<int> task_ids() const;

 private:
  std::vector<BNSnapshot> snaps_;
};

// Forward-only adaptation of the model's BN running statistics to a new
// domain. For k = 1..K the k-th sample is forwarded in statistics-update
// mode with the BN momentum set to a_k; no gradients flow and nothing
// outside the BN running statistics is modified (BN momentum is restored
// before returning). The winning candidate per the selection policy is
// stored in the registry under task_id, written back to the model, and
// returned.
//
// `seed` feeds only the replicate-with-noise batch construction.
BNSnapshot adapt_domain(Model& model, DomainStatsRegistry& registry, int task_id,
                        const std::vector<AdaptSample>& samples,
                        const AdaptationConfig& config, std::uint64_t seed = 0);

// Task-ID-conditioned inference: restores the task's statistics snapshot
// into the model's BN layers (a documented side effect), then runs an
// eval-mode forward and returns argmax classes.
std::vector<int> infer_with_task(Model& model, const DomainStatsRegistry& registry,
                                 int task_id, const Tensor& batch);
int infer_one_with_task(Model& model, const DomainStatsRegistry& registry,
                        int task_id, const Tensor& input);

}  // namespace odil
