#include "odil/adapt.hpp"

#include <cmath>
#include <cstring>

#include "odil/error.hpp"
#include "odil/rng.hpp"

namespace odil {

void MomentumSchedule::validate() const {
  if (decay <= 0.0 || decay >= 1.0) fail_config("momentum schedule: decay must be in (0,1)");
  if (!(increment > 0.0 && increment < initial)) {
    fail_config("momentum schedule: need 0 < increment < initial");
  }
  if (initial <= 0.0 || initial > 1.0) fail_config("momentum schedule: initial must be in (0,1]");
  if (num_samples < 1) fail_config("momentum schedule: num_samples must be >= 1");
}

MomentumSchedule rising_momentum_preset(int num_samples) {
  return {.initial = 0.1, .decay = 0.94, .increment = 0.05, .num_samples = num_samples};
}

MomentumSchedule decaying_momentum_preset(int num_samples) {
  return {.initial = 0.1, .decay = 0.94, .increment = 0.005, .num_samples = num_samples};
}

std::vector<double> momentum_sequence(const MomentumSchedule& schedule) {
  schedule.validate();
  std::vector<double> seq(static_cast<std::size_t>(schedule.num_samples));
  double a = schedule.initial;
  for (int k = 0; k < schedule.num_samples; ++k) {
    a = a * schedule.decay + schedule.increment;
    seq[static_cast<std::size_t>(k)] = a;
  }
  return seq;
}

double momentum_closed_form(const MomentumSchedule& schedule, int k) {
  const double wk = std::pow(schedule.decay, k);
  return wk * schedule.initial + schedule.increment * (1.0 - wk) / (1.0 - schedule.decay);
}

void AdaptationConfig::validate() const {
  schedule.validate();
  if (batch_policy == AdaptBatchPolicy::replicate_with_noise) {
    if (replicate_count < 2) fail_config("adaptation: replicate count must be >= 2");
    if (replicate_noise < 0.0) fail_config("adaptation: replicate noise must be >= 0");
  }
}

std::string to_string(SelectionPolicy p) {
  return p == SelectionPolicy::final_k ? "final-k" : "best-labeled";
}

SelectionPolicy selection_policy_from_string(const std::string& s) {
  if (s == "final-k") return SelectionPolicy::final_k;
  if (s == "best-labeled") return SelectionPolicy::best_labeled;
  fail_config("unknown selection policy '" + s + "'");
}

std::string to_string(AdaptBatchPolicy p) {
  return p == AdaptBatchPolicy::single_sample ? "single-sample" : "replicate-with-noise";
}

AdaptBatchPolicy batch_policy_from_string(const std::string& s) {
  if (s == "single-sample") return AdaptBatchPolicy::single_sample;
  if (s == "replicate-with-noise") return AdaptBatchPolicy::replicate_with_noise;
  fail_config("unknown adaptation batch policy '" + s + "'");
}

void DomainStatsRegistry::insert(BNSnapshot snap) {
  if (contains(snap.task_id)) {
    fail_data("registry: task " + std::to_string(snap.task_id) + " already present");
  }
  snaps_.push_back(std::move(snap));
}

const BNSnapshot& DomainStatsRegistry::at(int task_id) const {
  for (const BNSnapshot& s : snaps_) {
    if (s.task_id == task_id) return s;
  }
  fail_data("registry: unknown task " + std::to_string(task_id));
}

bool DomainStatsRegistry::contains(int task_id) const {
  for (const BNSnapshot& s : snaps_) {
    if (s.task_id == task_id) return true;
  }
  return false;
}

std::vector<int> DomainStatsRegistry::task_ids() const {
  std::vector<int> ids;
  ids.reserve(snaps_.size());
  for (const BNSnapshot& s : snaps_) ids.push_back(s.task_id);
  return ids;
}

namespace {

// Batches one adaptation sample per the batch policy.
Tensor make_adaptation_batch(const Tensor& input, const AdaptationConfig& config,
                             Rng& rng) {
  std::vector<std::size_t> batched_shape;
  const std::size_t copies =
      config.batch_policy == AdaptBatchPolicy::single_sample
          ? 1
          : static_cast<std::size_t>(config.replicate_count);
  batched_shape.push_back(copies);
  for (std::size_t d : input.shape()) batched_shape.push_back(d);

  Tensor batch(batched_shape);
  for (std::size_t i = 0; i < copies; ++i) {
    double* dst = batch.data() + i * input.size();
    std::memcpy(dst, input.data(), input.size() * sizeof(double));
    if (config.batch_policy == AdaptBatchPolicy::replicate_with_noise && i > 0) {
      for (std::size_t j = 0; j < input.size(); ++j) {
        dst[j] += rng.normal(0.0, config.replicate_noise);
      }
    }
  }
  return batch;
}

double score_on_samples(Model& model, const std::vector<AdaptSample>& samples) {
  std::size_t correct = 0;
  for (const AdaptSample& s : samples) {
    std::vector<std::size_t> shape{1};
    for (std::size_t d : s.input.shape()) shape.push_back(d);
    Tensor logits = model.forward(s.input.reshaped(shape), Mode::eval);
    if (argmax_rows(logits)[0] == *s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace

BNSnapshot adapt_domain(Model& model, DomainStatsRegistry& registry, int task_id,
                        const std::vector<AdaptSample>& samples,
                        const AdaptationConfig& config, std::uint64_t seed) {
  config.validate();
  if (registry.contains(task_id)) {
    fail_data("adapt_domain: task " + std::to_string(task_id) + " already adapted");
  }
  if (samples.size() != static_cast<std::size_t>(config.schedule.num_samples)) {
    fail_data("adapt_domain: got " + std::to_string(samples.size()) +
              " samples, schedule expects " + std::to_string(config.schedule.num_samples));
  }
  if (config.selection == SelectionPolicy::best_labeled) {
    for (const AdaptSample& s : samples) {
      if (!s.label.has_value()) {
        fail_data("adapt_domain: best-labeled selection requires labeled samples");
      }
    }
  }

  std::vector<BatchNorm*> bns = model.bn_layers();
  if (bns.empty()) fail_config("adapt_domain: model has no batchnorm layers");

  // BN momentum is configuration, not statistics; put it back afterwards so
  // the pass leaves everything but (mean, var) bit-identical.
  std::vector<double> saved_momentum;
  saved_momentum.reserve(bns.size());
  for (BatchNorm* bn : bns) saved_momentum.push_back(bn->momentum());

  const std::vector<double> alphas = momentum_sequence(config.schedule);
  Rng noise_rng(substream(seed, "adapt-batch", static_cast<std::uint64_t>(task_id)));

  const std::string provenance = "policy=" + to_string(config.selection) +
                                 ";batch=" + to_string(config.batch_policy) +
                                 ";samples=" + std::to_string(samples.size());

  // Candidates are the cumulative statistics after each of the K samples.
  BNSnapshot best;
  double best_score = -1.0;

  for (std::size_t k = 0; k < samples.size(); ++k) {
    for (BatchNorm* bn : bns) bn->set_momentum(alphas[k]);
    Tensor batch = make_adaptation_batch(samples[k].input, config, noise_rng);
    model.forward(batch, Mode::adapt);  // statistics update only

    if (config.selection == SelectionPolicy::best_labeled) {
      const double score = score_on_samples(model, samples);
      if (score >= best_score) {  // ties go to the later candidate
        best_score = score;
        best = snapshot_bn_stats(bns, task_id, provenance);
      }
    }
  }

  if (config.selection == SelectionPolicy::final_k) {
    best = snapshot_bn_stats(bns, task_id, provenance);
  } else {
    restore_bn_stats(bns, best);  // model carries the stored statistics
  }

  for (std::size_t i = 0; i < bns.size(); ++i) bns[i]->set_momentum(saved_momentum[i]);

  registry.insert(best);
  return best;
}

std::vector<int> infer_with_task(Model& model, const DomainStatsRegistry& registry,
                                 int task_id, const Tensor& batch) {
  const BNSnapshot& snap = registry.at(task_id);
  restore_bn_stats(model.bn_layers(), snap);
  Tensor logits = model.forward(batch, Mode::eval);
  return argmax_rows(logits);
}

int infer_one_with_task(Model& model, const DomainStatsRegistry& registry,
                        int task_id, const Tensor& input) {
  std::vector<std::size_t> shape{1};
  for (std::size_t d : input.shape()) shape.push_back(d);
  return infer_with_task(model, registry, task_id, input.reshaped(shape))[0];
}

}  // namespace odil
