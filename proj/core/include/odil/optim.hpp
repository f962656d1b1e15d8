#pragma once

#include <map>
#include <string>
#include <vector>

#include "odil/layers.hpp"
#include "odil/tensor.hpp"

namespace odil {

enum class ScheduleKind { constant, cosine };

struct LRSchedule {
  ScheduleKind kind = ScheduleKind::cosine;
  double lr_max = 1e-4;
  double lr_min = 0.0;
  int total_epochs = 1;
};

// lr(epoch) = lr_min + (lr_max - lr_min) * (1 + cos(pi * epoch / total)) / 2
// for the cosine kind; constant returns lr_max. epoch must be <= total_epochs.
double schedule_lr(int epoch, const LRSchedule& schedule);

// SGD with classical momentum: v <- m*v + g; p <- p - lr*v.
// Velocity buffers are keyed by parameter name, exist only when momentum > 0,
// start at zero and persist across step() calls.
class Sgd {
 public:
  Sgd(double lr, double momentum);

  double lr() const { return lr_; }
  void set_lr(double lr);
  double momentum() const { return momentum_; }

  // Applies one update to every param; rejects non-finite gradients before
  // touching any parameter (the whole step aborts).
  void step(const std::vector<ParamRef>& params);

  const Tensor* velocity(const std::string& param_name) const;

 private:
  double lr_;
  double momentum_;
  std::map<std::string, Tensor> velocities_;
};

}  // namespace odil
