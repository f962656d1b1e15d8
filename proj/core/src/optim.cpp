#include "odil/optim.hpp"

#include <cmath>

#include "odil/error.hpp"

namespace odil {

double schedule_lr(int epoch, const LRSchedule& schedule) {
  if (schedule.lr_max <= 0.0) fail_config("lr schedule: lr_max must be > 0");
  if (schedule.lr_min < 0.0 || schedule.lr_min > schedule.lr_max) {
    fail_config("lr schedule: need 0 <= lr_min <= lr_max");
  }
  if (schedule.kind == ScheduleKind::constant) return schedule.lr_max;
  if (schedule.total_epochs <= 0) fail_config("lr schedule: total_epochs must be > 0");
  if (epoch < 0 || epoch > schedule.total_epochs) {
    fail_config("lr schedule: epoch " + std::to_string(epoch) + " outside [0," +
                std::to_string(schedule.total_epochs) + "]");
  }
  const double t = static_cast<double>(epoch) / static_cast<double>(schedule.total_epochs);
  return schedule.lr_min +
         0.5 * (schedule.lr_max - schedule.lr_min) * (1.0 + std::cos(M_PI * t));
}

Sgd::Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (lr <= 0.0) fail_config("sgd: learning rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) fail_config("sgd: momentum must be in [0,1)");
}

void Sgd::set_lr(double lr) {
  if (lr <= 0.0) fail_config("sgd: learning rate must be > 0");
  lr_ = lr;
}

void Sgd::step(const std::vector<ParamRef>& params) {
  for (const ParamRef& p : params) {
    if (!p.grad->all_finite()) {
      fail_numeric("sgd: non-finite gradient for " + p.name + ", step aborted");
    }
  }
  for (const ParamRef& p : params) {
    Tensor& value = *p.value;
    const Tensor& grad = *p.grad;
    if (momentum_ > 0.0) {
      auto [it, inserted] = velocities_.try_emplace(p.name, Tensor(value.shape()));
      Tensor& v = it->second;
      if (!inserted && !v.same_shape(value)) {
        fail_config("sgd: velocity shape mismatch for " + p.name);
      }
      for (std::size_t i = 0; i < value.size(); ++i) {
        v[i] = momentum_ * v[i] + grad[i];
        value[i] -= lr_ * v[i];
      }
    } else {
      for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr_ * grad[i];
    }
  }
}

const Tensor* Sgd::velocity(const std::string& param_name) const {
  auto it = velocities_.find(param_name);
  return it == velocities_.end() ? nullptr : &it->second;
}

}  // namespace odil
