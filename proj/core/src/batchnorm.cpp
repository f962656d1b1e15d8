#include "odil/batchnorm.hpp"

#include <cmath>

#include "odil/error.hpp"

namespace odil {

BatchNorm::BatchNorm(std::string name, std::size_t channels, double eps, double momentum)
    : Layer(std::move(name)),
      gamma({channels}, 1.0),
      beta({channels}, 0.0),
      running_mean({channels}, 0.0),
      running_var({channels}, 1.0),
      gamma_grad({channels}),
      beta_grad({channels}),
      channels_(channels),
      eps_({1}, eps),
      momentum_({1}, momentum) {
  if (eps <= 0.0) fail_config("layer " + name_ + ": eps must be > 0");
  if (momentum <= 0.0 || momentum > 1.0) {
    fail_config("layer " + name_ + ": momentum must be in (0,1]");
  }
}

void BatchNorm::set_momentum(double m) {
  if (m <= 0.0 || m > 1.0) fail_config("layer " + name_ + ": momentum must be in (0,1]");
  momentum_[0] = m;
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  if (x.rank() != 2 && x.rank() != 4) {
    fail_config("layer " + name_ + ": expected rank-2 or rank-4 input, got " +
                shape_str(x.shape()));
  }
  const std::size_t C = x.shape().back();
  if (C != channels_) {
    fail_config("layer " + name_ + ": channel mismatch, input has " +
                std::to_string(C) + ", layer has " + std::to_string(channels_));
  }
  const std::size_t rows = x.size() / C;  // batch x spatial positions
  const double eps = eps_[0];

  Tensor y(x.shape());

  if (mode == Mode::eval) {
    std::vector<double> scale(C), shift(C);
    for (std::size_t c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(running_var[c] + eps);
      scale[c] = gamma[c] * inv;
      shift[c] = beta[c] - running_mean[c] * scale[c];
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double* in = x.data() + r * C;
      double* out = y.data() + r * C;
      for (std::size_t c = 0; c < C; ++c) out[c] = in[c] * scale[c] + shift[c];
    }
    return y;
  }

  if (rows < 2) {
    fail_data("layer " + name_ + ": normalization population " + std::to_string(rows) +
              " per channel is degenerate (need >= 2)");
  }

  // batch moments, population variance
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * C;
    for (std::size_t c = 0; c < C; ++c) mean[c] += in[c];
  }
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (std::size_t c = 0; c < C; ++c) mean[c] *= inv_rows;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * C;
    for (std::size_t c = 0; c < C; ++c) {
      const double d = in[c] - mean[c];
      var[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < C; ++c) var[c] *= inv_rows;

  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);

  const bool keep_cache = (mode == Mode::train);
  if (keep_cache) {
    cached_xhat_ = Tensor(x.shape());
    cached_inv_std_ = inv_std;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * C;
    double* out = y.data() + r * C;
    double* xh = keep_cache ? cached_xhat_.data() + r * C : nullptr;
    for (std::size_t c = 0; c < C; ++c) {
      const double xhat = (in[c] - mean[c]) * inv_std[c];
      if (keep_cache) xh[c] = xhat;
      out[c] = gamma[c] * xhat + beta[c];
    }
  }
  has_cache_ = keep_cache;

  // EMA update of the running statistics; var[c] >= 0 keeps running_var >= 0.
  const double m = momentum_[0];
  for (std::size_t c = 0; c < C; ++c) {
    running_mean[c] = m * mean[c] + (1.0 - m) * running_mean[c];
    running_var[c] = m * var[c] + (1.0 - m) * running_var[c];
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& dy) {
  if (!has_cache_) fail_config("layer " + name_ + ": backward without train-mode forward");
  const std::size_t C = channels_;
  const std::size_t rows = dy.size() / C;
  const double inv_rows = 1.0 / static_cast<double>(rows);

  // Per channel with xhat = (x - mu) / sqrt(var + eps):
  //   dgamma = sum dy * xhat
  //   dbeta  = sum dy
  //   dx = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
  std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* d = dy.data() + r * C;
    const double* xh = cached_xhat_.data() + r * C;
    for (std::size_t c = 0; c < C; ++c) {
      sum_dy[c] += d[c];
      sum_dy_xhat[c] += d[c] * xh[c];
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    gamma_grad[c] += sum_dy_xhat[c];
    beta_grad[c] += sum_dy[c];
  }

  Tensor dx(dy.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* d = dy.data() + r * C;
    const double* xh = cached_xhat_.data() + r * C;
    double* out = dx.data() + r * C;
    for (std::size_t c = 0; c < C; ++c) {
      out[c] = gamma[c] * cached_inv_std_[c] *
               (d[c] - sum_dy[c] * inv_rows - xh[c] * sum_dy_xhat[c] * inv_rows);
    }
  }
  has_cache_ = false;
  cached_xhat_ = Tensor();
  return dx;
}

std::vector<ParamRef> BatchNorm::params() {
  return {{name_ + ".gamma", &gamma, &gamma_grad},
          {name_ + ".beta", &beta, &beta_grad}};
}

std::vector<StateRef> BatchNorm::state() {
  return {{name_ + ".running_mean", &running_mean},
          {name_ + ".running_var", &running_var},
          {name_ + ".eps", &eps_},
          {name_ + ".momentum", &momentum_}};
}

void BatchNorm::zero_grad() {
  gamma_grad.fill(0.0);
  beta_grad.fill(0.0);
}

// ---------------------------------------------------------------- snapshots

bool BNSnapshot::signature_matches(const std::vector<BatchNorm*>& bns) const {
  if (layers.size() != bns.size()) return false;
  for (std::size_t i = 0; i < bns.size(); ++i) {
    if (layers[i].layer != bns[i]->name()) return false;
    if (layers[i].mean.size() != bns[i]->channels()) return false;
    if (layers[i].var.size() != bns[i]->channels()) return false;
  }
  return true;
}

bool BNSnapshot::bits_equal(const BNSnapshot& o) const {
  if (task_id != o.task_id || layers.size() != o.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].layer != o.layers[i].layer) return false;
    if (!layers[i].mean.bits_equal(o.layers[i].mean)) return false;
    if (!layers[i].var.bits_equal(o.layers[i].var)) return false;
  }
  return true;
}

BNSnapshot snapshot_bn_stats(const std::vector<BatchNorm*>& bns, int task_id,
                             std::string created_by) {
  BNSnapshot snap;
  snap.task_id = task_id;
  snap.created_by = std::move(created_by);
  snap.layers.reserve(bns.size());
  for (const BatchNorm* bn : bns) {
    snap.layers.push_back({bn->name(), bn->running_mean, bn->running_var});
  }
  return snap;
}

void restore_bn_stats(const std::vector<BatchNorm*>& bns, const BNSnapshot& snap) {
  if (!snap.signature_matches(bns)) {
    fail_data("BN snapshot signature does not match the model's BN layers");
  }
  for (std::size_t i = 0; i < bns.size(); ++i) {
    bns[i]->running_mean = snap.layers[i].mean;
    bns[i]->running_var = snap.layers[i].var;
  }
}

}  // namespace odil
