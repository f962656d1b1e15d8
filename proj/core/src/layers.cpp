#include "odil/layers.hpp"

#include <cstring>

#include "odil/error.hpp"
#include "odil/linalg.hpp"

namespace odil {

namespace {

void require_rank(const Tensor& x, std::size_t rank, const std::string& layer) {
  if (x.rank() != rank) {
    fail_config("layer " + layer + ": expected rank-" + std::to_string(rank) +
                " input, got " + shape_str(x.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(std::string name, std::size_t in_features, std::size_t out_features)
    : Layer(std::move(name)),
      weight({in_features, out_features}),
      bias({out_features}),
      weight_grad({in_features, out_features}),
      bias_grad({out_features}) {}

Tensor Dense::forward(const Tensor& x, Mode mode) {
  require_rank(x, 2, name_);
  const std::size_t N = x.dim(0), F = x.dim(1), U = weight.dim(1);
  if (F != weight.dim(0)) {
    fail_config("layer " + name_ + ": input features " + std::to_string(F) +
                " != weight rows " + std::to_string(weight.dim(0)));
  }
  Tensor y({N, U});
  linalg::gemm_nn(N, U, F, x.data(), weight.data(), y.data());
  for (std::size_t n = 0; n < N; ++n) {
    double* row = y.data() + n * U;
    for (std::size_t u = 0; u < U; ++u) row[u] += bias[u];
  }
  if (mode == Mode::train) {
    cached_input_ = x;
    has_cache_ = true;
  }
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  if (!has_cache_) fail_config("layer " + name_ + ": backward without train-mode forward");
  const Tensor& x = cached_input_;
  const std::size_t N = x.dim(0), F = x.dim(1), U = weight.dim(1);

  // dW += x^T dy ; db += column sums of dy ; dx = dy W^T
  Tensor dw({F, U});
  linalg::gemm_tn(F, U, N, x.data(), dy.data(), dw.data());
  for (std::size_t i = 0; i < dw.size(); ++i) weight_grad[i] += dw[i];
  for (std::size_t n = 0; n < N; ++n) {
    const double* row = dy.data() + n * U;
    for (std::size_t u = 0; u < U; ++u) bias_grad[u] += row[u];
  }
  Tensor dx({N, F});
  linalg::gemm_nt(N, F, U, dy.data(), weight.data(), dx.data());
  has_cache_ = false;
  return dx;
}

std::vector<ParamRef> Dense::params() {
  return {{name_ + ".weight", &weight, &weight_grad},
          {name_ + ".bias", &bias, &bias_grad}};
}

void Dense::zero_grad() {
  weight_grad.fill(0.0);
  bias_grad.fill(0.0);
}

// ---------------------------------------------------------------- Conv2D

Conv2D::Conv2D(std::string name, std::size_t in_channels, std::size_t out_channels,
               std::size_t kernel)
    : Layer(std::move(name)),
      kernel({kernel, kernel, in_channels, out_channels}),
      bias({out_channels}),
      kernel_grad({kernel, kernel, in_channels, out_channels}),
      bias_grad({out_channels}),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel) {
  if (kernel % 2 == 0) fail_config("layer " + name_ + ": kernel size must be odd");
}

Tensor Conv2D::im2col(const Tensor& x) const {
  const std::size_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t K = kernel_, P = K / 2;
  const std::size_t patch = K * K * C;
  Tensor cols({N * H * W, patch});
  double* out = cols.data();
  for (std::size_t n = 0; n < N; ++n) {
    const double* img = x.data() + n * H * W * C;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t xx = 0; xx < W; ++xx) {
        double* row = out + ((n * H + y) * W + xx) * patch;
        for (std::size_t ky = 0; ky < K; ++ky) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(P);
          for (std::size_t kx = 0; kx < K; ++kx) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - static_cast<std::ptrdiff_t>(P);
            double* dst = row + (ky * K + kx) * C;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H) ||
                sx < 0 || sx >= static_cast<std::ptrdiff_t>(W)) {
              std::memset(dst, 0, C * sizeof(double));
            } else {
              std::memcpy(dst, img + (static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx)) * C,
                          C * sizeof(double));
            }
          }
        }
      }
    }
  }
  return cols;
}

Tensor Conv2D::forward(const Tensor& x, Mode mode) {
  require_rank(x, 4, name_);
  if (x.dim(3) != in_channels_) {
    fail_config("layer " + name_ + ": input channels " + std::to_string(x.dim(3)) +
                " != " + std::to_string(in_channels_));
  }
  const std::size_t N = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t rows = N * H * W, patch = kernel_ * kernel_ * in_channels_;

  Tensor cols = im2col(x);
  Tensor y({N, H, W, out_channels_});
  linalg::gemm_nn(rows, out_channels_, patch, cols.data(), kernel.data(), y.data());
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = y.data() + r * out_channels_;
    for (std::size_t c = 0; c < out_channels_; ++c) row[c] += bias[c];
  }
  if (mode == Mode::train) {
    cached_cols_ = std::move(cols);
    cached_input_shape_ = x.shape();
    has_cache_ = true;
  }
  return y;
}

Tensor Conv2D::backward(const Tensor& dy) {
  if (!has_cache_) fail_config("layer " + name_ + ": backward without train-mode forward");
  const std::size_t N = cached_input_shape_[0], H = cached_input_shape_[1],
                    W = cached_input_shape_[2], C = cached_input_shape_[3];
  const std::size_t K = kernel_, P = K / 2;
  const std::size_t rows = N * H * W, patch = K * K * C;

  // dKernel += cols^T dy ; dBias += row sums
  Tensor dk({K, K, C, out_channels_});
  linalg::gemm_tn(patch, out_channels_, rows, cached_cols_.data(), dy.data(), dk.data());
  for (std::size_t i = 0; i < dk.size(); ++i) kernel_grad[i] += dk[i];
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = dy.data() + r * out_channels_;
    for (std::size_t c = 0; c < out_channels_; ++c) bias_grad[c] += row[c];
  }

  // dCols = dy kernel^T, scattered back to the input grid (col2im).
  Tensor dcols({rows, patch});
  linalg::gemm_nt(rows, patch, out_channels_, dy.data(), kernel.data(), dcols.data());

  Tensor dx({N, H, W, C});
  for (std::size_t n = 0; n < N; ++n) {
    double* img = dx.data() + n * H * W * C;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t xx = 0; xx < W; ++xx) {
        const double* row = dcols.data() + ((n * H + y) * W + xx) * patch;
        for (std::size_t ky = 0; ky < K; ++ky) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(P);
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kx = 0; kx < K; ++kx) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - static_cast<std::ptrdiff_t>(P);
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(W)) continue;
            const double* src = row + (ky * K + kx) * C;
            double* dst = img + (static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx)) * C;
            for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
  has_cache_ = false;
  cached_cols_ = Tensor();
  return dx;
}

std::vector<ParamRef> Conv2D::params() {
  return {{name_ + ".kernel", &kernel, &kernel_grad},
          {name_ + ".bias", &bias, &bias_grad}};
}

void Conv2D::zero_grad() {
  kernel_grad.fill(0.0);
  bias_grad.fill(0.0);
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x, Mode mode) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0) y[i] = 0.0;
  }
  if (mode == Mode::train) {
    cached_input_ = x;
    has_cache_ = true;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  if (!has_cache_) fail_config("layer " + name_ + ": backward without train-mode forward");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (cached_input_[i] <= 0.0) dx[i] = 0.0;
  }
  has_cache_ = false;
  return dx;
}

// ---------------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, Mode mode) {
  require_rank(x, 4, name_);
  const std::size_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const double inv = 1.0 / static_cast<double>(H * W);
  Tensor y({N, C});
  for (std::size_t n = 0; n < N; ++n) {
    const double* img = x.data() + n * H * W * C;
    double* row = y.data() + n * C;
    for (std::size_t p = 0; p < H * W; ++p) {
      const double* px = img + p * C;
      for (std::size_t c = 0; c < C; ++c) row[c] += px[c];
    }
    for (std::size_t c = 0; c < C; ++c) row[c] *= inv;
  }
  if (mode == Mode::train) {
    cached_input_shape_ = x.shape();
    has_cache_ = true;
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  if (!has_cache_) fail_config("layer " + name_ + ": backward without train-mode forward");
  const std::size_t N = cached_input_shape_[0], H = cached_input_shape_[1],
                    W = cached_input_shape_[2], C = cached_input_shape_[3];
  const double inv = 1.0 / static_cast<double>(H * W);
  Tensor dx({N, H, W, C});
  for (std::size_t n = 0; n < N; ++n) {
    const double* row = dy.data() + n * C;
    double* img = dx.data() + n * H * W * C;
    for (std::size_t p = 0; p < H * W; ++p) {
      double* px = img + p * C;
      for (std::size_t c = 0; c < C; ++c) px[c] = row[c] * inv;
    }
  }
  has_cache_ = false;
  return dx;
}

}  // namespace odil
