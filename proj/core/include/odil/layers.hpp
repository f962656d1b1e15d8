#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "odil/tensor.hpp"

namespace odil {

// Forward-pass modes.
//   eval  : pure, no state mutates
//   train : batch-norm running statistics update; intermediates are retained
//           so a backward() call can follow
//   adapt : batch-norm running statistics update only; no intermediates, no
//           gradients (the forward-only adaptation path)
enum class Mode { eval, train, adapt };

// A named trainable parameter with its gradient accumulator.
struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

// Named non-trainable state (running statistics, scalar knobs).
struct StateRef {
  std::string name;
  Tensor* value = nullptr;
};

class Layer {
 public:
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }

  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  // dy has the shape of this layer's output; returns dL/dx and accumulates
  // parameter gradients. Only valid after forward(Mode::train).
  virtual Tensor backward(const Tensor& dy) = 0;

  virtual std::vector<ParamRef> params() { return {}; }
  virtual std::vector<StateRef> state() { return {}; }
  virtual void zero_grad() {}

 protected:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  std::string name_;
};

// y = x W + b over the trailing feature axis; x is [N, F], W is [F, U].
class Dense : public Layer {
 public:
  Dense(std::string name, std::size_t in_features, std::size_t out_features);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamRef> params() override;
  void zero_grad() override;

  Tensor weight;  // [F, U]
  Tensor bias;    // [U]
  Tensor weight_grad;
  Tensor bias_grad;

 private:
  Tensor cached_input_;
  bool has_cache_ = false;
};

// 3x3 same-padding convolution on NHWC tensors, implemented as im2col + GEMM.
class Conv2D : public Layer {
 public:
  Conv2D(std::string name, std::size_t in_channels, std::size_t out_channels,
         std::size_t kernel = 3);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamRef> params() override;
  void zero_grad() override;

  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return out_channels_; }
  std::size_t kernel_size() const { return kernel_; }

  Tensor kernel;  // [KH, KW, Cin, Cout]
  Tensor bias;    // [Cout]
  Tensor kernel_grad;
  Tensor bias_grad;

 private:
  Tensor im2col(const Tensor& x) const;  // [N*H*W, KH*KW*Cin]

  std::size_t in_channels_;
  std::size_t out_channels_;
  std::size_t kernel_;

  Tensor cached_cols_;
  std::vector<std::size_t> cached_input_shape_;
  bool has_cache_ = false;
};

class ReLU : public Layer {
 public:
  explicit ReLU(std::string name) : Layer(std::move(name)) {}

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor cached_input_;
  bool has_cache_ = false;
};

// [N, H, W, C] -> [N, C], mean over the spatial axes.
class GlobalAvgPool : public Layer {
 public:
  explicit GlobalAvgPool(std::string name) : Layer(std::move(name)) {}

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<std::size_t> cached_input_shape_;
  bool has_cache_ = false;
};

}  // namespace odil
