#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "odil/batchnorm.hpp"
#include "odil/layers.hpp"
#include "odil/tensor.hpp"

namespace odil {

enum class LayerKind {
  dense,
  conv2d,
  batchnorm,
  relu,
  global_average_pool,
  classifier_dense,
};

std::string to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

struct LayerDesc {
  LayerKind kind;
  std::size_t units = 0;         // dense
  std::size_t out_channels = 0;  // conv2d
  std::size_t kernel = 3;        // conv2d
  std::size_t channels = 0;      // batchnorm; filled in by validation
  double eps = 1e-5;             // batchnorm
  double momentum = 0.1;         // batchnorm
};

// Ordered layer descriptors plus input geometry. validate() runs shape
// inference, fills every batchnorm descriptor's channel count and rejects
// incompatible configurations naming the offending layer.
struct ModelConfig {
  std::vector<std::size_t> input_shape;  // [H,W,C] or [F], without batch dim
  std::size_t classes = 0;
  std::vector<LayerDesc> layers;

  void validate();

  std::string to_json_string() const;
  static ModelConfig from_json_string(const std::string& json);

  bool operator==(const ModelConfig&) const = default;
};

// The reference classifier: two conv/bn/relu blocks, global average pooling
// and a dense classifier head, on single-channel spatial inputs.
ModelConfig reference_model_config(std::size_t classes = 10,
                                   std::vector<std::size_t> conv_channels = {16, 32},
                                   std::vector<std::size_t> input_shape = {16, 16, 1});

class Model {
 public:
  // Builds the layer stack; parameters are zero until init_params().
  explicit Model(ModelConfig config);

  // Fan-in-scaled uniform init of all weights from the given seed; BN state
  // resets to (mean 0, var 1, gamma 1, beta 0).
  void init_params(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::size_t classes() const { return config_.classes; }

  // Runs the layer stack. Input must be the configured shape with a leading
  // batch dimension >= 1. In eval mode no state mutates; in train/adapt
  // modes only BN running statistics change during the pass.
  Tensor forward(const Tensor& batch, Mode mode);

  // Backpropagates from dL/dlogits, accumulating parameter gradients.
  // Requires a preceding forward(Mode::train).
  void backward(const Tensor& logits_grad);
  // Same, but propagates only as far down as layer index `first_layer`
  // (used to train a classifier head on a frozen feature extractor).
  void backward(const Tensor& logits_grad, std::size_t first_layer);

  void zero_grad();

  std::vector<ParamRef> trainable_params();
  // Trainable params of layers [first_layer, end); first_layer 0 = all.
  std::vector<ParamRef> trainable_params(std::size_t first_layer);
  std::vector<StateRef> state();
  // Parameters and state in a stable order, for checkpoints and diffs.
  std::vector<StateRef> named_tensors();

  std::vector<BatchNorm*> bn_layers();
  std::vector<const Layer*> layers() const;
  std::size_t layer_count() const { return layers_.size(); }
  // Index of the terminal classifier layer.
  std::size_t classifier_index() const { return classifier_index_; }

  BNSnapshot snapshot_bn(int task_id, std::string created_by = {});
  void restore_bn(const BNSnapshot& snap);

 private:
  ModelConfig config_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::size_t classifier_index_ = 0;
  bool grad_context_ = false;
};

// Per-sample argmax over class logits.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace odil
