#include "odil/model.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "odil/error.hpp"
#include "odil/rng.hpp"

namespace odil {

using nlohmann::json;

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::global_average_pool: return "global-average-pool";
    case LayerKind::classifier_dense: return "classifier-dense";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "conv2d") return LayerKind::conv2d;
  if (s == "batchnorm") return LayerKind::batchnorm;
  if (s == "relu") return LayerKind::relu;
  if (s == "global-average-pool") return LayerKind::global_average_pool;
  if (s == "classifier-dense") return LayerKind::classifier_dense;
  fail_config("unknown layer kind '" + s + "'");
}

void ModelConfig::validate() {
  if (classes < 2) fail_config("model: class count must be >= 2");
  if (input_shape.size() != 1 && input_shape.size() != 3) {
    fail_config("model: input shape must be [F] or [H,W,C], got " + shape_str(input_shape));
  }
  for (std::size_t d : input_shape) {
    if (d == 0) fail_config("model: input shape has a zero dimension");
  }
  if (layers.empty()) fail_config("model: no layers");
  if (layers.back().kind != LayerKind::classifier_dense) {
    fail_config("model: last layer must be classifier-dense");
  }

  std::vector<std::size_t> shape = input_shape;
  std::size_t classifier_count = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerDesc& d = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(d.kind) + ")";
    switch (d.kind) {
      case LayerKind::conv2d:
        if (shape.size() != 3) fail_config(where + ": needs [H,W,C] input, has " + shape_str(shape));
        if (d.out_channels == 0) fail_config(where + ": out_channels not set");
        if (d.kernel % 2 == 0 || d.kernel == 0) fail_config(where + ": kernel must be odd");
        shape[2] = d.out_channels;
        break;
      case LayerKind::batchnorm:
        d.channels = shape.back();  // recorded channel count
        if (d.eps <= 0.0) fail_config(where + ": eps must be > 0");
        if (d.momentum <= 0.0 || d.momentum > 1.0) fail_config(where + ": momentum must be in (0,1]");
        break;
      case LayerKind::relu:
        break;
      case LayerKind::global_average_pool:
        if (shape.size() != 3) fail_config(where + ": needs [H,W,C] input, has " + shape_str(shape));
        shape = {shape[2]};
        break;
      case LayerKind::dense:
        if (shape.size() != 1) fail_config(where + ": needs flat input, has " + shape_str(shape));
        if (d.units == 0) fail_config(where + ": units not set");
        shape = {d.units};
        break;
      case LayerKind::classifier_dense:
        if (shape.size() != 1) fail_config(where + ": needs flat input, has " + shape_str(shape));
        if (i + 1 != layers.size()) fail_config(where + ": classifier must be terminal");
        ++classifier_count;
        shape = {classes};
        break;
    }
  }
  if (classifier_count != 1) fail_config("model: exactly one classifier-dense layer required");
}

std::string ModelConfig::to_json_string() const {
  json j;
  j["input_shape"] = input_shape;
  j["classes"] = classes;
  json ls = json::array();
  for (const LayerDesc& d : layers) {
    json e;
    e["kind"] = to_string(d.kind);
    switch (d.kind) {
      case LayerKind::dense: e["units"] = d.units; break;
      case LayerKind::conv2d:
        e["out_channels"] = d.out_channels;
        e["kernel"] = d.kernel;
        break;
      case LayerKind::batchnorm:
        e["channels"] = d.channels;
        e["eps"] = d.eps;
        e["momentum"] = d.momentum;
        break;
      default: break;
    }
    ls.push_back(e);
  }
  j["layers"] = ls;
  return j.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail_config(std::string("model config: invalid JSON: ") + e.what());
  }
  ModelConfig c;
  try {
    c.input_shape = j.at("input_shape").get<std::vector<std::size_t>>();
    c.classes = j.at("classes").get<std::size_t>();
    for (const json& e : j.at("layers")) {
      LayerDesc d;
      d.kind = layer_kind_from_string(e.at("kind").get<std::string>());
      if (e.contains("units")) d.units = e["units"].get<std::size_t>();
      if (e.contains("out_channels")) d.out_channels = e["out_channels"].get<std::size_t>();
      if (e.contains("kernel")) d.kernel = e["kernel"].get<std::size_t>();
      if (e.contains("channels")) d.channels = e["channels"].get<std::size_t>();
      if (e.contains("eps")) d.eps = e["eps"].get<double>();
      if (e.contains("momentum")) d.momentum = e["momentum"].get<double>();
      c.layers.push_back(d);
    }
  } catch (const json::exception& e) {
    fail_config(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig reference_model_config(std::size_t classes,
                                   std::vector<std::size_t> conv_channels,
                                   std::vector<std::size_t> input_shape) {
  ModelConfig c;
  c.input_shape = std::move(input_shape);
  c.classes = classes;
  for (std::size_t ch : conv_channels) {
    c.layers.push_back({.kind = LayerKind::conv2d, .out_channels = ch});
    c.layers.push_back({.kind = LayerKind::batchnorm});
    c.layers.push_back({.kind = LayerKind::relu});
  }
  c.layers.push_back({.kind = LayerKind::global_average_pool});
  c.layers.push_back({.kind = LayerKind::classifier_dense});
  c.validate();
  return c;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();

  std::vector<std::size_t> shape = config_.input_shape;
  int n_conv = 0, n_bn = 0, n_relu = 0, n_dense = 0, n_pool = 0;
  for (const LayerDesc& d : config_.layers) {
    switch (d.kind) {
      case LayerKind::conv2d:
        layers_.push_back(std::make_unique<Conv2D>("conv" + std::to_string(++n_conv),
                                                   shape[2], d.out_channels, d.kernel));
        shape[2] = d.out_channels;
        break;
      case LayerKind::batchnorm:
        layers_.push_back(std::make_unique<BatchNorm>("bn" + std::to_string(++n_bn),
                                                      shape.back(), d.eps, d.momentum));
        break;
      case LayerKind::relu:
        layers_.push_back(std::make_unique<ReLU>("relu" + std::to_string(++n_relu)));
        break;
      case LayerKind::global_average_pool:
        layers_.push_back(std::make_unique<GlobalAvgPool>("pool" + std::to_string(++n_pool)));
        shape = {shape[2]};
        break;
      case LayerKind::dense:
        layers_.push_back(std::make_unique<Dense>("dense" + std::to_string(++n_dense),
                                                  shape[0], d.units));
        shape = {d.units};
        break;
      case LayerKind::classifier_dense:
        classifier_index_ = layers_.size();
        layers_.push_back(std::make_unique<Dense>("classifier", shape[0], config_.classes));
        shape = {config_.classes};
        break;
    }
  }
}

void Model::init_params(std::uint64_t seed) {
  Rng rng(substream(seed, "init"));
  for (auto& layer : layers_) {
    if (auto* d = dynamic_cast<Dense*>(layer.get())) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(d->weight.dim(0)));
      for (std::size_t i = 0; i < d->weight.size(); ++i) d->weight[i] = rng.uniform(-bound, bound);
      for (std::size_t i = 0; i < d->bias.size(); ++i) d->bias[i] = rng.uniform(-bound, bound);
    } else if (auto* c = dynamic_cast<Conv2D*>(layer.get())) {
      const double fan_in = static_cast<double>(c->kernel_size() * c->kernel_size() * c->in_channels());
      const double bound = 1.0 / std::sqrt(fan_in);
      for (std::size_t i = 0; i < c->kernel.size(); ++i) c->kernel[i] = rng.uniform(-bound, bound);
      for (std::size_t i = 0; i < c->bias.size(); ++i) c->bias[i] = rng.uniform(-bound, bound);
    } else if (auto* b = dynamic_cast<BatchNorm*>(layer.get())) {
      b->gamma.fill(1.0);
      b->beta.fill(0.0);
      b->running_mean.fill(0.0);
      b->running_var.fill(1.0);
    }
  }
  zero_grad();
}

Tensor Model::forward(const Tensor& batch, Mode mode) {
  const std::vector<std::size_t>& in = config_.input_shape;
  if (batch.rank() != in.size() + 1) {
    fail_config("model forward: expected batched " + shape_str(in) + " input, got " +
                shape_str(batch.shape()));
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (batch.dim(i + 1) != in[i]) {
      fail_config("model forward: input " + shape_str(batch.shape()) +
                  " does not match configured shape " + shape_str(in));
    }
  }
  Tensor x = batch;
  for (auto& layer : layers_) x = layer->forward(x, mode);
  if (!x.all_finite()) fail_numeric("model forward produced non-finite logits");
  if (mode == Mode::train) grad_context_ = true;
  return x;
}

void Model::backward(const Tensor& logits_grad) { backward(logits_grad, 0); }

void Model::backward(const Tensor& logits_grad, std::size_t first_layer) {
  if (!grad_context_) fail_config("model backward: no preceding train-mode forward");
  Tensor g = logits_grad;
  for (std::size_t i = layers_.size(); i-- > first_layer;) {
    g = layers_[i]->backward(g);
  }
  grad_context_ = false;
}

void Model::zero_grad() {
  for (auto& layer : layers_) layer->zero_grad();
}

std::vector<ParamRef> Model::trainable_params() { return trainable_params(0); }

std::vector<ParamRef> Model::trainable_params(std::size_t first_layer) {
  std::vector<ParamRef> out;
  for (std::size_t i = first_layer; i < layers_.size(); ++i) {
    for (ParamRef p : layers_[i]->params()) out.push_back(p);
  }
  return out;
}

std::vector<StateRef> Model::state() {
  std::vector<StateRef> out;
  for (auto& layer : layers_) {
    for (StateRef s : layer->state()) out.push_back(s);
  }
  return out;
}

std::vector<StateRef> Model::named_tensors() {
  std::vector<StateRef> out;
  for (auto& layer : layers_) {
    for (ParamRef p : layer->params()) out.push_back({p.name, p.value});
    for (StateRef s : layer->state()) out.push_back(s);
  }
  return out;
}

std::vector<BatchNorm*> Model::bn_layers() {
  std::vector<BatchNorm*> out;
  for (auto& layer : layers_) {
    if (auto* bn = dynamic_cast<BatchNorm*>(layer.get())) out.push_back(bn);
  }
  return out;
}

std::vector<const Layer*> Model::layers() const {
  std::vector<const Layer*> out;
  for (const auto& layer : layers_) out.push_back(layer.get());
  return out;
}

BNSnapshot Model::snapshot_bn(int task_id, std::string created_by) {
  return snapshot_bn_stats(bn_layers(), task_id, std::move(created_by));
}

void Model::restore_bn(const BNSnapshot& snap) { restore_bn_stats(bn_layers(), snap); }

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) fail_config("argmax_rows: expected [N,C] logits");
  const std::size_t N = logits.dim(0), C = logits.dim(1);
  std::vector<int> out(N, 0);
  for (std::size_t n = 0; n < N; ++n) {
    const double* row = logits.data() + n * C;
    int best = 0;
    for (std::size_t c = 1; c < C; ++c) {
      if (row[c] > row[best]) best = static_cast<int>(c);
    }
    out[n] = best;
  }
  return out;
}

}  // namespace odil
