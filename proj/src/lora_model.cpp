// Copyright 2026 The proxyfl Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "proxyfl/lora_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "proxyfl/errors.hpp"

namespace proxyfl {

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ValueError("unknown activation \"" + std::string(name) + "\"");
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mse") return LossKind::kMse;
  if (name == "softmax-cross-entropy") return LossKind::kSoftmaxCrossEntropy;
  throw ValueError("unknown loss kind \"" + std::string(name) + "\"");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

std::string_view to_string(LossKind k) {
  return k == LossKind::kMse ? "mse" : "softmax-cross-entropy";
}

Backbone::Backbone(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("backbone needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.empty()) throw ShapeError("backbone layer has an empty weight");
    if (layer.bias.rows() != layer.weight.rows() || layer.bias.cols() != 1) {
      throw ShapeError("bias of layer " + std::to_string(l) + " must be " +
                       std::to_string(layer.weight.rows()) + "x1, got " +
                       shape_string(layer.bias));
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw ShapeError("layer " + std::to_string(l) + " input width " +
                       std::to_string(layer.weight.cols()) + " does not chain to " +
                       std::to_string(layers_[l - 1].weight.rows()));
    }
    require_finite(layer.weight, "backbone weight");
    require_finite(layer.bias, "backbone bias");
  }
}

std::uint64_t Backbone::checksum() const {
  std::uint64_t h = 0;
  for (const auto& layer : layers_) {
    h = splitmix64_mix(h ^ proxyfl::checksum(layer.weight));
    h = splitmix64_mix(h ^ proxyfl::checksum(layer.bias));
  }
  return h;
}

Backbone make_backbone(const std::vector<std::size_t>& widths, Activation hidden,
                       RandomSource& rng) {
  if (widths.size() < 2) throw ShapeError("backbone needs at least input and output widths");
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t d_in = widths[l], d_out = widths[l + 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(d_in + d_out));
    const bool last = l + 2 == widths.size();
    layers.push_back({gaussian_fill(d_out, d_in, 0.0, stddev, rng), Matrix(d_out, 1),
                      last ? Activation::kIdentity : hidden});
  }
  return Backbone(std::move(layers));
}

AdapterSet init_adapters(const Backbone& backbone, const std::vector<std::size_t>& layers,
                         std::size_t rank, double init_stddev, RandomSource& rng) {
  AdapterSet set;
  for (std::size_t l : layers) {
    if (l >= backbone.depth()) throw ShapeError("adapter layer index out of range");
    const auto& w = backbone.layers()[l].weight;
    set.push_back({l, Matrix(w.rows(), rank), gaussian_fill(rank, w.cols(), 0.0, init_stddev, rng)});
  }
  std::sort(set.begin(), set.end(), [](const auto& x, const auto& y) { return x.layer < y.layer; });
  validate_adapters(backbone, set);
  return set;
}

void validate_adapters(const Backbone& backbone, const AdapterSet& adapters) {
  for (std::size_t i = 0; i < adapters.size(); ++i) {
    const auto& ad = adapters[i];
    if (ad.layer >= backbone.depth()) throw ShapeError("adapter layer index out of range");
    if (i > 0 && adapters[i - 1].layer >= ad.layer) {
      throw ShapeError("adapter set must be sorted by layer with no duplicates");
    }
    const auto& w = backbone.layers()[ad.layer].weight;
    const std::size_t r = ad.a.rows();
    if (ad.b.rows() != w.rows() || ad.a.cols() != w.cols() || ad.b.cols() != r || r == 0) {
      throw ShapeError("adapter for layer " + std::to_string(ad.layer) + " has B " +
                       shape_string(ad.b) + " and A " + shape_string(ad.a) + " against W0 " +
                       shape_string(w));
    }
    if (r > std::min(w.rows(), w.cols())) throw ShapeError("adapter rank exceeds min(d_out, d_in)");
    require_finite(ad.b, "adapter B");
    require_finite(ad.a, "adapter A");
  }
}

Matrix effective_weight(const Matrix& w0, const LoraAdapter& adapter) {
  const Matrix delta = matmul(adapter.b, adapter.a);
  if (!delta.same_shape(w0)) {
    throw ShapeError("B A is " + shape_string(delta) + " but W0 is " + shape_string(w0));
  }
  return add_scaled(w0, delta, 1.0f);
}

namespace {

std::vector<const LoraAdapter*> adapters_by_layer(const Backbone& backbone,
                                                  const AdapterSet* adapters) {
  std::vector<const LoraAdapter*> by_layer(backbone.depth(), nullptr);
  if (adapters != nullptr) {
    for (const auto& ad : *adapters) by_layer.at(ad.layer) = &ad;
  }
  return by_layer;
}

float activate(Activation a, float z) {
  switch (a) {
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0.0f ? z : 0.0f;
    case Activation::kIdentity: return z;
  }
  return z;
}

// d activation / d z, expressed through the pre-activation z and output h.
float activate_grad(Activation a, float z, float h) {
  switch (a) {
    case Activation::kTanh: return 1.0f - h * h;
    case Activation::kRelu: return z > 0.0f ? 1.0f : 0.0f;
    case Activation::kIdentity: return 1.0f;
  }
  return 1.0f;
}

ForwardResult forward_impl(const Backbone& backbone, const AdapterSet* adapters,
                           const Matrix& inputs) {
  if (inputs.rows() != backbone.input_dim()) {
    throw ShapeError("input width " + std::to_string(inputs.rows()) + " does not match layer 0 (" +
                     std::to_string(backbone.input_dim()) + ")");
  }
  const auto by_layer = adapters_by_layer(backbone, adapters);
  ForwardResult result;
  auto& cache = result.cache;
  Matrix x = inputs;
  for (std::size_t l = 0; l < backbone.depth(); ++l) {
    const auto& layer = backbone.layers()[l];
    Matrix w = by_layer[l] ? effective_weight(layer.weight, *by_layer[l]) : layer.weight;
    Matrix z = matmul(w, x);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      const float b = layer.bias(r, 0);
      for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += b;
    }
    Matrix h = z;
    for (float& v : h.values()) v = activate(layer.activation, v);
    require_finite(h, "activations");
    cache.weights.push_back(std::move(w));
    cache.inputs.push_back(std::move(x));
    cache.pre_activations.push_back(std::move(z));
    x = h;
    cache.outputs.push_back(std::move(h));
  }
  result.outputs = std::move(x);
  return result;
}

void check_targets(const Matrix& outputs, const Matrix& targets) {
  if (!outputs.same_shape(targets)) {
    throw ShapeError("targets " + shape_string(targets) + " do not match outputs " +
                     shape_string(outputs));
  }
}

// Returns the loss and writes dL/d outputs.
double loss_with_grad(const Matrix& y, const Matrix& t, LossKind kind, Matrix* grad) {
  check_targets(y, t);
  const std::size_t k = y.rows(), m = y.cols();
  double loss = 0.0;
  if (grad != nullptr) *grad = Matrix(k, m);
  if (kind == LossKind::kMse) {
    const double scale = 1.0 / static_cast<double>(k * m);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = static_cast<double>(y.values()[i]) - t.values()[i];
      loss += d * d;
      if (grad != nullptr) grad->values()[i] = static_cast<float>(2.0 * d * scale);
    }
    loss *= scale;
  } else {
    const double scale = 1.0 / static_cast<double>(m);
    std::vector<double> p(k);
    for (std::size_t c = 0; c < m; ++c) {
      double top = y(0, c);
      for (std::size_t r = 1; r < k; ++r) top = std::max(top, static_cast<double>(y(r, c)));
      double total = 0.0;
      for (std::size_t r = 0; r < k; ++r) {
        p[r] = std::exp(static_cast<double>(y(r, c)) - top);
        total += p[r];
      }
      const double log_total = std::log(total);
      double mass = 0.0;
      for (std::size_t r = 0; r < k; ++r) {
        const double tr = t(r, c);
        loss -= tr * (static_cast<double>(y(r, c)) - top - log_total);
        mass += tr;
      }
      if (grad != nullptr) {
        for (std::size_t r = 0; r < k; ++r) {
          (*grad)(r, c) = static_cast<float>((p[r] / total * mass - t(r, c)) * scale);
        }
      }
    }
    loss *= scale;
  }
  if (!std::isfinite(loss)) throw ValueError("non-finite loss");
  return loss;
}

// Walks the layers from last to first. `visit(l, dW, dZ)` sees the gradient of
// the effective weight and of the pre-activation for each layer.
void backward_impl(const Backbone& backbone, const ForwardCache& cache, Matrix d_out,
                   const std::function<void(std::size_t, const Matrix&, const Matrix&)>& visit) {
  Matrix dz = std::move(d_out);
  for (std::size_t l = backbone.depth(); l-- > 0;) {
    const auto& layer = backbone.layers()[l];
    const auto& z = cache.pre_activations[l];
    const auto& h = cache.outputs[l];
    for (std::size_t i = 0; i < dz.size(); ++i) {
      dz.values()[i] *= activate_grad(layer.activation, z.values()[i], h.values()[i]);
    }
    const Matrix dw = matmul(dz, transpose(cache.inputs[l]));
    visit(l, dw, dz);
    if (l > 0) dz = matmul(transpose(cache.weights[l]), dz);
  }
}

Matrix row_sums(const Matrix& m) {
  Matrix out(m.rows(), 1);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c);
    out(r, 0) = static_cast<float>(acc);
  }
  return out;
}

}  // namespace

ForwardResult forward(const LoraModel& model, const Matrix& inputs) {
  return forward_impl(*model.backbone, &model.adapters, inputs);
}

Matrix predict(const LoraModel& model, const Matrix& inputs) {
  return forward(model, inputs).outputs;
}

double loss_value(const Matrix& outputs, const Matrix& targets, LossKind kind) {
  return loss_with_grad(outputs, targets, kind, nullptr);
}

AdapterGradients loss_and_backward(const LoraModel& model, const Matrix& inputs,
                                   const Matrix& targets, LossKind kind) {
  const auto fwd = forward(model, inputs);
  Matrix d_out;
  AdapterGradients result;
  result.loss = loss_with_grad(fwd.outputs, targets, kind, &d_out);

  std::vector<std::size_t> slot(model.backbone->depth(), model.adapters.size());
  for (std::size_t i = 0; i < model.adapters.size(); ++i) slot[model.adapters[i].layer] = i;
  result.grads.resize(model.adapters.size());

  backward_impl(*model.backbone, fwd.cache, std::move(d_out),
                [&](std::size_t l, const Matrix& dw, const Matrix&) {
                  if (slot[l] == model.adapters.size()) return;
                  const auto& ad = model.adapters[slot[l]];
                  auto& g = result.grads[slot[l]];
                  g.layer = l;
                  g.b = matmul(dw, transpose(ad.a));
                  g.a = matmul(transpose(ad.b), dw);
                });
  return result;
}

AdapterSet sgd_step(const AdapterSet& adapters, const AdapterGradients& grads, float lr) {
  if (adapters.size() != grads.grads.size()) throw ShapeError("gradient set does not match adapters");
  AdapterSet out;
  out.reserve(adapters.size());
  for (std::size_t i = 0; i < adapters.size(); ++i) {
    const auto& ad = adapters[i];
    const auto& g = grads.grads[i];
    if (g.layer != ad.layer) throw ShapeError("gradient layer order does not match adapters");
    out.push_back({ad.layer, add_scaled(ad.b, g.b, -lr), add_scaled(ad.a, g.a, -lr)});
  }
  return out;
}

BackboneGradients backbone_gradients(const Backbone& backbone, const Matrix& inputs,
                                     const Matrix& targets, LossKind kind) {
  const auto fwd = forward_impl(backbone, nullptr, inputs);
  Matrix d_out;
  BackboneGradients result;
  result.loss = loss_with_grad(fwd.outputs, targets, kind, &d_out);
  result.weight.resize(backbone.depth());
  result.bias.resize(backbone.depth());
  backward_impl(backbone, fwd.cache, std::move(d_out),
                [&](std::size_t l, const Matrix& dw, const Matrix& dz) {
                  result.weight[l] = dw;
                  result.bias[l] = row_sums(dz);
                });
  return result;
}

Matrix gather_columns(const Matrix& m, const std::vector<std::size_t>& index, std::size_t begin,
                      std::size_t end) {
  Matrix out(m.rows(), end - begin);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t j = begin; j < end; ++j) out(r, j - begin) = m(r, index[j]);
  }
  return out;
}

Backbone pretrain_backbone(Backbone init, const Matrix& features, const Matrix& targets,
                           LossKind kind, const PretrainConfig& cfg, RandomSource& rng) {
  if (features.cols() != targets.cols()) throw ShapeError("feature and target counts differ");
  if (cfg.batch_size == 0) throw ValueError("pretrain batch size must be positive");
  std::vector<Layer> layers = init.layers();
  std::vector<std::size_t> order(features.cols());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const Backbone current(layers);
      const auto g = backbone_gradients(current, gather_columns(features, order, begin, end),
                                        gather_columns(targets, order, begin, end), kind);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight = add_scaled(layers[l].weight, g.weight[l], -cfg.learning_rate);
        layers[l].bias = add_scaled(layers[l].bias, g.bias[l], -cfg.learning_rate);
      }
    }
  }
  return Backbone(std::move(layers));
}

}  // namespace proxyfl
