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

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "proxyfl/matrix.hpp"
#include "proxyfl/random.hpp"

namespace proxyfl {

enum class Activation { kTanh, kRelu, kIdentity };
enum class LossKind { kMse, kSoftmaxCrossEntropy };

Activation parse_activation(std::string_view name);
LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(Activation a);
std::string_view to_string(LossKind k);

struct Layer {
  Matrix weight;  // d_out x d_in
  Matrix bias;    // d_out x 1
  Activation activation = Activation::kTanh;
};

/// Frozen stack of dense layers. Samples are columns: a layer maps a
/// d_in x m batch to d_out x m.
class Backbone {
 public:
  explicit Backbone(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t depth() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().weight.cols(); }
  std::size_t output_dim() const { return layers_.back().weight.rows(); }

  std::uint64_t checksum() const;

 private:
  std::vector<Layer> layers_;
};

/// Glorot-normal weights, zero bias. `widths` lists every layer width from the
/// input to the output; hidden layers use `hidden`, the last layer is identity.
Backbone make_backbone(const std::vector<std::size_t>& widths, Activation hidden,
                       RandomSource& rng);

/// Trainable low-rank pair for one backbone layer: W = W0 + B A.
struct LoraAdapter {
  std::size_t layer = 0;
  Matrix b;  // d_out x r
  Matrix a;  // r x d_in

  std::size_t rank() const { return a.rows(); }
  friend bool operator==(const LoraAdapter&, const LoraAdapter&) = default;
};

// Sorted by layer index, at most one adapter per layer.
using AdapterSet = std::vector<LoraAdapter>;

/// B = 0, A ~ Normal(0, init_stddev^2), one adapter for each listed layer.
AdapterSet init_adapters(const Backbone& backbone, const std::vector<std::size_t>& layers,
                         std::size_t rank, double init_stddev, RandomSource& rng);

// Throws ShapeError/ValueError if the set does not fit the backbone.
void validate_adapters(const Backbone& backbone, const AdapterSet& adapters);

/// W0 + B A. No scaling coefficient.
Matrix effective_weight(const Matrix& w0, const LoraAdapter& adapter);

struct LoraModel {
  std::shared_ptr<const Backbone> backbone;
  AdapterSet adapters;
};

struct ForwardCache {
  std::vector<Matrix> weights;          // effective weight per layer
  std::vector<Matrix> inputs;           // input to each layer
  std::vector<Matrix> pre_activations;  // W x + b per layer
  std::vector<Matrix> outputs;          // activation(pre) per layer
};

struct ForwardResult {
  Matrix outputs;
  ForwardCache cache;
};

ForwardResult forward(const LoraModel& model, const Matrix& inputs);
Matrix predict(const LoraModel& model, const Matrix& inputs);

/// Mean loss over the batch. MSE averages over every output element;
/// cross-entropy averages -sum(t * log softmax(y)) over samples.
double loss_value(const Matrix& outputs, const Matrix& targets, LossKind kind);

/// Gradients with the same layout as the adapter set, plus the batch loss.
struct AdapterGradients {
  AdapterSet grads;
  double loss = 0.0;
};

AdapterGradients loss_and_backward(const LoraModel& model, const Matrix& inputs,
                                   const Matrix& targets, LossKind kind);

/// B <- B - lr dB, A <- A - lr dA.
AdapterSet sgd_step(const AdapterSet& adapters, const AdapterGradients& grads, float lr);

// ---------------------------------------------------------------------------
// Full-parameter training, used only to produce the frozen backbone.

struct BackboneGradients {
  std::vector<Matrix> weight;
  std::vector<Matrix> bias;
  double loss = 0.0;
};

BackboneGradients backbone_gradients(const Backbone& backbone, const Matrix& inputs,
                                     const Matrix& targets, LossKind kind);

struct PretrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  float learning_rate = 0.05f;
};

Backbone pretrain_backbone(Backbone init, const Matrix& features, const Matrix& targets,
                           LossKind kind, const PretrainConfig& cfg, RandomSource& rng);

// Columns `index[begin..end)` of m, in that order.
Matrix gather_columns(const Matrix& m, const std::vector<std::size_t>& index, std::size_t begin,
                      std::size_t end);

}  // namespace proxyfl
