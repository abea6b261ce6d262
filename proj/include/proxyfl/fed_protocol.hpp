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
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "proxyfl/data_synth.hpp"
#include "proxyfl/evaluation.hpp"
#include "proxyfl/lora_model.hpp"
#include "proxyfl/quantizer.hpp"
#include "proxyfl/random.hpp"
#include "proxyfl/wire_format.hpp"

namespace proxyfl {

// Quantization off (bits unset) sends raw FLPF matrices instead of FLPQ.
struct QuantizerSettings {
  std::optional<int> bits = 2;
  std::size_t block_size = kDefaultBlockSize;

  std::optional<StandardNumberSet> codebook() const;
  std::string label() const;  // "w=2" or "off"
};

enum class ScenarioMode { kCrossSilo, kCrossDevice };

struct ScenarioConfig {
  ScenarioMode mode = ScenarioMode::kCrossSilo;
  std::size_t clients = 5;       // N
  std::size_t participants = 5;  // C

  void validate() const;
};

// How aggregation weights are normalized when only C of N clients respond.
enum class Weighting {
  kParticipants,  // n_i / sum of participating n_j
  kPopulation,    // n_i / n over all N clients, absent clients contribute zero
};

struct RoundConfig {
  std::size_t rounds = 100;
  std::size_t local_epochs = 3;
  std::size_t batch_size = 16;
  float learning_rate = 3e-4f;
  LossKind loss = LossKind::kMse;
  Weighting weighting = Weighting::kParticipants;
  std::size_t threads = 1;
  // Rounds at which proxy/global gradient cosine similarity is recorded.
  std::set<std::size_t> alignment_rounds;

  void validate() const;
};

struct ModelConfig {
  std::vector<std::size_t> hidden = {32, 32};
  Activation activation = Activation::kTanh;
  std::size_t rank = 4;
  double init_stddev = 0.02;
  std::vector<std::size_t> adapted_layers;  // empty means every layer
  PretrainConfig pretrain;
};

struct ExperimentConfig {
  TaskSpec task;
  ScenarioConfig scenario;
  RoundConfig round;
  QuantizerSettings quantizer;
  ModelConfig model;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  void validate() const;
};

struct ServerState {
  std::size_t round = 0;
  AdapterSet global;
  std::optional<StandardNumberSet> codebook;
  std::size_t block_size = kDefaultBlockSize;
  std::vector<RoundMetrics> history;
};

// Serialized adapter pair for one layer, exactly as sent on the wire.
struct LayerPayload {
  std::size_t layer = 0;
  Bytes b;
  Bytes a;
};

struct Broadcast {
  std::vector<LayerPayload> layers;

  std::size_t bytes() const;
};

/// Serializes every global B and A independently: FLPQ when a codebook is
/// set, FLPF otherwise. The server's adapters are not modified.
Broadcast broadcast(const ServerState& server);

/// What a client reconstructs from a broadcast.
AdapterSet decode_broadcast(const Broadcast& payload);

struct ClientUpdate {
  std::size_t client_id = 0;
  std::size_t sample_count = 0;
  AdapterSet deltas;  // trained - proxy, per matrix
};

struct ClientOutcome {
  std::size_t client_id = 0;
  std::optional<ClientUpdate> update;
  std::string failure;  // set when update is empty
};

/// E epochs of minibatch SGD from the proxies. Batches follow a seeded
/// shuffle per epoch; a batch that covers the whole shard is used in order.
ClientOutcome client_round(std::size_t client_id, const Dataset& shard,
                           const AdapterSet& proxies, std::shared_ptr<const Backbone> backbone,
                           const RoundConfig& cfg, RandomSource rng);

std::size_t upload_bytes(const ClientUpdate& update);

/// Uniform sample of C ids out of N without replacement, ascending. The draw
/// depends only on (run stream, round).
std::vector<std::size_t> sample_clients(std::size_t clients, std::size_t participants,
                                        std::size_t round, const RandomSource& run_rng);

/// Weight per update, in ascending client-id order.
std::vector<double> aggregation_weights(const std::vector<ClientUpdate>& updates,
                                        Weighting weighting, std::size_t population_samples);

/// X <- X + sum_i w_i dX_i, accumulated in ascending client-id order; the
/// round counter always advances. An empty update list leaves X unchanged.
ServerState aggregate(const ServerState& server, std::vector<ClientUpdate> updates,
                      Weighting weighting = Weighting::kParticipants,
                      std::size_t population_samples = 0);

/// Everything a run needs besides the server: frozen backbone, target task,
/// client shards.
struct Environment {
  std::shared_ptr<const Backbone> backbone;
  TaskData task;
  Partition partition;
  AdapterSet initial_adapters;
  std::uint64_t seed = 0;
};

/// Pretrains the backbone on the source domain, generates the target task,
/// partitions its training split and initializes the adapters.
Environment prepare_environment(const ExperimentConfig& cfg, std::uint64_t seed);

ServerState initial_server(const Environment& env, const QuantizerSettings& quantizer);

struct RoundOutcome {
  ServerState server;
  Broadcast sent;
  std::vector<std::size_t> participants;
  std::size_t upload_bytes = 0;
  std::vector<std::string> events;
  std::optional<double> gradient_alignment;
};

/// broadcast -> sample -> client rounds -> aggregate. Metrics are not filled.
RoundOutcome run_round(const ServerState& server, const Environment& env,
                       const ScenarioConfig& scenario, const RoundConfig& cfg);

/// Mean over `participants` of cos(grad at proxies, grad at global), with
/// each gradient taken over the client's full shard.
double proxy_gradient_alignment(const Environment& env, const AdapterSet& global,
                                const AdapterSet& proxies,
                                const std::vector<std::size_t>& participants, LossKind loss);

struct TrainingResult {
  std::vector<RoundMetrics> history;
  AdapterSet final_global;
  AdapterSet best_global;
  Broadcast best_proxy;
  std::size_t best_global_round = 0;
  std::size_t best_proxy_round = 0;
  std::map<std::size_t, double> gradient_alignment;
  // Parsed cost of each round's broadcast.
  std::vector<CommunicationStats> communication;
  std::vector<std::string> events;
};

/// Full run. After each round the new global adapters and their quantized
/// proxy (the payload the next round would broadcast) are both evaluated on
/// the validation and test splits.
TrainingResult run_training(const ExperimentConfig& cfg, std::uint64_t seed);
TrainingResult run_training(const ExperimentConfig& cfg, const Environment& env);

}  // namespace proxyfl
