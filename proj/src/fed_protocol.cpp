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

#include "proxyfl/fed_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "proxyfl/errors.hpp"

namespace proxyfl {

std::optional<StandardNumberSet> QuantizerSettings::codebook() const {
  if (!bits) return std::nullopt;
  return build_standard_set(*bits);
}

std::string QuantizerSettings::label() const {
  return bits ? "w=" + std::to_string(*bits) : std::string("off");
}

void ScenarioConfig::validate() const {
  if (clients == 0) throw ConfigError("scenario needs at least one client");
  if (participants == 0 || participants > clients) {
    throw ConfigError("participants must be in [1, clients], got " +
                      std::to_string(participants) + " of " + std::to_string(clients));
  }
  if (mode == ScenarioMode::kCrossSilo && participants != clients) {
    throw ConfigError("cross-silo scenario requires participants == clients");
  }
}

void RoundConfig::validate() const {
  if (rounds == 0) throw ConfigError("rounds must be >= 1");
  if (local_epochs == 0) throw ConfigError("local epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate >= 0.0f) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (threads == 0) throw ConfigError("threads must be >= 1");
}

void ExperimentConfig::validate() const {
  try {
    task.validate();
  } catch (const ValueError& e) {
    throw ConfigError(e.what());
  }
  scenario.validate();
  round.validate();
  if (quantizer.bits && (*quantizer.bits < 1 || *quantizer.bits > 8)) {
    throw ConfigError("quantizer bits must be in [1, 8] or off");
  }
  if (quantizer.block_size == 0) throw ConfigError("block size must be >= 1");
  if (model.rank == 0) throw ConfigError("rank must be >= 1");
  if (!(model.init_stddev >= 0.0)) throw ConfigError("init stddev must be >= 0");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (task.train_count < scenario.clients) {
    throw ConfigError("fewer training samples than clients");
  }
}

std::size_t Broadcast::bytes() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.b.size() + l.a.size();
  return total;
}

namespace {

Bytes encode(const Matrix& m, const ServerState& server) {
  if (server.codebook) return serialize(quantize(m, *server.codebook, server.block_size));
  return serialize(m);
}

void check_layout(const AdapterSet& x, const AdapterSet& delta) {
  if (x.size() != delta.size()) throw ShapeError("update has a different adapter count");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].layer != delta[i].layer || !x[i].b.same_shape(delta[i].b) ||
        !x[i].a.same_shape(delta[i].a)) {
      throw ShapeError("update shape does not match adapter for layer " +
                       std::to_string(x[i].layer));
    }
  }
}

std::vector<double> flatten(const AdapterSet& set) {
  std::vector<double> out;
  for (const auto& ad : set) {
    out.insert(out.end(), ad.b.values().begin(), ad.b.values().end());
    out.insert(out.end(), ad.a.values().begin(), ad.a.values().end());
  }
  return out;
}

double cosine(const std::vector<double>& x, const std::vector<double>& y) {
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) return 0.0;
  return xy / std::sqrt(xx * yy);
}

}  // namespace

Broadcast broadcast(const ServerState& server) {
  Broadcast out;
  for (const auto& ad : server.global) {
    out.layers.push_back({ad.layer, encode(ad.b, server), encode(ad.a, server)});
  }
  return out;
}

AdapterSet decode_broadcast(const Broadcast& payload) {
  AdapterSet set;
  for (const auto& l : payload.layers) {
    set.push_back({l.layer, decode_matrix(l.b), decode_matrix(l.a)});
  }
  return set;
}

ClientOutcome client_round(std::size_t client_id, const Dataset& shard,
                           const AdapterSet& proxies, std::shared_ptr<const Backbone> backbone,
                           const RoundConfig& cfg, RandomSource rng) {
  if (shard.count() == 0) throw ValueError("client shard is empty");
  ClientOutcome outcome;
  outcome.client_id = client_id;

  LoraModel model{std::move(backbone), proxies};
  const std::size_t n = shard.count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const bool full_batch = cfg.batch_size >= n;
  try {
    for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
      if (!full_batch) rng.shuffle(order);
      for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
        const std::size_t end = std::min(n, begin + cfg.batch_size);
        const auto grads =
            full_batch ? loss_and_backward(model, shard.features, shard.targets, cfg.loss)
                       : loss_and_backward(model, gather_columns(shard.features, order, begin, end),
                                           gather_columns(shard.targets, order, begin, end),
                                           cfg.loss);
        model.adapters = sgd_step(model.adapters, grads, cfg.learning_rate);
      }
    }
    validate_adapters(*model.backbone, model.adapters);
  } catch (const std::invalid_argument& e) {
    outcome.failure = e.what();
    return outcome;
  }

  ClientUpdate update{client_id, n, {}};
  for (std::size_t i = 0; i < proxies.size(); ++i) {
    update.deltas.push_back({proxies[i].layer, add_scaled(model.adapters[i].b, proxies[i].b, -1.0f),
                             add_scaled(model.adapters[i].a, proxies[i].a, -1.0f)});
  }
  outcome.update = std::move(update);
  return outcome;
}

std::size_t upload_bytes(const ClientUpdate& update) {
  std::size_t total = 0;
  for (const auto& d : update.deltas) {
    total += full_precision_payload_bytes(d.b.rows(), d.b.cols()) +
             full_precision_payload_bytes(d.a.rows(), d.a.cols());
  }
  return total;
}

std::vector<std::size_t> sample_clients(std::size_t clients, std::size_t participants,
                                        std::size_t round, const RandomSource& run_rng) {
  if (participants == 0 || participants > clients) {
    throw ValueError("cannot sample " + std::to_string(participants) + " of " +
                     std::to_string(clients) + " clients");
  }
  std::vector<std::size_t> ids(clients);
  std::iota(ids.begin(), ids.end(), 0);
  if (participants == clients) return ids;
  auto rng = run_rng.derive("sample-round-" + std::to_string(round));
  for (std::size_t i = 0; i < participants; ++i) {
    const std::size_t j = i + rng.uniform_index(clients - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(participants);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<double> aggregation_weights(const std::vector<ClientUpdate>& updates,
                                        Weighting weighting, std::size_t population_samples) {
  std::size_t participating = 0;
  for (const auto& u : updates) {
    if (u.sample_count == 0) throw ValueError("client update with zero samples");
    participating += u.sample_count;
  }
  const std::size_t denominator =
      weighting == Weighting::kParticipants ? participating : population_samples;
  if (denominator < participating) {
    throw ValueError("population sample count is smaller than the participants' total");
  }
  std::vector<double> w;
  for (const auto& u : updates) {
    w.push_back(static_cast<double>(u.sample_count) / static_cast<double>(denominator));
  }
  return w;
}

ServerState aggregate(const ServerState& server, std::vector<ClientUpdate> updates,
                      Weighting weighting, std::size_t population_samples) {
  ServerState next = server;
  next.round = server.round + 1;
  if (updates.empty()) return next;

  std::sort(updates.begin(), updates.end(),
            [](const auto& x, const auto& y) { return x.client_id < y.client_id; });
  for (std::size_t i = 1; i < updates.size(); ++i) {
    if (updates[i].client_id == updates[i - 1].client_id) {
      throw ValueError("duplicate update from client " + std::to_string(updates[i].client_id));
    }
  }
  for (const auto& u : updates) check_layout(server.global, u.deltas);

  const auto weights = aggregation_weights(updates, weighting, population_samples);
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const float w = static_cast<float>(weights[k]);
    for (std::size_t i = 0; i < next.global.size(); ++i) {
      next.global[i].b = add_scaled(next.global[i].b, updates[k].deltas[i].b, w);
      next.global[i].a = add_scaled(next.global[i].a, updates[k].deltas[i].a, w);
    }
  }
  return next;
}

Environment prepare_environment(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Environment env;
  env.seed = seed;
  TaskSpec spec = cfg.task;
  spec.seed = seed;

  const RandomSource root(seed, "environment");
  std::vector<std::size_t> widths = {spec.input_dim};
  widths.insert(widths.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
  widths.push_back(spec.output_dim);
  auto init_rng = root.derive("backbone-init");
  auto pretrain_rng = root.derive("pretrain");
  const TaskData source = generate_task(spec, TaskDomain::kSource);
  env.backbone = std::make_shared<const Backbone>(pretrain_backbone(
      make_backbone(widths, cfg.model.activation, init_rng), source.train.features,
      source.train.targets, cfg.round.loss, cfg.model.pretrain, pretrain_rng));

  env.task = generate_task(spec, TaskDomain::kTarget);
  auto partition_rng = root.derive("partition");
  env.partition =
      partition_dirichlet(env.task.train, cfg.scenario.clients, spec.alpha, partition_rng);

  std::vector<std::size_t> layers = cfg.model.adapted_layers;
  if (layers.empty()) {
    layers.resize(env.backbone->depth());
    std::iota(layers.begin(), layers.end(), 0);
  }
  auto adapter_rng = root.derive("adapter-init");
  env.initial_adapters =
      init_adapters(*env.backbone, layers, cfg.model.rank, cfg.model.init_stddev, adapter_rng);
  return env;
}

ServerState initial_server(const Environment& env, const QuantizerSettings& quantizer) {
  ServerState s;
  s.global = env.initial_adapters;
  s.codebook = quantizer.codebook();
  s.block_size = quantizer.block_size;
  return s;
}

double proxy_gradient_alignment(const Environment& env, const AdapterSet& global,
                                const AdapterSet& proxies,
                                const std::vector<std::size_t>& participants, LossKind loss) {
  if (participants.empty()) throw ValueError("alignment needs at least one participant");
  double total = 0.0;
  for (auto id : participants) {
    const auto& shard = env.partition.shards.at(id);
    const auto at_proxy =
        loss_and_backward({env.backbone, proxies}, shard.features, shard.targets, loss);
    const auto at_global =
        loss_and_backward({env.backbone, global}, shard.features, shard.targets, loss);
    total += cosine(flatten(at_proxy.grads), flatten(at_global.grads));
  }
  return total / static_cast<double>(participants.size());
}

RoundOutcome run_round(const ServerState& server, const Environment& env,
                       const ScenarioConfig& scenario, const RoundConfig& cfg) {
  RoundOutcome out;
  out.sent = broadcast(server);
  const AdapterSet proxies = decode_broadcast(out.sent);

  const RandomSource run_rng(env.seed, "run");
  out.participants = sample_clients(scenario.clients, scenario.participants, server.round, run_rng);
  const auto client_root = run_rng.derive("round-" + std::to_string(server.round));

  std::vector<ClientOutcome> results(out.participants.size());
  auto work = [&](std::size_t slot) {
    const std::size_t id = out.participants[slot];
    results[slot] = client_round(id, env.partition.shards.at(id), proxies, env.backbone, cfg,
                                 client_root.derive("client-" + std::to_string(id)));
  };
  const std::size_t workers = std::min(cfg.threads, results.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < results.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < results.size(); i += workers) work(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<ClientUpdate> updates;
  for (auto& r : results) {
    if (r.update) {
      out.upload_bytes += upload_bytes(*r.update);
      updates.push_back(std::move(*r.update));
    } else {
      out.events.push_back("round " + std::to_string(server.round) + ": client " +
                           std::to_string(r.client_id) + " dropped: " + r.failure);
    }
  }
  if (updates.empty()) {
    out.events.push_back("round " + std::to_string(server.round) +
                         ": no client updates, aggregation skipped");
  }
  if (cfg.alignment_rounds.contains(server.round)) {
    out.gradient_alignment =
        proxy_gradient_alignment(env, server.global, proxies, out.participants, cfg.loss);
  }
  out.server = aggregate(server, std::move(updates), cfg.weighting, env.partition.total);
  return out;
}

TrainingResult run_training(const ExperimentConfig& cfg, std::uint64_t seed) {
  return run_training(cfg, prepare_environment(cfg, seed));
}

TrainingResult run_training(const ExperimentConfig& cfg, const Environment& env) {
  cfg.validate();
  TrainingResult result;
  ServerState server = initial_server(env, cfg.quantizer);
  double best_global = 0.0, best_proxy = 0.0;

  for (std::size_t t = 0; t < cfg.round.rounds; ++t) {
    auto outcome = run_round(server, env, cfg.scenario, cfg.round);
    server = std::move(outcome.server);
    result.events.insert(result.events.end(), outcome.events.begin(), outcome.events.end());
    if (outcome.gradient_alignment) result.gradient_alignment[t] = *outcome.gradient_alignment;

    Broadcast next = broadcast(server);
    const LoraModel global{env.backbone, server.global};
    const LoraModel proxy{env.backbone, decode_broadcast(next)};
    const auto gv = evaluate(global, env.task.validation, cfg.round.loss);
    const auto gt = evaluate(global, env.task.test, cfg.round.loss);
    const auto pv = evaluate(proxy, env.task.validation, cfg.round.loss);
    const auto pt = evaluate(proxy, env.task.test, cfg.round.loss);

    RoundMetrics m;
    m.round = t;
    m.global_val_loss = gv.loss;
    m.proxy_val_loss = pv.loss;
    m.global_test_loss = gt.loss;
    m.proxy_test_loss = pt.loss;
    m.global_test_acc = gt.accuracy;
    m.proxy_test_acc = pt.accuracy;
    m.broadcast_bytes = outcome.sent.bytes();
    std::vector<Bytes> payloads;
    for (const auto& l : outcome.sent.layers) {
      payloads.push_back(l.b);
      payloads.push_back(l.a);
    }
    result.communication.push_back(communication_accounting(payloads));
    m.upload_bytes = outcome.upload_bytes;
    m.participants = outcome.participants;

    if (t == 0 || m.global_val_loss < best_global) {
      best_global = m.global_val_loss;
      result.best_global = server.global;
      result.best_global_round = t;
    }
    if (t == 0 || m.proxy_val_loss < best_proxy) {
      best_proxy = m.proxy_val_loss;
      result.best_proxy = std::move(next);
      result.best_proxy_round = t;
    }
    server.history.push_back(m);
    result.history.push_back(std::move(m));
  }
  result.final_global = server.global;
  return result;
}

}  // namespace proxyfl
