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

#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace proxyfl::reference {

BruteQuantized brute_quantize(const std::vector<float>& values, const std::vector<float>& codebook,
                              std::size_t block_size) {
  BruteQuantized out;
  out.codes.resize(values.size());
  out.reconstruction.resize(values.size());
  std::size_t zero = 0;
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    if (codebook[k] == 0.0f) zero = k;
  }
  for (std::size_t begin = 0; begin < values.size(); begin += block_size) {
    const std::size_t end = std::min(values.size(), begin + block_size);
    float z = 0.0f;
    for (std::size_t i = begin; i < end; ++i) z = std::max(z, std::fabs(values[i]));
    out.scales.push_back(z);
    for (std::size_t i = begin; i < end; ++i) {
      std::size_t best = zero;
      if (z != 0.0f) {
        const float x = values[i] / z;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < codebook.size(); ++k) {
          const double d = std::fabs(static_cast<double>(x) - static_cast<double>(codebook[k]));
          const bool closer = d < best_d;
          const bool tie_smaller =
              d == best_d && std::fabs(codebook[k]) < std::fabs(codebook[best]);
          if (closer || tie_smaller) {
            best = k;
            best_d = d;
          }
        }
      }
      out.codes[i] = static_cast<std::uint16_t>(best);
      out.reconstruction[i] = z * codebook[best];
    }
  }
  return out;
}

std::vector<float> tabulated_codebook(int bits) {
  switch (bits) {
    case 1:
      return {-1.0f, 0.0f, 1.0f};
    case 2:
      return {-1.0f, 0.0f, 0.33f, 1.0f};
    case 3:
      return {-1.0f, -0.47f, -0.21f, 0.0f, 0.16f, 0.33f, 0.56f, 1.0f};
    default:
      throw std::invalid_argument("no tabulated codebook for bits=" + std::to_string(bits));
  }
}

Grid to_grid(const Matrix& m) {
  Grid g(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  }
  return g;
}

RefModel to_reference(const LoraModel& model) {
  RefModel ref;
  for (const auto& layer : model.backbone->layers()) {
    RefLayer l;
    l.w0 = to_grid(layer.weight);
    for (std::size_t r = 0; r < layer.bias.rows(); ++r) l.bias.push_back(layer.bias(r, 0));
    l.activation = layer.activation;
    ref.layers.push_back(std::move(l));
  }
  for (const auto& ad : model.adapters) {
    auto& l = ref.layers.at(ad.layer);
    l.adapted = true;
    l.b = to_grid(ad.b);
    l.a = to_grid(ad.a);
  }
  return ref;
}

namespace {

std::size_t rows(const Grid& g) { return g.size(); }
std::size_t cols(const Grid& g) { return g.empty() ? 0 : g[0].size(); }

Grid product(const Grid& x, const Grid& y) {
  Grid out(rows(x), std::vector<double>(cols(y), 0.0));
  for (std::size_t i = 0; i < rows(x); ++i) {
    for (std::size_t k = 0; k < cols(x); ++k) {
      for (std::size_t j = 0; j < cols(y); ++j) out[i][j] += x[i][k] * y[k][j];
    }
  }
  return out;
}

Grid transposed(const Grid& x) {
  Grid out(cols(x), std::vector<double>(rows(x)));
  for (std::size_t i = 0; i < rows(x); ++i) {
    for (std::size_t j = 0; j < cols(x); ++j) out[j][i] = x[i][j];
  }
  return out;
}

Grid weight_of(const RefLayer& l) {
  Grid w = l.w0;
  if (l.adapted) {
    const Grid ba = product(l.b, l.a);
    for (std::size_t i = 0; i < rows(w); ++i) {
      for (std::size_t j = 0; j < cols(w); ++j) w[i][j] += ba[i][j];
    }
  }
  return w;
}

double act(Activation a, double z) {
  switch (a) {
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kIdentity:
      return z;
  }
  return z;
}

double act_slope(Activation a, double z) {
  switch (a) {
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kIdentity:
      return 1.0;
  }
  return 1.0;
}

struct Trace {
  std::vector<Grid> inputs;
  std::vector<Grid> pre;
  std::vector<Grid> weights;
  Grid output;
};

Trace run_forward(const RefModel& model, const Grid& x) {
  Trace t;
  Grid h = x;
  for (const auto& l : model.layers) {
    t.inputs.push_back(h);
    t.weights.push_back(weight_of(l));
    Grid z = product(t.weights.back(), h);
    for (std::size_t i = 0; i < rows(z); ++i) {
      for (auto& v : z[i]) v += l.bias[i];
    }
    t.pre.push_back(z);
    for (auto& row : z) {
      for (auto& v : row) v = act(l.activation, v);
    }
    h = std::move(z);
  }
  t.output = std::move(h);
  return t;
}

// Loss and its gradient with respect to the network output.
double loss_and_slope(const Grid& y, const Grid& t, LossKind kind, Grid* slope) {
  const std::size_t k = rows(y), m = cols(y);
  if (slope != nullptr) *slope = Grid(k, std::vector<double>(m, 0.0));
  double loss = 0.0;
  if (kind == LossKind::kMse) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double d = y[i][j] - t[i][j];
        loss += d * d;
        if (slope != nullptr) (*slope)[i][j] = 2.0 * d / static_cast<double>(k * m);
      }
    }
    return loss / static_cast<double>(k * m);
  }
  for (std::size_t j = 0; j < m; ++j) {
    double top = y[0][j];
    for (std::size_t i = 1; i < k; ++i) top = std::max(top, y[i][j]);
    double total = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      total += std::exp(y[i][j] - top);
      mass += t[i][j];
    }
    for (std::size_t i = 0; i < k; ++i) {
      const double log_p = y[i][j] - top - std::log(total);
      loss -= t[i][j] * log_p;
      if (slope != nullptr) {
        (*slope)[i][j] = (std::exp(log_p) * mass - t[i][j]) / static_cast<double>(m);
      }
    }
  }
  return loss / static_cast<double>(m);
}

}  // namespace

double ref_loss(const RefModel& model, const Grid& inputs, const Grid& targets, LossKind kind) {
  return loss_and_slope(run_forward(model, inputs).output, targets, kind, nullptr);
}

RefGradients ref_backward(const RefModel& model, const Grid& inputs, const Grid& targets,
                          LossKind kind) {
  const Trace t = run_forward(model, inputs);
  Grid dh;
  loss_and_slope(t.output, targets, kind, &dh);
  std::vector<Grid> db(model.layers.size()), da(model.layers.size());
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const auto& l = model.layers[li];
    Grid dz = dh;
    for (std::size_t i = 0; i < rows(dz); ++i) {
      for (std::size_t j = 0; j < cols(dz); ++j) dz[i][j] *= act_slope(l.activation, t.pre[li][i][j]);
    }
    const Grid dw = product(dz, transposed(t.inputs[li]));
    if (l.adapted) {
      db[li] = product(dw, transposed(l.a));
      da[li] = product(transposed(l.b), dw);
    }
    dh = product(transposed(t.weights[li]), dz);
  }
  RefGradients out;
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    if (!model.layers[li].adapted) continue;
    out.db.push_back(std::move(db[li]));
    out.da.push_back(std::move(da[li]));
  }
  return out;
}

RefGradients ref_finite_difference(const RefModel& model, const Grid& inputs, const Grid& targets,
                                   LossKind kind, double eps) {
  RefModel probe = model;
  auto central = [&](double& slot) {
    const double keep = slot;
    slot = keep + eps;
    const double up = ref_loss(probe, inputs, targets, kind);
    slot = keep - eps;
    const double down = ref_loss(probe, inputs, targets, kind);
    slot = keep;
    return (up - down) / (2.0 * eps);
  };
  RefGradients out;
  for (auto& l : probe.layers) {
    if (!l.adapted) continue;
    Grid gb = l.b, ga = l.a;
    for (std::size_t i = 0; i < rows(l.b); ++i) {
      for (std::size_t j = 0; j < cols(l.b); ++j) gb[i][j] = central(l.b[i][j]);
    }
    for (std::size_t i = 0; i < rows(l.a); ++i) {
      for (std::size_t j = 0; j < cols(l.a); ++j) ga[i][j] = central(l.a[i][j]);
    }
    out.db.push_back(std::move(gb));
    out.da.push_back(std::move(ga));
  }
  return out;
}

AdapterSet centralized_sgd(const LoraModel& start, const Dataset& data, std::size_t batch_size,
                           float learning_rate, std::size_t steps, LossKind kind,
                           RandomSource rng) {
  LoraModel model = start;
  const std::size_t n = data.count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;
  for (std::size_t step = 0; step < steps; ++step) {
    if (cursor >= n) {
      rng.shuffle(order);
      cursor = 0;
    }
    const std::size_t end = std::min(n, cursor + batch_size);
    const auto g = loss_and_backward(model, gather_columns(data.features, order, cursor, end),
                                     gather_columns(data.targets, order, cursor, end), kind);
    model.adapters = sgd_step(model.adapters, g, learning_rate);
    cursor = end;
  }
  return model.adapters;
}

AdapterSet fedavg_lora(const LoraModel& start, const std::vector<Dataset>& shards,
                       std::uint64_t seed, std::size_t rounds, std::size_t epochs,
                       std::size_t batch_size, float learning_rate, LossKind kind) {
  AdapterSet global = start.adapters;
  std::size_t total = 0;
  for (const auto& s : shards) total += s.count();
  const RandomSource run(seed, "run");
  for (std::size_t t = 0; t < rounds; ++t) {
    const auto round_rng = run.derive("round-" + std::to_string(t));
    AdapterSet next = global;
    for (std::size_t id = 0; id < shards.size(); ++id) {
      auto rng = round_rng.derive("client-" + std::to_string(id));
      const Dataset& shard = shards[id];
      const std::size_t n = shard.count();
      LoraModel local{start.backbone, global};
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t e = 0; e < epochs; ++e) {
        if (batch_size < n) rng.shuffle(order);
        for (std::size_t b = 0; b < n; b += batch_size) {
          const std::size_t end = std::min(n, b + batch_size);
          const auto g = loss_and_backward(local, gather_columns(shard.features, order, b, end),
                                           gather_columns(shard.targets, order, b, end), kind);
          local.adapters = sgd_step(local.adapters, g, learning_rate);
        }
      }
      const float w = static_cast<float>(static_cast<double>(n) / static_cast<double>(total));
      for (std::size_t k = 0; k < global.size(); ++k) {
        auto fold = [&](Matrix& acc, const Matrix& trained, const Matrix& from) {
          for (std::size_t i = 0; i < acc.size(); ++i) {
            const float delta = trained.values()[i] - from.values()[i];
            acc.values()[i] = acc.values()[i] + w * delta;
          }
        };
        fold(next[k].b, local.adapters[k].b, global[k].b);
        fold(next[k].a, local.adapters[k].a, global[k].a);
      }
    }
    global = std::move(next);
  }
  return global;
}

}  // namespace proxyfl::reference
