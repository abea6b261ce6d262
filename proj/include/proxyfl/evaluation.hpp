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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proxyfl/data_synth.hpp"
#include "proxyfl/lora_model.hpp"
#include "proxyfl/wire_format.hpp"

namespace proxyfl {

struct RoundMetrics {
  std::size_t round = 0;
  double global_val_loss = 0.0;
  double proxy_val_loss = 0.0;
  double global_test_loss = 0.0;
  double proxy_test_loss = 0.0;
  std::optional<double> global_test_acc;  // classification only
  std::optional<double> proxy_test_acc;
  std::size_t broadcast_bytes = 0;
  std::size_t upload_bytes = 0;
  std::vector<std::size_t> participants;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

struct EvalResult {
  double loss = 0.0;
  std::optional<double> accuracy;
};

/// Mean loss over the whole dataset; argmax accuracy for cross-entropy.
EvalResult evaluate(const LoraModel& model, const Dataset& ds, LossKind kind);

// Fraction of columns where argmax(outputs) == argmax(targets).
double argmax_accuracy(const Matrix& outputs, const Matrix& targets);

enum class ModelView { kGlobal, kProxy };

/// Round with the lowest validation loss for the chosen model; the earliest
/// round wins ties.
std::size_t select_best(std::span<const RoundMetrics> history, ModelView which);

struct ModelSummary {
  std::size_t round = 0;
  double val_loss = 0.0;
  double test_loss = 0.0;
  std::optional<double> test_acc;
};

// One tracked metric. gap > 0 means the global model is better
// (lower loss, higher accuracy).
struct MetricGap {
  std::string metric;
  double global = 0.0;
  double proxy = 0.0;
  double gap = 0.0;
};

struct SeedGap {
  std::uint64_t seed = 0;
  ModelSummary global;
  ModelSummary proxy;
  std::vector<MetricGap> gaps;
  bool model_privacy = false;
};

struct PrivacyGapReport {
  std::string label;  // e.g. "w=2" or "off"
  std::vector<SeedGap> seeds;
  // Medians across seeds of the per-seed best values and gaps.
  std::vector<MetricGap> medians;
  std::size_t seeds_with_privacy = 0;
  // True iff the median gap is strictly positive on every tracked metric.
  bool model_privacy_achieved = false;
};

struct SeedHistory {
  std::uint64_t seed = 0;
  std::vector<RoundMetrics> history;
};

/// Best global and best proxy rounds are selected independently per seed.
PrivacyGapReport privacy_gap_report(std::span<const SeedHistory> runs, std::string label = {});

double median(std::vector<double> values);

struct CommunicationStats {
  std::size_t payload_bytes = 0;  // total bytes on the wire
  std::size_t data_bytes = 0;     // scales + codes (FLPQ) or values (FLPF)
  std::size_t elements = 0;
  // 32 * elements / (8 * data_bytes).
  double reduction_factor = 1.0;
};

/// Parses every payload (FormatError if malformed) and totals its cost.
CommunicationStats communication_accounting(std::span<const Bytes> payloads);
CommunicationStats& operator+=(CommunicationStats& a, const CommunicationStats& b);

}  // namespace proxyfl
