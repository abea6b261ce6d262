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

#include <filesystem>

#include <json.hpp>

#include "proxyfl/fed_protocol.hpp"

namespace proxyfl {

/// Experiment configuration document:
///
///   {
///     "task":      {"kind", "input_dim", "output_dim", "train", "validation",
///                   "test", "noise_stddev", "alpha", "input_clusters",
///                   "teacher_hidden", "domain_shift", "cluster_separation"},
///     "scenario":  {"mode": "cross-silo" | "cross-device", "clients",
///                   "participants"},
///     "round":     {"rounds", "local_epochs", "batch_size", "learning_rate",
///                   "loss": "mse" | "softmax-cross-entropy",
///                   "weighting": "participants" | "population", "threads",
///                   "alignment_rounds": [..]},
///     "quantizer": {"bits": 1..8 | "off", "block_size"},
///     "model":     {"hidden": [..], "activation", "rank", "init_stddev",
///                   "adapted_layers": [..],
///                   "pretrain": {"epochs", "batch_size", "learning_rate"}},
///     "seeds":     [..]
///   }
///
/// Every key is optional and falls back to the defaults of the C++ structs.
/// Unknown keys and wrongly typed values raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace proxyfl
