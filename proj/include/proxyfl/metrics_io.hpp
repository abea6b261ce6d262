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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "proxyfl/evaluation.hpp"

namespace proxyfl {

// Column order of metrics.csv.
inline constexpr std::string_view kMetricsCsvHeader =
    "round,global_val_loss,proxy_val_loss,global_test_loss,proxy_test_loss,"
    "global_test_acc,proxy_test_acc,broadcast_bytes,upload_bytes,participants";

/// One row per round. Reals use the shortest representation that parses back
/// to the same binary64; missing accuracies are empty fields; participants
/// are semicolon-joined.
std::string metrics_csv(std::span<const RoundMetrics> history);

/// Inverse of metrics_csv. Throws FormatError on a malformed document.
std::vector<RoundMetrics> parse_metrics_csv(std::string_view text);

nlohmann::json to_json(const PrivacyGapReport& report);
nlohmann::json to_json(const CommunicationStats& stats);

std::string format_real(double v);

}  // namespace proxyfl
