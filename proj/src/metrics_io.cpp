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

#include "proxyfl/metrics_io.hpp"

#include <charconv>
#include <sstream>

#include "proxyfl/errors.hpp"

namespace proxyfl {

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format real");
  return std::string(buf, end);
}

std::string metrics_csv(std::span<const RoundMetrics> history) {
  std::string out(kMetricsCsvHeader);
  out += '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& m : history) {
    out += std::to_string(m.round) + ',' + format_real(m.global_val_loss) + ',' +
           format_real(m.proxy_val_loss) + ',' + format_real(m.global_test_loss) + ',' +
           format_real(m.proxy_test_loss) + ',' + opt(m.global_test_acc) + ',' +
           opt(m.proxy_test_acc) + ',' + std::to_string(m.broadcast_bytes) + ',' +
           std::to_string(m.upload_bytes) + ',';
    for (std::size_t i = 0; i < m.participants.size(); ++i) {
      if (i > 0) out += ';';
      out += std::to_string(m.participants[i]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t begin = 0;
  for (;;) {
    const auto pos = s.find(sep, begin);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(begin));
      return parts;
    }
    parts.push_back(s.substr(begin, pos - begin));
    begin = pos + 1;
  }
}

template <typename T>
T parse_number(std::string_view field, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw FormatError("metrics.csv line " + std::to_string(line) + ": bad number \"" +
                      std::string(field) + "\"");
  }
  return v;
}

}  // namespace

std::vector<RoundMetrics> parse_metrics_csv(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front() != kMetricsCsvHeader) {
    throw FormatError("metrics.csv header does not match the expected columns");
  }
  std::vector<RoundMetrics> history;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 10) {
      throw FormatError("metrics.csv line " + std::to_string(i + 1) + " has " +
                        std::to_string(f.size()) + " fields, expected 10");
    }
    RoundMetrics m;
    m.round = parse_number<std::size_t>(f[0], i + 1);
    m.global_val_loss = parse_number<double>(f[1], i + 1);
    m.proxy_val_loss = parse_number<double>(f[2], i + 1);
    m.global_test_loss = parse_number<double>(f[3], i + 1);
    m.proxy_test_loss = parse_number<double>(f[4], i + 1);
    if (!f[5].empty()) m.global_test_acc = parse_number<double>(f[5], i + 1);
    if (!f[6].empty()) m.proxy_test_acc = parse_number<double>(f[6], i + 1);
    m.broadcast_bytes = parse_number<std::size_t>(f[7], i + 1);
    m.upload_bytes = parse_number<std::size_t>(f[8], i + 1);
    if (!f[9].empty()) {
      for (auto id : split(f[9], ';')) m.participants.push_back(parse_number<std::size_t>(id, i + 1));
    }
    history.push_back(std::move(m));
  }
  return history;
}

namespace {

nlohmann::json summary_json(const ModelSummary& s) {
  nlohmann::json j = {{"round", s.round}, {"val_loss", s.val_loss}, {"test_loss", s.test_loss}};
  if (s.test_acc) j["test_acc"] = *s.test_acc;
  return j;
}

nlohmann::json gaps_json(const std::vector<MetricGap>& gaps) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& g : gaps) {
    j.push_back({{"metric", g.metric}, {"global", g.global}, {"proxy", g.proxy}, {"gap", g.gap}});
  }
  return j;
}

}  // namespace

nlohmann::json to_json(const PrivacyGapReport& report) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& s : report.seeds) {
    seeds.push_back({{"seed", s.seed},
                     {"best_global", summary_json(s.global)},
                     {"best_proxy", summary_json(s.proxy)},
                     {"gaps", gaps_json(s.gaps)},
                     {"model_privacy", s.model_privacy}});
  }
  return {{"label", report.label},
          {"seeds", std::move(seeds)},
          {"median", gaps_json(report.medians)},
          {"seeds_with_privacy", report.seeds_with_privacy},
          {"model_privacy_achieved", report.model_privacy_achieved}};
}

nlohmann::json to_json(const CommunicationStats& stats) {
  return {{"payload_bytes", stats.payload_bytes},
          {"data_bytes", stats.data_bytes},
          {"elements", stats.elements},
          {"reduction_factor", stats.reduction_factor}};
}

}  // namespace proxyfl
