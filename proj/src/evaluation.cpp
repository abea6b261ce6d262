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

#include "proxyfl/evaluation.hpp"

#include <algorithm>

#include "proxyfl/errors.hpp"

namespace proxyfl {

double argmax_accuracy(const Matrix& outputs, const Matrix& targets) {
  if (!outputs.same_shape(targets)) throw ShapeError("accuracy needs matching shapes");
  std::size_t hits = 0;
  for (std::size_t c = 0; c < outputs.cols(); ++c) {
    std::size_t best_y = 0, best_t = 0;
    for (std::size_t r = 1; r < outputs.rows(); ++r) {
      if (outputs(r, c) > outputs(best_y, c)) best_y = r;
      if (targets(r, c) > targets(best_t, c)) best_t = r;
    }
    if (best_y == best_t) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(outputs.cols());
}

EvalResult evaluate(const LoraModel& model, const Dataset& ds, LossKind kind) {
  const Matrix outputs = predict(model, ds.features);
  EvalResult r;
  r.loss = loss_value(outputs, ds.targets, kind);
  if (kind == LossKind::kSoftmaxCrossEntropy) r.accuracy = argmax_accuracy(outputs, ds.targets);
  return r;
}

std::size_t select_best(std::span<const RoundMetrics> history, ModelView which) {
  if (history.empty()) throw ValueError("cannot select the best round of an empty history");
  std::size_t best = 0;
  auto loss = [which](const RoundMetrics& m) {
    return which == ModelView::kGlobal ? m.global_val_loss : m.proxy_val_loss;
  };
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (loss(history[i]) < loss(history[best])) best = i;
  }
  return best;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValueError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

ModelSummary summarize(const RoundMetrics& m, ModelView which) {
  const bool g = which == ModelView::kGlobal;
  return {m.round, g ? m.global_val_loss : m.proxy_val_loss,
          g ? m.global_test_loss : m.proxy_test_loss, g ? m.global_test_acc : m.proxy_test_acc};
}

std::vector<MetricGap> gaps_for(const ModelSummary& global, const ModelSummary& proxy) {
  std::vector<MetricGap> gaps = {
      {"val_loss", global.val_loss, proxy.val_loss, proxy.val_loss - global.val_loss},
      {"test_loss", global.test_loss, proxy.test_loss, proxy.test_loss - global.test_loss},
  };
  if (global.test_acc && proxy.test_acc) {
    gaps.push_back({"test_acc", *global.test_acc, *proxy.test_acc,
                    *global.test_acc - *proxy.test_acc});
  }
  return gaps;
}

bool all_positive(const std::vector<MetricGap>& gaps) {
  return std::all_of(gaps.begin(), gaps.end(), [](const MetricGap& g) { return g.gap > 0.0; });
}

}  // namespace

PrivacyGapReport privacy_gap_report(std::span<const SeedHistory> runs, std::string label) {
  if (runs.empty()) throw ValueError("privacy gap report needs at least one run");
  PrivacyGapReport report;
  report.label = std::move(label);
  for (const auto& run : runs) {
    SeedGap s;
    s.seed = run.seed;
    s.global = summarize(run.history[select_best(run.history, ModelView::kGlobal)],
                         ModelView::kGlobal);
    s.proxy = summarize(run.history[select_best(run.history, ModelView::kProxy)],
                        ModelView::kProxy);
    s.gaps = gaps_for(s.global, s.proxy);
    s.model_privacy = all_positive(s.gaps);
    if (s.model_privacy) ++report.seeds_with_privacy;
    report.seeds.push_back(std::move(s));
  }
  const std::size_t metric_count =
      std::min_element(report.seeds.begin(), report.seeds.end(), [](const auto& a, const auto& b) {
        return a.gaps.size() < b.gaps.size();
      })->gaps.size();
  for (std::size_t k = 0; k < metric_count; ++k) {
    std::vector<double> g, p, d;
    for (const auto& s : report.seeds) {
      g.push_back(s.gaps[k].global);
      p.push_back(s.gaps[k].proxy);
      d.push_back(s.gaps[k].gap);
    }
    report.medians.push_back({report.seeds.front().gaps[k].metric, median(g), median(p), median(d)});
  }
  report.model_privacy_achieved = all_positive(report.medians);
  return report;
}

CommunicationStats& operator+=(CommunicationStats& a, const CommunicationStats& b) {
  a.payload_bytes += b.payload_bytes;
  a.data_bytes += b.data_bytes;
  a.elements += b.elements;
  a.reduction_factor = a.data_bytes == 0 ? 1.0
                                         : 32.0 * static_cast<double>(a.elements) /
                                               (8.0 * static_cast<double>(a.data_bytes));
  return a;
}

CommunicationStats communication_accounting(std::span<const Bytes> payloads) {
  CommunicationStats total;
  for (const auto& bytes : payloads) {
    CommunicationStats one;
    one.payload_bytes = bytes.size();
    one.data_bytes = payload_data_bytes(bytes);
    const Matrix m = decode_matrix(bytes);
    one.elements = m.size();
    total += one;
  }
  return total;
}

}  // namespace proxyfl
