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

#include "proxyfl/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "proxyfl/errors.hpp"
#include "proxyfl/lora_model.hpp"

namespace proxyfl {

TaskKind parse_task_kind(std::string_view name) {
  if (name == "regression-teacher") return TaskKind::kRegressionTeacher;
  if (name == "cluster-classification") return TaskKind::kClusterClassification;
  throw ValueError("unknown task kind \"" + std::string(name) + "\"");
}

std::string_view to_string(TaskKind k) {
  return k == TaskKind::kRegressionTeacher ? "regression-teacher" : "cluster-classification";
}

void TaskSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ValueError("task dimensions must be positive");
  if (train_count == 0 || validation_count == 0 || test_count == 0) {
    throw ValueError("task sample counts must be positive");
  }
  if (!(noise_stddev >= 0.0) || !std::isfinite(noise_stddev)) {
    throw ValueError("noise stddev must be finite and >= 0");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValueError("alpha must be positive");
  if (input_clusters == 0 || teacher_hidden == 0) throw ValueError("task sizes must be positive");
  if (!(domain_shift >= 0.0) || !(cluster_separation > 0.0)) {
    throw ValueError("domain shift must be >= 0 and cluster separation > 0");
  }
  if (kind == TaskKind::kClusterClassification && output_dim < 2) {
    throw ValueError("classification needs at least two classes");
  }
}

namespace {

struct Teacher {
  Matrix w1, b1, w2;

  Matrix apply(const Matrix& x) const {
    Matrix h = matmul(w1, x);
    for (std::size_t r = 0; r < h.rows(); ++r) {
      for (std::size_t c = 0; c < h.cols(); ++c) h(r, c) = std::tanh(h(r, c) + b1(r, 0));
    }
    return matmul(w2, h);
  }
};

Teacher make_teacher(const TaskSpec& spec, TaskDomain domain, const RandomSource& root) {
  const double s1 = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(spec.teacher_hidden));
  auto base = root.derive("teacher");
  Teacher t{gaussian_fill(spec.teacher_hidden, spec.input_dim, 0.0, s1, base),
            gaussian_fill(spec.teacher_hidden, 1, 0.0, 0.1, base),
            gaussian_fill(spec.output_dim, spec.teacher_hidden, 0.0, s2, base)};
  if (domain == TaskDomain::kTarget) {
    auto shift = root.derive("teacher-shift");
    const double k = spec.domain_shift;
    t.w1 = add_scaled(t.w1, gaussian_fill(spec.teacher_hidden, spec.input_dim, 0.0, s1, shift),
                      static_cast<float>(k));
    t.w2 = add_scaled(t.w2, gaussian_fill(spec.output_dim, spec.teacher_hidden, 0.0, s2, shift),
                      static_cast<float>(k));
  }
  return t;
}

Matrix class_means(const TaskSpec& spec, TaskDomain domain, const RandomSource& root) {
  const double s = spec.cluster_separation / std::sqrt(static_cast<double>(spec.input_dim));
  auto base = root.derive("class-means");
  Matrix means = gaussian_fill(spec.input_dim, spec.output_dim, 0.0, s, base);
  if (domain == TaskDomain::kTarget) {
    auto shift = root.derive("class-shift");
    means = add_scaled(means, gaussian_fill(spec.input_dim, spec.output_dim, 0.0, s, shift),
                       static_cast<float>(spec.domain_shift));
  }
  return means;
}

Dataset make_split(const TaskSpec& spec, TaskDomain domain, SplitTag split, std::size_t count,
                   const RandomSource& root) {
  const char* domain_label = domain == TaskDomain::kSource ? "source" : "target";
  const char* split_label = split == SplitTag::kTrain        ? "train"
                            : split == SplitTag::kValidation ? "validation"
                                                             : "test";
  auto rng = root.derive(std::string("samples/") + domain_label + "/" + split_label);

  Dataset ds;
  ds.split = split;
  ds.features = Matrix(spec.input_dim, count);
  ds.targets = Matrix(spec.output_dim, count);
  ds.groups.resize(count);
  ds.ids.resize(count);

  if (spec.kind == TaskKind::kRegressionTeacher) {
    auto centers_rng = root.derive("input-centers");
    const Matrix centers = gaussian_fill(spec.input_dim, spec.input_clusters, 0.0, 1.0, centers_rng);
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t g = rng.uniform_index(spec.input_clusters);
      ds.groups[j] = g;
      ds.ids[j] = j;
      for (std::size_t r = 0; r < spec.input_dim; ++r) {
        ds.features(r, j) = static_cast<float>(rng.normal(centers(r, g), 1.0));
      }
    }
    ds.targets = make_teacher(spec, domain, root).apply(ds.features);
    for (float& v : ds.targets.values()) {
      v = static_cast<float>(v + rng.normal(0.0, spec.noise_stddev));
    }
  } else {
    const Matrix means = class_means(spec, domain, root);
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t label = rng.uniform_index(spec.output_dim);
      ds.groups[j] = label;
      ds.ids[j] = j;
      ds.targets(label, j) = 1.0f;
      for (std::size_t r = 0; r < spec.input_dim; ++r) {
        ds.features(r, j) = static_cast<float>(rng.normal(means(r, label), 1.0));
      }
    }
  }
  return ds;
}

}  // namespace

TaskData generate_task(const TaskSpec& spec, TaskDomain domain) {
  spec.validate();
  const RandomSource root(spec.seed, "task");
  return {make_split(spec, domain, SplitTag::kTrain, spec.train_count, root),
          make_split(spec, domain, SplitTag::kValidation, spec.validation_count, root),
          make_split(spec, domain, SplitTag::kTest, spec.test_count, root)};
}

Dataset select_samples(const Dataset& ds, const std::vector<std::size_t>& positions) {
  if (positions.empty()) throw ValueError("cannot select an empty sample set");
  Dataset out;
  out.split = ds.split;
  out.features = gather_columns(ds.features, positions, 0, positions.size());
  out.targets = gather_columns(ds.targets, positions, 0, positions.size());
  for (std::size_t p : positions) {
    out.groups.push_back(ds.groups[p]);
    out.ids.push_back(ds.ids[p]);
  }
  return out;
}

Partition partition_dirichlet(const Dataset& ds, std::size_t clients, double alpha,
                              RandomSource& rng) {
  if (clients == 0) throw ValueError("partition needs at least one client");
  if (ds.count() < clients) {
    throw ValueError("cannot split " + std::to_string(ds.count()) + " samples over " +
                     std::to_string(clients) + " clients");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValueError("alpha must be positive");

  std::size_t group_count = 0;
  for (auto g : ds.groups) group_count = std::max(group_count, g + 1);
  std::vector<std::vector<std::size_t>> members(group_count);
  for (std::size_t j = 0; j < ds.count(); ++j) members[ds.groups[j]].push_back(j);

  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<std::vector<std::size_t>> assigned(clients);
    for (auto group : members) {
      if (group.empty()) continue;
      rng.shuffle(group);
      const auto p = rng.dirichlet(clients, alpha);
      double cumulative = 0.0;
      std::size_t begin = 0;
      for (std::size_t i = 0; i < clients; ++i) {
        cumulative += p[i];
        std::size_t end = i + 1 == clients
                              ? group.size()
                              : std::min(group.size(), static_cast<std::size_t>(std::floor(
                                                           cumulative * group.size())));
        end = std::max(end, begin);
        assigned[i].insert(assigned[i].end(), group.begin() + begin, group.begin() + end);
        begin = end;
      }
    }
    if (std::any_of(assigned.begin(), assigned.end(), [](const auto& a) { return a.empty(); })) {
      continue;
    }
    Partition part;
    for (auto& positions : assigned) {
      std::sort(positions.begin(), positions.end());
      part.sizes.push_back(positions.size());
      part.total += positions.size();
      part.shards.push_back(select_samples(ds, positions));
    }
    check_partition(ds, part);
    return part;
  }
  throw ValueError("could not give every client a sample after " + std::to_string(kMaxAttempts) +
                   " Dirichlet draws");
}

void check_partition(const Dataset& ds, const Partition& p) {
  if (p.shards.size() != p.sizes.size()) throw ValueError("partition size list mismatch");
  std::vector<std::size_t> covered;
  for (std::size_t i = 0; i < p.shards.size(); ++i) {
    const auto& shard = p.shards[i];
    if (shard.count() == 0 || shard.count() != p.sizes[i]) throw ValueError("bad shard size");
    covered.insert(covered.end(), shard.ids.begin(), shard.ids.end());
  }
  if (p.total != covered.size()) throw ValueError("partition total does not match its shards");
  std::sort(covered.begin(), covered.end());
  if (std::adjacent_find(covered.begin(), covered.end()) != covered.end()) {
    throw ValueError("shards are not disjoint");
  }
  std::vector<std::size_t> expected = ds.ids;
  std::sort(expected.begin(), expected.end());
  if (covered != expected) throw ValueError("shards do not cover the dataset");
}

}  // namespace proxyfl
