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
#include <string_view>
#include <vector>

#include "proxyfl/matrix.hpp"
#include "proxyfl/random.hpp"

namespace proxyfl {

enum class TaskKind { kRegressionTeacher, kClusterClassification };
enum class SplitTag { kTrain, kValidation, kTest };

TaskKind parse_task_kind(std::string_view name);
std::string_view to_string(TaskKind k);

struct TaskSpec {
  TaskKind kind = TaskKind::kRegressionTeacher;
  std::size_t input_dim = 16;
  std::size_t output_dim = 4;
  std::size_t train_count = 4000;
  std::size_t validation_count = 400;
  std::size_t test_count = 400;
  double noise_stddev = 0.05;
  double alpha = 0.5;  // Dirichlet concentration for client splits
  std::uint64_t seed = 0;

  // Inputs come from a mixture of this many Gaussian clusters (regression),
  // the cluster id is what non-IID splits are drawn over.
  std::size_t input_clusters = 8;
  std::size_t teacher_hidden = 32;
  // Relative size of the perturbation separating the pretraining (source)
  // task from the federated (target) task.
  double domain_shift = 0.5;
  // Distance scale of class means (classification).
  double cluster_separation = 3.0;

  void validate() const;
};

struct Dataset {
  Matrix features;                  // input_dim x count
  Matrix targets;                   // output_dim x count; one-hot for classification
  std::vector<std::size_t> groups;  // class label or input-cluster id per sample
  std::vector<std::size_t> ids;     // position in the generated split, for disjointness checks
  SplitTag split = SplitTag::kTrain;

  std::size_t count() const { return features.cols(); }
};

struct TaskData {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// The federated task is the target domain; the backbone is pretrained on the
// source domain, which draws its own samples from the same input distribution
// but labels them with a shifted function.
enum class TaskDomain { kSource, kTarget };

/// Deterministic in (spec, domain): every draw comes from streams derived from
/// spec.seed.
TaskData generate_task(const TaskSpec& spec, TaskDomain domain = TaskDomain::kTarget);

struct Partition {
  std::vector<Dataset> shards;
  std::vector<std::size_t> sizes;
  std::size_t total = 0;
};

/// Splits `ds` over `clients` shards. For every group (class or input
/// cluster) the proportions over clients are a Dirichlet(alpha) draw; the
/// group's samples, shuffled, are cut at those proportions. Redrawn until every
/// shard is nonempty, up to 1000 attempts.
Partition partition_dirichlet(const Dataset& ds, std::size_t clients, double alpha,
                              RandomSource& rng);

// Throws ValueError if the partition is not an exact disjoint cover of ds.
void check_partition(const Dataset& ds, const Partition& p);

Dataset select_samples(const Dataset& ds, const std::vector<std::size_t>& positions);

}  // namespace proxyfl
