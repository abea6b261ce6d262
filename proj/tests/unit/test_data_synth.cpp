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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "proxyfl/data_synth.hpp"
#include "proxyfl/errors.hpp"
#include "proxyfl/evaluation.hpp"
#include "proxyfl/lora_model.hpp"

using namespace proxyfl;

namespace {

TaskSpec small_spec(TaskKind kind, std::uint64_t seed) {
  TaskSpec s;
  s.kind = kind;
  s.seed = seed;
  s.train_count = 600;
  s.validation_count = 100;
  s.test_count = 100;
  return s;
}

}  // namespace

TEST_CASE("generated splits have the declared shapes") {
  for (auto kind : {TaskKind::kRegressionTeacher, TaskKind::kClusterClassification}) {
    const auto spec = small_spec(kind, 3);
    const auto task = generate_task(spec);
    CHECK(task.train.features.rows() == spec.input_dim);
    CHECK(task.train.targets.rows() == spec.output_dim);
    CHECK(task.train.count() == 600);
    CHECK(task.validation.count() == 100);
    CHECK(task.test.count() == 100);
    CHECK(task.train.split == SplitTag::kTrain);
    CHECK(task.validation.split == SplitTag::kValidation);
    CHECK(task.test.split == SplitTag::kTest);
    CHECK(task.train.groups.size() == 600);
    CHECK(all_finite(task.train.features));
    if (kind == TaskKind::kClusterClassification) {
      for (std::size_t c = 0; c < task.train.count(); ++c) {
        float mass = 0.0f;
        for (std::size_t r = 0; r < spec.output_dim; ++r) mass += task.train.targets(r, c);
        CHECK(mass == 1.0f);
        CHECK(task.train.targets(task.train.groups[c], c) == 1.0f);
      }
    } else {
      for (auto g : task.train.groups) CHECK(g < spec.input_clusters);
    }
  }
}

TEST_CASE("generation is deterministic in its inputs") {
  const auto spec = small_spec(TaskKind::kRegressionTeacher, 17);
  const auto a = generate_task(spec), b = generate_task(spec);
  CHECK(a.train.features == b.train.features);
  CHECK(a.train.targets == b.train.targets);
  CHECK(a.test.targets == b.test.targets);
  auto other = spec;
  other.seed = 18;
  CHECK_FALSE(generate_task(other).train.features == a.train.features);
}

TEST_CASE("source and target domains are separate draws") {
  const auto spec = small_spec(TaskKind::kRegressionTeacher, 5);
  const auto source = generate_task(spec, TaskDomain::kSource);
  const auto target = generate_task(spec, TaskDomain::kTarget);
  CHECK_FALSE(source.train.features == target.train.features);
  CHECK(source.train.features == generate_task(spec, TaskDomain::kSource).train.features);
  // The shift only changes labels, so the target domain ignores it for inputs.
  auto shifted = spec;
  shifted.domain_shift = 2.0;
  const auto target2 = generate_task(shifted, TaskDomain::kTarget);
  CHECK(target2.train.features == target.train.features);
  CHECK_FALSE(target2.train.targets == target.train.targets);
  CHECK(generate_task(shifted, TaskDomain::kSource).train.targets == source.train.targets);
}

TEST_CASE("noise-free teacher task is learnable to MSE below 1e-3") {
  auto spec = small_spec(TaskKind::kRegressionTeacher, 2);
  spec.noise_stddev = 0.0;
  spec.train_count = 2000;
  const auto task = generate_task(spec);
  RandomSource rng(2, "student");
  Backbone init = make_backbone({spec.input_dim, 64, spec.output_dim}, Activation::kTanh, rng);
  PretrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.2f;
  const auto student = std::make_shared<const Backbone>(pretrain_backbone(
      init, task.train.features, task.train.targets, LossKind::kMse, cfg, rng));
  const double loss = evaluate({student, {}}, task.train, LossKind::kMse).loss;
  MESSAGE("student train MSE " << loss);
  CHECK(loss < 1e-3);
}

TEST_CASE("well separated clusters are linearly separable") {
  auto spec = small_spec(TaskKind::kClusterClassification, 4);
  spec.cluster_separation = 12.0;
  const auto task = generate_task(spec);
  RandomSource rng(4, "probe");
  Backbone init = make_backbone({spec.input_dim, spec.output_dim}, Activation::kTanh, rng);
  PretrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 0.1f;
  const auto probe = std::make_shared<const Backbone>(pretrain_backbone(
      init, task.train.features, task.train.targets, LossKind::kSoftmaxCrossEntropy, cfg, rng));
  const auto result = evaluate({probe, {}}, task.test, LossKind::kSoftmaxCrossEntropy);
  REQUIRE(result.accuracy.has_value());
  CHECK(*result.accuracy > 0.95);
}

TEST_CASE("dirichlet partition is an exact disjoint cover") {
  const auto task = generate_task(small_spec(TaskKind::kClusterClassification, 6));
  for (std::size_t clients : {1, 2, 5, 20}) {
    for (double alpha : {0.1, 0.5, 100.0}) {
      RandomSource rng(clients, "part");
      const auto p = partition_dirichlet(task.train, clients, alpha, rng);
      CHECK_NOTHROW(check_partition(task.train, p));
      CHECK(p.shards.size() == clients);
      CHECK(p.total == task.train.count());
      std::set<std::size_t> seen;
      std::size_t sum = 0;
      for (std::size_t i = 0; i < clients; ++i) {
        CHECK(p.sizes[i] == p.shards[i].count());
        CHECK(p.sizes[i] > 0);
        sum += p.sizes[i];
        seen.insert(p.shards[i].ids.begin(), p.shards[i].ids.end());
      }
      CHECK(sum == task.train.count());
      CHECK(seen.size() == task.train.count());
    }
  }
}

TEST_CASE("single client receives the whole dataset") {
  const auto task = generate_task(small_spec(TaskKind::kRegressionTeacher, 7));
  RandomSource rng(7, "one");
  const auto p = partition_dirichlet(task.train, 1, 0.5, rng);
  CHECK(p.shards[0].features == task.train.features);
  CHECK(p.shards[0].targets == task.train.targets);
  CHECK(p.shards[0].ids == task.train.ids);
}

TEST_CASE("huge concentration gives near-equal shards") {
  const auto task = generate_task(small_spec(TaskKind::kClusterClassification, 8));
  const double expected = static_cast<double>(task.train.count()) / 5.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomSource rng(seed, "iid");
    const auto p = partition_dirichlet(task.train, 5, 1e6, rng);
    for (auto n : p.sizes) CHECK(std::abs(static_cast<double>(n) - expected) <= 0.1 * expected);
  }
}

TEST_CASE("small concentration skews group proportions") {
  const auto task = generate_task(small_spec(TaskKind::kClusterClassification, 9));
  RandomSource rng(9, "skew");
  const auto p = partition_dirichlet(task.train, 4, 0.05, rng);
  // With alpha this small most clients miss at least one class entirely.
  std::size_t missing = 0;
  for (const auto& shard : p.shards) {
    std::set<std::size_t> classes(shard.groups.begin(), shard.groups.end());
    if (classes.size() < 4) ++missing;
  }
  CHECK(missing >= 2);
}

TEST_CASE("partition and spec validation") {
  const auto task = generate_task(small_spec(TaskKind::kRegressionTeacher, 10));
  RandomSource rng(10, "bad");
  CHECK_THROWS_AS(partition_dirichlet(task.train, 0, 0.5, rng), ValueError);
  CHECK_THROWS_AS(partition_dirichlet(task.train, 700, 0.5, rng), ValueError);
  CHECK_THROWS_AS(partition_dirichlet(task.train, 2, 0.0, rng), ValueError);

  auto p = partition_dirichlet(task.train, 3, 0.5, rng);
  p.shards[0] = select_samples(task.train, {0, 1});
  CHECK_THROWS_AS(check_partition(task.train, p), ValueError);

  TaskSpec bad;
  bad.input_dim = 0;
  CHECK_THROWS(bad.validate());
  bad = TaskSpec{};
  bad.noise_stddev = -1.0;
  CHECK_THROWS(bad.validate());
  CHECK(parse_task_kind("cluster-classification") == TaskKind::kClusterClassification);
  CHECK_THROWS_AS(parse_task_kind("images"), ValueError);
}
