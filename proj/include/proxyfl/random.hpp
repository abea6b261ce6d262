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

namespace proxyfl {

/// Deterministic, splittable random stream.
///
/// The stream key is derived by hashing (seed, label): FNV-1a over the label
/// bytes, combined with the seed and finalized with the SplitMix64 mixer. Draw
/// `i` is `splitmix64_mix(key + (i + 1) * 0x9E3779B97F4A7C15)`, i.e. a plain
/// SplitMix64 sequence started at the key. Children are derived the same way
/// from the parent key, so the tree of streams depends only on labels, never
/// on how many draws the parent has made.
///
/// Normal draws use the Box-Muller transform on binary64 uniforms; gamma draws
/// use Marsaglia-Tsang. The algorithm is part of the reproducibility contract
/// and must not change.
class RandomSource {
 public:
  RandomSource(std::uint64_t seed, std::string_view label);

  RandomSource derive(std::string_view label) const;

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform integer on [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  double normal(double mean = 0.0, double stddev = 1.0);
  // Gamma(shape, 1). shape must be positive.
  double gamma(double shape);
  // One draw from a symmetric Dirichlet(alpha) over `k` categories.
  std::vector<double> dirichlet(std::size_t k, double alpha);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  explicit RandomSource(std::uint64_t key) : key_(key), state_(key) {}

  std::uint64_t key_;
  std::uint64_t state_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

/// Matrix with entries drawn from Normal(mean, stddev^2), row-major order.
Matrix gaussian_fill(std::size_t rows, std::size_t cols, double mean, double stddev,
                     RandomSource& rng);

}  // namespace proxyfl
