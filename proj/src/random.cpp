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

#include "proxyfl/random.hpp"

#include <cmath>
#include <numbers>

#include "proxyfl/errors.hpp"

namespace proxyfl {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t combine(std::uint64_t parent, std::string_view label) {
  return splitmix64_mix(splitmix64_mix(parent ^ kGolden) ^ fnv1a(label));
}

}  // namespace

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RandomSource::RandomSource(std::uint64_t seed, std::string_view label)
    : RandomSource(combine(seed, label)) {}

RandomSource RandomSource::derive(std::string_view label) const {
  return RandomSource(combine(key_, label));
}

std::uint64_t RandomSource::next_u64() {
  state_ += kGolden;
  return splitmix64_mix(state_);
}

double RandomSource::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t RandomSource::uniform_index(std::size_t n) {
  if (n == 0) throw ValueError("uniform_index needs n > 0");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double RandomSource::normal(double mean, double stddev) {
  double z;
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    z = spare_normal_;
  } else {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    z = radius * std::cos(angle);
    spare_normal_ = radius * std::sin(angle);
    has_spare_normal_ = true;
  }
  return mean + stddev * z;
}

double RandomSource::gamma(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) throw ValueError("gamma shape must be positive");
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a + 1) * U^(1/a).
    const double g = gamma(shape + 1.0);
    const double u = 1.0 - uniform();
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> RandomSource::dirichlet(std::size_t k, double alpha) {
  if (k == 0) throw ValueError("dirichlet needs at least one category");
  std::vector<double> p(k);
  double total = 0.0;
  for (auto& x : p) {
    x = gamma(alpha);
    total += x;
  }
  if (!(total > 0.0)) {
    // Every component underflowed (tiny alpha); the limit is a point mass.
    std::fill(p.begin(), p.end(), 0.0);
    p[uniform_index(k)] = 1.0;
    return p;
  }
  for (auto& x : p) x /= total;
  return p;
}

Matrix gaussian_fill(std::size_t rows, std::size_t cols, double mean, double stddev,
                     RandomSource& rng) {
  if (!std::isfinite(mean) || !std::isfinite(stddev) || stddev < 0.0) {
    throw ValueError("gaussian_fill needs finite mean and finite stddev >= 0");
  }
  Matrix m(rows, cols);
  for (float& v : m.values()) v = static_cast<float>(rng.normal(mean, stddev));
  return m;
}

}  // namespace proxyfl
