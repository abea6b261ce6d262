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

#include <cmath>
#include <set>

#include "proxyfl/errors.hpp"
#include "proxyfl/matrix.hpp"
#include "proxyfl/random.hpp"

using namespace proxyfl;

namespace {

// Triple loop in binary64, rounded once at the end.
Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        acc += static_cast<double>(a(i, k)) * static_cast<double>(b(k, j));
      }
      out(i, j) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("matrix construction validates shape") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<float>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Matrix(0, 3), ShapeError);
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 0) == 4.0f);
  CHECK(shape_string(m) == "2x3");
}

TEST_CASE("matmul examples") {
  const Matrix m{{1.5f, -2.0f}, {0.25f, 4.0f}};
  CHECK(matmul(Matrix::identity(2), m) == m);
  CHECK(matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{1}, {1}}) == Matrix{{3}, {7}});
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 2)), ShapeError);
}

TEST_CASE("matmul matches a binary64 triple loop bit for bit") {
  RandomSource rng(11, "matmul");
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(7), k = 1 + rng.uniform_index(7),
                      m = 1 + rng.uniform_index(7);
    const Matrix a = gaussian_fill(n, k, 0.0, 1.0, rng);
    const Matrix b = gaussian_fill(k, m, 0.0, 1.0, rng);
    CHECK(matmul(a, b) == naive_product(a, b));
  }
}

TEST_CASE("matmul is associative to 1e-5 relative") {
  RandomSource rng(12, "assoc");
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = gaussian_fill(4, 5, 0.0, 1.0, rng);
    const Matrix b = gaussian_fill(5, 3, 0.0, 1.0, rng);
    const Matrix c = gaussian_fill(3, 6, 0.0, 1.0, rng);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    const double scale = std::max(frobenius_norm(left), 1.0);
    CHECK(frobenius_norm(add_scaled(left, right, -1.0f)) / scale < 1e-5);
  }
}

TEST_CASE("add_scaled examples") {
  RandomSource rng(13, "axpy");
  const Matrix m = gaussian_fill(3, 4, 0.0, 1.0, rng);
  CHECK(add_scaled(m, m, -1.0f) == Matrix(3, 4));
  CHECK(add_scaled(Matrix{{0}}, Matrix{{4}}, 0.25f) == Matrix{{1}});
  CHECK(add_scaled(m, Matrix(3, 4), 2.5f) == m);
  CHECK_THROWS_AS(add_scaled(m, Matrix(4, 3), 1.0f), ShapeError);
  // Exact for representable values.
  CHECK(add_scaled(Matrix{{1.5f, -3.0f}}, Matrix{{0.5f, 2.0f}}, 2.0f) == Matrix{{2.5f, 1.0f}});
}

TEST_CASE("transpose, norm and finiteness") {
  const Matrix m{{1, 2, 3}, {4, 5, 6}};
  CHECK(transpose(transpose(m)) == m);
  CHECK(transpose(m)(2, 1) == 6.0f);
  CHECK(frobenius_norm(Matrix{{3, 4}}) == doctest::Approx(5.0));
  Matrix bad = m;
  bad(0, 1) = std::nanf("");
  CHECK_FALSE(all_finite(bad));
  CHECK_THROWS_AS(require_finite(bad, "bad"), ValueError);
  CHECK(checksum(m) == checksum(Matrix{{1, 2, 3}, {4, 5, 6}}));
  CHECK(checksum(m) != checksum(transpose(m)));
}

TEST_CASE("gaussian_fill examples") {
  RandomSource zero_rng(1, "zero");
  CHECK(gaussian_fill(3, 3, 0.0, 0.0, zero_rng) == Matrix(3, 3));

  RandomSource r1(99, "fill"), r2(99, "fill");
  CHECK(gaussian_fill(5, 7, 0.3, 2.0, r1) == gaussian_fill(5, 7, 0.3, 2.0, r2));

  RandomSource big(7, "mean");
  const double mean = 1.25, sd = 2.0;
  const Matrix draws = gaussian_fill(1000, 100, mean, sd, big);
  double total = 0.0;
  for (float v : draws.values()) total += v;
  CHECK(std::abs(total / 1e5 - mean) < 4.0 * sd / std::sqrt(1e5));
}

TEST_CASE("random streams are reproducible and label-separated") {
  RandomSource a(5, "x"), b(5, "x"), c(5, "y"), d(6, "x");
  std::set<std::uint64_t> firsts;
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  firsts.insert(RandomSource(5, "x").next_u64());
  firsts.insert(c.next_u64());
  firsts.insert(d.next_u64());
  CHECK(firsts.size() == 3);

  // Derived streams do not depend on how far the parent has advanced.
  RandomSource parent(5, "x");
  const auto child_before = parent.derive("k").next_u64();
  for (int i = 0; i < 10; ++i) parent.next_u64();
  CHECK(parent.derive("k").next_u64() == child_before);
}

TEST_CASE("random stream output is pinned") {
  // Frozen from the documented construction; a change here breaks every
  // stored experiment.
  RandomSource rng(42, "pin");
  const std::uint64_t key = splitmix64_mix(splitmix64_mix(42ULL ^ 0x9E3779B97F4A7C15ULL) ^
                                           [] {
                                             std::uint64_t h = 0xcbf29ce484222325ULL;
                                             for (char ch : std::string("pin")) {
                                               h ^= static_cast<unsigned char>(ch);
                                               h *= 0x100000001b3ULL;
                                             }
                                             return h;
                                           }());
  CHECK(rng.key() == key);
  CHECK(rng.next_u64() == splitmix64_mix(key + 0x9E3779B97F4A7C15ULL));
  CHECK(rng.next_u64() == splitmix64_mix(key + 2 * 0x9E3779B97F4A7C15ULL));
}

TEST_CASE("uniform_index, gamma and dirichlet") {
  RandomSource rng(3, "dist");
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[rng.uniform_index(5)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 4 * std::sqrt(50000 * 0.2 * 0.8));

  for (double shape : {0.3, 1.0, 4.0}) {
    double total = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) total += rng.gamma(shape);
    // Var(Gamma(k)) = k.
    CHECK(std::abs(total / n - shape) < 5.0 * std::sqrt(shape / n));
  }

  const auto p = rng.dirichlet(6, 0.5);
  double sum = 0.0;
  for (double v : p) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(rng.uniform_index(0));
  CHECK_THROWS(rng.gamma(0.0));
}
