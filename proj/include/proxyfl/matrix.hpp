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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace proxyfl {

/// Dense row-major matrix of binary32 values.
///
/// A default-constructed Matrix is empty (0x0) and only serves as a
/// placeholder; every other instance has positive dimensions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> values);
  Matrix(std::initializer_list<std::initializer_list<float>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  float operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  float& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
};

std::string shape_string(const Matrix& m);

// Inner dimension is accumulated index-ascending in binary64, then rounded once.
Matrix matmul(const Matrix& a, const Matrix& b);

// x + c * y, elementwise.
Matrix add_scaled(const Matrix& x, const Matrix& y, float c);

Matrix transpose(const Matrix& m);

bool all_finite(const Matrix& m);

// Throws ValueError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

double frobenius_norm(const Matrix& m);

// FNV-1a over the raw bytes of the values and the shape.
std::uint64_t checksum(const Matrix& m);

}  // namespace proxyfl
