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
#include <optional>
#include <span>
#include <vector>

#include "proxyfl/matrix.hpp"

namespace proxyfl {

inline constexpr std::size_t kDefaultBlockSize = 256;

/// Sorted codebook in [-1, 1] that always contains -1, 0 and +1.
class StandardNumberSet {
 public:
  // Validates: strictly increasing, finite, first -1, last +1, exactly one 0,
  // at least three values and at most 65535 (the wire format's u16 count).
  explicit StandardNumberSet(std::vector<float> values,
                             std::optional<int> nominal_bits = std::nullopt);

  std::span<const float> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  float operator[](std::size_t i) const { return values_[i]; }
  std::optional<int> nominal_bits() const { return nominal_bits_; }
  std::size_t zero_index() const { return zero_index_; }

  // ceil(log2(size())), the packed width of one code.
  int code_bits() const;
  // Largest distance between neighbouring values.
  double max_gap() const;

  // Equality is by value list only.
  friend bool operator==(const StandardNumberSet& a, const StandardNumberSet& b) {
    return a.values_ == b.values_;
  }

 private:
  std::vector<float> values_;
  std::optional<int> nominal_bits_;
  std::size_t zero_index_ = 0;
};

/// Codebook for bit-width `bits` in [1, 8].
///
/// bits 1..3 are fixed tables:
///   1: [-1, 0, 1]
///   2: [-1, 0, 0.33, 1]
///   3: [-1, -0.47, -0.21, 0, 0.16, 0.33, 0.56, 1]
/// bits >= 4 use normal quantiles: 2^(bits-1) positive and 2^(bits-1) - 1
/// negative levels at evenly spaced probabilities between 0.5 and
/// 1 - 1/2^(bits+1), each side scaled so its extreme is exactly 1, plus 0.
StandardNumberSet build_standard_set(int bits);

/// Index of the codebook value closest to x. Ties go to the value of smaller
/// magnitude. Distances are compared in binary64.
std::size_t nearest_code(float x, const StandardNumberSet& set);

/// Block-wise absmax quantized tensor.
struct QuantizedTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t block_size = 0;
  StandardNumberSet codebook = build_standard_set(2);
  std::vector<std::uint16_t> codes;  // one per element, row-major
  std::vector<float> scales;         // one per block, ceil(rows*cols / block_size)

  std::size_t element_count() const { return rows * cols; }
  std::size_t block_count() const { return scales.size(); }

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

std::size_t block_count(std::size_t elements, std::size_t block_size);

/// Flattens x row-major, cuts it into consecutive blocks of `block_size`
/// (the final block may be shorter), scales each block by its absmax and
/// rounds to the nearest codebook value. All-zero blocks get scale 0 and the
/// zero code.
QuantizedTensor quantize(const Matrix& x, const StandardNumberSet& set,
                         std::size_t block_size = kDefaultBlockSize);

/// scales[block(i)] * codebook[codes[i]] for every element. Throws FormatError
/// on an out-of-range code or inconsistent block layout.
Matrix dequantize(const QuantizedTensor& q);

/// Throws FormatError if q violates any structural invariant.
void validate(const QuantizedTensor& q);

struct QuantizationErrorStats {
  double max_abs = 0.0;
  double mean_abs = 0.0;
  // Fraction of elements where dequantized * original >= 0.
  double sign_agreement_rate = 1.0;
};

QuantizationErrorStats quantization_error(const Matrix& x, const StandardNumberSet& set,
                                          std::size_t block_size = kDefaultBlockSize);

}  // namespace proxyfl
