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

#include "proxyfl/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "proxyfl/errors.hpp"

namespace proxyfl {

StandardNumberSet::StandardNumberSet(std::vector<float> values, std::optional<int> nominal_bits)
    : values_(std::move(values)), nominal_bits_(nominal_bits) {
  if (values_.size() < 3 || values_.size() > 0xffff) {
    throw ValueError("standard number set needs 3..65535 values, got " +
                     std::to_string(values_.size()));
  }
  if (values_.front() != -1.0f || values_.back() != 1.0f) {
    throw ValueError("standard number set must start at -1 and end at +1");
  }
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) throw ValueError("standard number set has non-finite value");
    if (i > 0 && !(values_[i - 1] < values_[i])) {
      throw ValueError("standard number set must be strictly increasing");
    }
    if (values_[i] == 0.0f) {
      ++zeros;
      zero_index_ = i;
    }
  }
  if (zeros != 1) throw ValueError("standard number set must contain 0 exactly once");
}

int StandardNumberSet::code_bits() const {
  int bits = 0;
  while ((std::size_t{1} << bits) < values_.size()) ++bits;
  return bits;
}

double StandardNumberSet::max_gap() const {
  double gap = 0.0;
  for (std::size_t i = 1; i < values_.size(); ++i) {
    gap = std::max(gap, static_cast<double>(values_[i]) - static_cast<double>(values_[i - 1]));
  }
  return gap;
}

namespace {

double normal_quantile(double p) { return std::sqrt(2.0) * boost::math::erf_inv(2.0 * p - 1.0); }

// `count` levels in (0, 1], the last one exactly 1.
std::vector<double> normal_levels(std::size_t count, double top_probability) {
  std::vector<double> q(count);
  for (std::size_t k = 1; k <= count; ++k) {
    const double p = 0.5 + static_cast<double>(k) * (top_probability - 0.5) / count;
    q[k - 1] = normal_quantile(p);
  }
  const double top = q.back();
  for (auto& v : q) v /= top;
  q.back() = 1.0;
  return q;
}

}  // namespace

StandardNumberSet build_standard_set(int bits) {
  switch (bits) {
    case 1:
      return StandardNumberSet({-1.0f, 0.0f, 1.0f}, 1);
    case 2:
      return StandardNumberSet({-1.0f, 0.0f, 0.33f, 1.0f}, 2);
    case 3:
      return StandardNumberSet({-1.0f, -0.47f, -0.21f, 0.0f, 0.16f, 0.33f, 0.56f, 1.0f}, 3);
    default:
      break;
  }
  if (bits < 1 || bits > 8) {
    throw ValueError("bit-width must be in [1, 8], got " + std::to_string(bits));
  }
  const std::size_t half = std::size_t{1} << (bits - 1);
  const double top_probability = 1.0 - 1.0 / static_cast<double>(std::size_t{1} << (bits + 1));
  const auto positive = normal_levels(half, top_probability);
  const auto negative = normal_levels(half - 1, top_probability);

  std::vector<float> values;
  values.reserve(2 * half);
  for (auto it = negative.rbegin(); it != negative.rend(); ++it) {
    values.push_back(static_cast<float>(-*it));
  }
  values.push_back(0.0f);
  for (double v : positive) values.push_back(static_cast<float>(v));
  return StandardNumberSet(std::move(values), bits);
}

std::size_t nearest_code(float x, const StandardNumberSet& set) {
  const auto v = set.values();
  const auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.begin()) return 0;
  if (it == v.end()) return v.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - v.begin());
  const std::size_t lo = hi - 1;
  const double xd = x;
  const double d_lo = std::abs(xd - static_cast<double>(v[lo]));
  const double d_hi = std::abs(xd - static_cast<double>(v[hi]));
  if (d_lo < d_hi) return lo;
  if (d_hi < d_lo) return hi;
  return std::abs(v[lo]) <= std::abs(v[hi]) ? lo : hi;
}

std::size_t block_count(std::size_t elements, std::size_t block_size) {
  return (elements + block_size - 1) / block_size;
}

QuantizedTensor quantize(const Matrix& x, const StandardNumberSet& set, std::size_t block_size) {
  if (block_size == 0) throw ValueError("block size must be positive");
  if (x.empty()) throw ShapeError("cannot quantize an empty matrix");
  require_finite(x, "quantize input");

  QuantizedTensor q{x.rows(), x.cols(), block_size, set, {}, {}};
  const auto values = x.values();
  const std::size_t n = values.size();
  q.codes.resize(n);
  q.scales.resize(block_count(n, block_size));

  for (std::size_t block = 0; block < q.scales.size(); ++block) {
    const std::size_t begin = block * block_size;
    const std::size_t end = std::min(n, begin + block_size);
    float absmax = 0.0f;
    for (std::size_t i = begin; i < end; ++i) absmax = std::max(absmax, std::abs(values[i]));
    q.scales[block] = absmax;
    if (absmax == 0.0f) {
      std::fill(q.codes.begin() + begin, q.codes.begin() + end,
                static_cast<std::uint16_t>(set.zero_index()));
      continue;
    }
    for (std::size_t i = begin; i < end; ++i) {
      q.codes[i] = static_cast<std::uint16_t>(nearest_code(values[i] / absmax, set));
    }
  }
  return q;
}

void validate(const QuantizedTensor& q) {
  if (q.rows == 0 || q.cols == 0) throw FormatError("quantized tensor has a zero dimension");
  if (q.block_size == 0) throw FormatError("quantized tensor has zero block size");
  if (q.codes.size() != q.element_count()) {
    throw FormatError("quantized tensor has " + std::to_string(q.codes.size()) +
                      " codes for " + std::to_string(q.element_count()) + " elements");
  }
  if (q.scales.size() != block_count(q.element_count(), q.block_size)) {
    throw FormatError("quantized tensor scale count does not match its block layout");
  }
  for (float z : q.scales) {
    if (!std::isfinite(z) || z < 0.0f) throw FormatError("quantized tensor has an invalid scale");
  }
  for (auto c : q.codes) {
    if (c >= q.codebook.size()) {
      throw FormatError("code index " + std::to_string(c) + " overflows a codebook of " +
                        std::to_string(q.codebook.size()));
    }
  }
}

Matrix dequantize(const QuantizedTensor& q) {
  validate(q);
  Matrix out(q.rows, q.cols);
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    ov[i] = q.scales[i / q.block_size] * q.codebook[q.codes[i]];
  }
  return out;
}

QuantizationErrorStats quantization_error(const Matrix& x, const StandardNumberSet& set,
                                          std::size_t block_size) {
  const Matrix approx = dequantize(quantize(x, set, block_size));
  QuantizationErrorStats stats;
  const auto xv = x.values();
  const auto av = approx.values();
  double total = 0.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double err = std::abs(static_cast<double>(xv[i]) - static_cast<double>(av[i]));
    stats.max_abs = std::max(stats.max_abs, err);
    total += err;
    if (static_cast<double>(xv[i]) * static_cast<double>(av[i]) >= 0.0) ++agree;
  }
  stats.mean_abs = total / static_cast<double>(xv.size());
  stats.sign_agreement_rate = static_cast<double>(agree) / static_cast<double>(xv.size());
  return stats;
}

}  // namespace proxyfl
