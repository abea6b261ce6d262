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
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "proxyfl/matrix.hpp"
#include "proxyfl/quantizer.hpp"

namespace proxyfl {

using Bytes = std::vector<std::uint8_t>;

// Quantized tensor, little-endian:
//   "FLPQ" | version u16 = 1 | rows u32 | cols u32 | block_size u32 |
//   value_count u16 | value_count x f32 | scale_count u32 |
//   scale_count x f32 | codes packed LSB-first at ceil(log2 value_count)
//   bits each, zero-padded to a byte boundary.
//
// Full-precision matrix, little-endian (same header minus the codebook):
//   "FLPF" | version u16 = 1 | rows u32 | cols u32 | rows*cols x f32.
inline constexpr std::string_view kQuantizedMagic = "FLPQ";
inline constexpr std::string_view kFullPrecisionMagic = "FLPF";
inline constexpr std::uint16_t kWireVersion = 1;

enum class PayloadKind { kQuantized, kFullPrecision };

Bytes serialize(const QuantizedTensor& q);
QuantizedTensor deserialize_quantized(std::span<const std::uint8_t> bytes);

Bytes serialize(const Matrix& m);
Matrix deserialize_full_precision(std::span<const std::uint8_t> bytes);

// Reads the magic. Throws FormatError on anything else.
PayloadKind payload_kind(std::span<const std::uint8_t> bytes);

// Reconstructs the matrix carried by either payload kind.
Matrix decode_matrix(std::span<const std::uint8_t> bytes);

std::size_t quantized_header_bytes(std::size_t value_count);
std::size_t packed_code_bytes(std::size_t elements, int code_bits);
std::size_t quantized_payload_bytes(std::size_t rows, std::size_t cols, std::size_t block_size,
                                    std::size_t value_count);
std::size_t full_precision_payload_bytes(std::size_t rows, std::size_t cols);

// Bytes spent on numeric content: scales plus packed codes for FLPQ, values
// for FLPF. Headers and the codebook are excluded.
std::size_t payload_data_bytes(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace proxyfl
