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

#include "proxyfl/wire_format.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "proxyfl/errors.hpp"

namespace proxyfl {

namespace {

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void magic(std::string_view m) { out_.insert(out_.end(), m.begin(), m.end()); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
  void raw(const Bytes& b) { out_.insert(out_.end(), b.begin(), b.end()); }

  Bytes take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void expect_magic(std::string_view m) {
    need(m.size(), "magic");
    if (std::memcmp(in_.data() + pos_, m.data(), m.size()) != 0) {
      throw FormatError("bad magic, expected \"" + std::string(m) + "\"");
    }
    pos_ += m.size();
  }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(le(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_end() const {
    if (pos_ != in_.size()) {
      throw FormatError(std::to_string(in_.size() - pos_) + " trailing bytes after payload");
    }
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw FormatError(std::string("truncated payload in ") + what);
  }
  std::uint64_t le(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError(std::string(what) + " does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

Bytes pack_codes(const std::vector<std::uint16_t>& codes, int bits) {
  Bytes packed(packed_code_bytes(codes.size(), bits), 0);
  std::size_t bit = 0;
  for (auto code : codes) {
    for (int b = 0; b < bits; ++b, ++bit) {
      if ((code >> b) & 1u) packed[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
    }
  }
  return packed;
}

std::vector<std::uint16_t> unpack_codes(std::span<const std::uint8_t> packed, std::size_t count,
                                        int bits) {
  std::vector<std::uint16_t> codes(count);
  std::size_t bit = 0;
  for (auto& code : codes) {
    std::uint32_t v = 0;
    for (int b = 0; b < bits; ++b, ++bit) {
      v |= static_cast<std::uint32_t>((packed[bit / 8] >> (bit % 8)) & 1u) << b;
    }
    code = static_cast<std::uint16_t>(v);
  }
  return codes;
}

constexpr std::size_t kFullPrecisionHeaderBytes = 4 + 2 + 4 + 4;

}  // namespace

std::size_t quantized_header_bytes(std::size_t value_count) {
  return 4 + 2 + 4 + 4 + 4 + 2 + 4 * value_count + 4;
}

std::size_t packed_code_bytes(std::size_t elements, int code_bits) {
  return (elements * static_cast<std::size_t>(code_bits) + 7) / 8;
}

std::size_t quantized_payload_bytes(std::size_t rows, std::size_t cols, std::size_t block_size,
                                    std::size_t value_count) {
  int bits = 0;
  while ((std::size_t{1} << bits) < value_count) ++bits;
  const std::size_t n = rows * cols;
  return quantized_header_bytes(value_count) + 4 * block_count(n, block_size) +
         packed_code_bytes(n, bits);
}

std::size_t full_precision_payload_bytes(std::size_t rows, std::size_t cols) {
  return kFullPrecisionHeaderBytes + 4 * rows * cols;
}

Bytes serialize(const QuantizedTensor& q) {
  validate(q);
  const int bits = q.codebook.code_bits();
  Writer w(quantized_payload_bytes(q.rows, q.cols, q.block_size, q.codebook.size()));
  w.magic(kQuantizedMagic);
  w.u16(kWireVersion);
  w.u32(checked_u32(q.rows, "rows"));
  w.u32(checked_u32(q.cols, "cols"));
  w.u32(checked_u32(q.block_size, "block_size"));
  w.u16(static_cast<std::uint16_t>(q.codebook.size()));
  for (float v : q.codebook.values()) w.f32(v);
  w.u32(checked_u32(q.scales.size(), "scale_count"));
  for (float z : q.scales) w.f32(z);
  w.raw(pack_codes(q.codes, bits));
  return w.take();
}

QuantizedTensor deserialize_quantized(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kQuantizedMagic);
  const auto version = r.u16("version");
  if (version != kWireVersion) {
    throw FormatError("unsupported FLPQ version " + std::to_string(version));
  }
  const std::size_t rows = r.u32("rows");
  const std::size_t cols = r.u32("cols");
  const std::size_t block_size = r.u32("block_size");
  if (rows == 0 || cols == 0 || block_size == 0) {
    throw FormatError("FLPQ header has a zero dimension or block size");
  }
  const std::size_t value_count = r.u16("value_count");
  std::vector<float> values(value_count);
  for (auto& v : values) v = r.f32("codebook");
  std::optional<StandardNumberSet> codebook;
  try {
    codebook.emplace(std::move(values));
  } catch (const ValueError& e) {
    throw FormatError(std::string("invalid codebook: ") + e.what());
  }
  const std::size_t scale_count = r.u32("scale_count");
  if (scale_count != block_count(rows * cols, block_size)) {
    throw FormatError("FLPQ scale_count " + std::to_string(scale_count) +
                      " does not match ceil(rows*cols/block_size)");
  }
  std::vector<float> scales(scale_count);
  for (auto& z : scales) z = r.f32("scales");
  const int bits = codebook->code_bits();
  auto packed = r.take(packed_code_bytes(rows * cols, bits), "codes");
  r.expect_end();

  QuantizedTensor q{rows, cols, block_size, std::move(*codebook),
                    unpack_codes(packed, rows * cols, bits), std::move(scales)};
  validate(q);
  return q;
}

Bytes serialize(const Matrix& m) {
  if (m.empty()) throw ShapeError("cannot serialize an empty matrix");
  Writer w(full_precision_payload_bytes(m.rows(), m.cols()));
  w.magic(kFullPrecisionMagic);
  w.u16(kWireVersion);
  w.u32(checked_u32(m.rows(), "rows"));
  w.u32(checked_u32(m.cols(), "cols"));
  for (float v : m.values()) w.f32(v);
  return w.take();
}

Matrix deserialize_full_precision(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kFullPrecisionMagic);
  const auto version = r.u16("version");
  if (version != kWireVersion) {
    throw FormatError("unsupported FLPF version " + std::to_string(version));
  }
  const std::size_t rows = r.u32("rows");
  const std::size_t cols = r.u32("cols");
  if (rows == 0 || cols == 0) throw FormatError("FLPF header has a zero dimension");
  if ((bytes.size() - kFullPrecisionHeaderBytes) / 4 < rows * cols) {
    throw FormatError("truncated payload in values");
  }
  std::vector<float> values(rows * cols);
  for (auto& v : values) v = r.f32("values");
  r.expect_end();
  return Matrix(rows, cols, std::move(values));
}

PayloadKind payload_kind(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("truncated payload in magic");
  if (std::memcmp(bytes.data(), kQuantizedMagic.data(), 4) == 0) return PayloadKind::kQuantized;
  if (std::memcmp(bytes.data(), kFullPrecisionMagic.data(), 4) == 0) {
    return PayloadKind::kFullPrecision;
  }
  throw FormatError("bad magic, expected \"FLPQ\" or \"FLPF\"");
}

Matrix decode_matrix(std::span<const std::uint8_t> bytes) {
  if (payload_kind(bytes) == PayloadKind::kQuantized) {
    return dequantize(deserialize_quantized(bytes));
  }
  return deserialize_full_precision(bytes);
}

std::size_t payload_data_bytes(std::span<const std::uint8_t> bytes) {
  if (payload_kind(bytes) == PayloadKind::kQuantized) {
    const auto q = deserialize_quantized(bytes);
    return bytes.size() - quantized_header_bytes(q.codebook.size());
  }
  if (bytes.size() < kFullPrecisionHeaderBytes) throw FormatError("truncated payload in header");
  return bytes.size() - kFullPrecisionHeaderBytes;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

}  // namespace proxyfl
