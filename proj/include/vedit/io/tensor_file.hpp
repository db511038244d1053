// Copyright 2026 The vedit Authors.
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

#pragma once

// EYIT tensor files.
//
//   offset  size      field
//   0       4         magic "EYIT"
//   4       2         version (u16, = 1)
//   6       1         dtype code (u8, 1 = float32)
//   7       1         rank (u8)
//   8       8 * rank  dims (u64 each)
//   ...               row-major payload
//
// All integers and floats are little-endian.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vedit/error.hpp"

namespace vedit::io {

inline constexpr std::string_view kTensorMagic = "EYIT";
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> values;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

namespace detail {

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(std::string_view in, std::size_t offset) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<std::uint8_t>(in[offset + i])) << (8 * i);
  }
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Code::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Write via a temporary sibling and rename, so readers never see partial files.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Code::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(FormatError::Code::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError(FormatError::Code::kIo, "cannot rename into " + path.string() + ": " + ec.message());
}

}  // namespace detail

inline std::string encode_tensor(std::span<const std::uint64_t> dims, std::span<const float> values) {
  if (dims.size() > std::numeric_limits<std::uint8_t>::max()) {
    throw FormatError(FormatError::Code::kDimOverflow, "tensor rank exceeds 255");
  }
  std::uint64_t count = 1;
  for (auto d : dims) {
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / d) {
      throw FormatError(FormatError::Code::kDimOverflow, "tensor element count overflows");
    }
    count *= d;
  }
  if (count != values.size()) {
    throw ShapeError("tensor: dims describe " + std::to_string(count) + " values, got " +
                     std::to_string(values.size()));
  }
  std::string out;
  out.reserve(8 + 8 * dims.size() + 4 * values.size());
  out.append(kTensorMagic);
  detail::put_le<std::uint16_t>(out, kTensorVersion);
  out.push_back(static_cast<char>(kDtypeFloat32));
  out.push_back(static_cast<char>(dims.size()));
  for (auto d : dims) detail::put_le<std::uint64_t>(out, d);
  for (float v : values) {
    if (!std::isfinite(v)) throw FormatError(FormatError::Code::kNonFinite, "tensor: non-finite value");
    detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline Tensor decode_tensor(std::string_view bytes) {
  using Code = FormatError::Code;
  if (bytes.size() < 8) throw FormatError(Code::kTruncated, "tensor: header truncated");
  if (bytes.substr(0, 4) != kTensorMagic) {
    throw FormatError(Code::kBadMagic, "tensor: bad magic '" + std::string(bytes.substr(0, 4)) + "'");
  }
  const auto version = detail::get_le<std::uint16_t>(bytes, 4);
  if (version != kTensorVersion) {
    throw FormatError(Code::kUnsupportedVersion,
                      "tensor: unsupported version " + std::to_string(version));
  }
  const auto dtype = static_cast<std::uint8_t>(bytes[6]);
  if (dtype != kDtypeFloat32) {
    throw FormatError(Code::kUnsupportedDtype, "tensor: unsupported dtype " + std::to_string(dtype));
  }
  const std::size_t rank = static_cast<std::uint8_t>(bytes[7]);
  const std::size_t header = 8 + 8 * rank;
  if (bytes.size() < header) throw FormatError(Code::kTruncated, "tensor: dims truncated");
  Tensor t;
  t.dims.resize(rank);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const auto d = detail::get_le<std::uint64_t>(bytes, 8 + 8 * i);
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / 4 / d) {
      throw FormatError(Code::kDimOverflow, "tensor: declared size overflows");
    }
    count *= d;
    t.dims[i] = d;
  }
  const std::uint64_t payload = bytes.size() - header;
  if (payload < count * 4) {
    throw FormatError(Code::kTruncated, "tensor: payload holds " + std::to_string(payload / 4) +
                                            " values, header declares " + std::to_string(count));
  }
  if (payload > count * 4) {
    throw FormatError(Code::kTrailingBytes, "tensor: " + std::to_string(payload - count * 4) +
                                                " bytes after payload");
  }
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    t.values[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, header + 4 * i));
  }
  return t;
}

inline void write_tensor(const std::filesystem::path& path, std::span<const std::uint64_t> dims,
                         std::span<const float> values) {
  detail::write_file_atomic(path, encode_tensor(dims, values));
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_tensor(path, t.dims, t.values);
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  try {
    return decode_tensor(detail::read_file(path));
  } catch (const FormatError& e) {
    if (e.code() == FormatError::Code::kIo) throw;
    throw FormatError(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace vedit::io
