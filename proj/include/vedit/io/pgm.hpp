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

// Binary masks as P5 graymaps: maxval 255, foreground 255, background 0.

#include <cctype>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "vedit/error.hpp"
#include "vedit/io/tensor_file.hpp"
#include "vedit/mask.hpp"

namespace vedit::io {

inline std::string encode_mask_pgm(const BinaryMask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  out.reserve(out.size() + mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out.push_back(mask[i] ? static_cast<char>(255) : '\0');
  return out;
}

inline BinaryMask decode_mask_pgm(std::string_view bytes) {
  using Code = FormatError::Code;
  if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError(Code::kBadPgm, "pgm: not a netpbm file");
  if (bytes[1] != '5') {
    throw FormatError(Code::kBadPgm, "pgm: expected binary P5, found P" + std::string(1, bytes[1]));
  }
  std::size_t pos = 2;
  auto next_number = [&]() -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw FormatError(Code::kBadPgm, "pgm: malformed header");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 30)) throw FormatError(Code::kBadPgm, "pgm: header value too large");
      ++pos;
    }
    return v;
  };
  const std::size_t width = next_number();
  const std::size_t height = next_number();
  const std::size_t maxval = next_number();
  if (width == 0 || height == 0) throw FormatError(Code::kBadPgm, "pgm: empty image");
  if (maxval != 255) throw FormatError(Code::kBadPgm, "pgm: maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError(Code::kBadPgm, "pgm: missing separator before raster");
  }
  ++pos;
  if (bytes.size() - pos != width * height) {
    throw FormatError(Code::kTruncated, "pgm: raster holds " + std::to_string(bytes.size() - pos) +
                                            " bytes, expected " + std::to_string(width * height));
  }
  BinaryMask m(height, width);
  for (std::size_t i = 0; i < width * height; ++i) {
    const auto v = static_cast<unsigned char>(bytes[pos + i]);
    if (v != 0 && v != 255) {
      throw FormatError(Code::kBadPgm, "pgm: value " + std::to_string(v) + " at pixel " +
                                           std::to_string(i) + " is neither 0 nor 255");
    }
    if (v == 255) m.set(i / width, i % width);
  }
  return m;
}

inline void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  detail::write_file_atomic(path, encode_mask_pgm(mask));
}

inline BinaryMask read_mask_pgm(const std::filesystem::path& path) {
  try {
    return decode_mask_pgm(detail::read_file(path));
  } catch (const FormatError& e) {
    if (e.code() == FormatError::Code::kIo) throw;
    throw FormatError(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace vedit::io
