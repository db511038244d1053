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

// Conversions between in-memory types and Tensor, plus frame-directory helpers
// (`frame_0000.eyit`, `frame_0001.eyit`, ...).

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vedit/error.hpp"
#include "vedit/io/tensor_file.hpp"
#include "vedit/latent.hpp"
#include "vedit/observations.hpp"

namespace vedit::io {

inline Tensor to_tensor(const LatentGrid& g) {
  return Tensor{{g.channels(), g.height(), g.width()}, std::vector<float>(g.values().begin(), g.values().end())};
}

inline LatentGrid to_latent(const Tensor& t, const std::string& what = "tensor") {
  if (t.dims.size() != 3) {
    throw ShapeError(what + ": expected a rank-3 (C, H, W) tensor, got rank " + std::to_string(t.dims.size()));
  }
  return LatentGrid(t.dims[0], t.dims[1], t.dims[2], t.values);
}

inline Tensor to_tensor(const FeatureTokenMap& fm) {
  return Tensor{{fm.n_tokens(), fm.dim()}, std::vector<float>(fm.tokens().begin(), fm.tokens().end())};
}

inline FeatureTokenMap to_features(const Tensor& t, std::size_t frame, const std::string& layer,
                                   const std::string& what = "tensor") {
  if (t.dims.size() != 2) {
    throw ShapeError(what + ": expected a rank-2 (tokens, dim) tensor, got rank " + std::to_string(t.dims.size()));
  }
  return FeatureTokenMap(frame, layer, t.dims[0], t.dims[1], t.values);
}

inline std::string frame_name(std::size_t frame, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu.%s", frame, ext);
  return buf;
}

/// Files named frame_NNNN.<ext> in `dir`, sorted by name.
inline std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir, const std::string& ext) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("frame_", 0) == 0 && e.path().extension() == "." + ext) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline void write_latent_frames(const std::filesystem::path& dir, const LatentVideo& video) {
  std::filesystem::create_directories(dir);
  for (std::size_t f = 0; f < video.frames.size(); ++f) {
    write_tensor(dir / frame_name(f, "eyit"), to_tensor(video.frames[f]));
  }
}

inline LatentVideo read_latent_frames(const std::filesystem::path& dir) {
  LatentVideo v;
  for (const auto& p : list_frames(dir, "eyit")) v.frames.push_back(to_latent(read_tensor(p), p.string()));
  if (v.frames.empty()) throw ValidationError("no frame_NNNN.eyit files in " + dir.string());
  return v;
}

}  // namespace vedit::io
