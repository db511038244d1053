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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vedit/error.hpp"

namespace vedit {

/// Channel-major C x H x W grid of latent values.
class LatentGrid {
 public:
  LatentGrid() = default;

  LatentGrid(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f)
      : channels_(channels), height_(height), width_(width),
        values_(checked_size(channels, height, width), fill) {}

  LatentGrid(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> values)
      : channels_(channels), height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != checked_size(channels, height, width)) {
      throw ShapeError("latent grid: value count does not match C*H*W");
    }
    for (float v : values_) {
      if (!std::isfinite(v)) throw ValidationError("latent grid: non-finite value");
    }
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return values_[(c * height_ + y) * width_ + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[(c * height_ + y) * width_ + x];
  }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  bool same_shape(const LatentGrid& o) const noexcept {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  std::string shape_string() const {
    return std::to_string(channels_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
  }

  bool all_finite() const noexcept {
    for (float v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  double l2_norm() const noexcept {
    double acc = 0.0;
    for (float v : values_) acc += static_cast<double>(v) * v;
    return std::sqrt(acc);
  }

  friend bool operator==(const LatentGrid&, const LatentGrid&) = default;

 private:
  static std::size_t checked_size(std::size_t c, std::size_t h, std::size_t w) {
    if (c == 0 || h == 0 || w == 0) throw ShapeError("latent grid: dimensions must be positive");
    return c * h * w;
  }

  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> values_;
};

inline void require_same_shape(const LatentGrid& a, const LatentGrid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

inline double max_abs_diff(const LatentGrid& a, const LatentGrid& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(av[i]) - bv[i]));
  }
  return m;
}

/// Ordered frames sharing one latent shape.
struct LatentVideo {
  std::vector<LatentGrid> frames;

  void validate() const {
    if (frames.empty()) throw ValidationError("latent video: at least one frame required");
    for (std::size_t f = 1; f < frames.size(); ++f) {
      if (!frames[f].same_shape(frames[0])) {
        throw ShapeError("latent video: frame " + std::to_string(f) + " has shape " +
                         frames[f].shape_string() + ", expected " + frames[0].shape_string());
      }
    }
  }
};

}  // namespace vedit
