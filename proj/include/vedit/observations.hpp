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

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vedit/error.hpp"

namespace vedit {

/// One frame's spatial-attention output tokens at one layer, n_tokens x dim, row-major.
class FeatureTokenMap {
 public:
  FeatureTokenMap() = default;

  FeatureTokenMap(std::size_t frame_index, std::string layer_id, std::size_t n_tokens,
                  std::size_t dim, std::vector<float> tokens)
      : frame_index_(frame_index), layer_id_(std::move(layer_id)), n_tokens_(n_tokens), dim_(dim),
        tokens_(std::move(tokens)) {
    if (n_tokens_ == 0 || dim_ == 0) throw ShapeError("feature map: n_tokens and dim must be >= 1");
    if (tokens_.size() != n_tokens_ * dim_) {
      throw ShapeError("feature map: token buffer holds " + std::to_string(tokens_.size()) +
                       " values, expected " + std::to_string(n_tokens_ * dim_));
    }
    for (float v : tokens_) {
      if (!std::isfinite(v)) throw ValidationError("feature map: non-finite token value");
    }
  }

  std::size_t frame_index() const noexcept { return frame_index_; }
  void set_frame_index(std::size_t f) noexcept { frame_index_ = f; }
  const std::string& layer_id() const noexcept { return layer_id_; }
  std::size_t n_tokens() const noexcept { return n_tokens_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const float> tokens() const noexcept { return tokens_; }
  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(tokens_).subspan(i * dim_, dim_);
  }

  /// Euclidean row norms, present once compute_norms() has run.
  const std::optional<std::vector<double>>& norms() const noexcept { return norms_; }

  void compute_norms() {
    std::vector<double> n(n_tokens_);
    for (std::size_t i = 0; i < n_tokens_; ++i) {
      double acc = 0.0;
      for (float v : row(i)) acc += static_cast<double>(v) * v;
      n[i] = std::sqrt(acc);
    }
    norms_ = std::move(n);
  }

  bool same_layout(const FeatureTokenMap& o) const noexcept {
    return n_tokens_ == o.n_tokens_ && dim_ == o.dim_ && layer_id_ == o.layer_id_;
  }

  std::string shape_string() const {
    return std::to_string(n_tokens_) + "x" + std::to_string(dim_) + " @" + layer_id_;
  }

 private:
  std::size_t frame_index_ = 0;
  std::string layer_id_;
  std::size_t n_tokens_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> tokens_;
  std::optional<std::vector<double>> norms_;
};

/// Cross-attention queries (image tokens) and keys (prompt words) for one
/// (frame, step, layer, head). n_tokens must equal height * width.
struct AttentionRecord {
  std::size_t frame_index = 0;
  std::size_t step_index = 0;
  std::string layer_id;
  std::size_t head_index = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t d_k = 0;
  std::vector<float> q;  // (height*width) x d_k
  std::vector<float> k;  // n_words x d_k

  std::size_t n_tokens() const noexcept { return height * width; }
  std::size_t n_words() const noexcept { return d_k == 0 ? 0 : k.size() / d_k; }

  void validate() const {
    if (height == 0 || width == 0) throw ShapeError("attention record: empty spatial shape");
    if (d_k == 0) throw ShapeError("attention record: d_k must be positive");
    if (q.size() != n_tokens() * d_k) {
      throw ShapeError("attention record: q has " + std::to_string(q.size()) +
                       " values, expected " + std::to_string(n_tokens() * d_k));
    }
    if (k.empty() || k.size() % d_k != 0) {
      throw ShapeError("attention record: k is not an n_words x d_k matrix");
    }
    for (float v : q) {
      if (!std::isfinite(v)) throw ValidationError("attention record: non-finite q");
    }
    for (float v : k) {
      if (!std::isfinite(v)) throw ValidationError("attention record: non-finite k");
    }
  }
};

/// What a denoiser exposes about its internals at one evaluation.
struct Observations {
  std::vector<FeatureTokenMap> features;
  std::vector<AttentionRecord> attention;
};

}  // namespace vedit
