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

// Instance masks from cross-attention maps, contour extraction, hole filling
// and the two-frame temporal overlap.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vedit/error.hpp"
#include "vedit/observations.hpp"

namespace vedit {

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t height, std::size_t width, bool value = false)
      : height_(height), width_(width), bits_(height * width, value ? 1 : 0) {
    if (height == 0 || width == 0) throw ShapeError("binary mask: dimensions must be positive");
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t y, std::size_t x, bool v = true) { bits_[y * width_ + x] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  bool same_shape(const BinaryMask& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_;
  }

  /// True when every set bit of `this` is also set in `o`.
  bool subset_of(const BinaryMask& o) const {
    require_same(o, "subset_of");
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      if (bits_[i] && !o.bits_[i]) return false;
    }
    return true;
  }

  BinaryMask operator|(const BinaryMask& o) const {
    require_same(o, "mask union");
    BinaryMask r = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) r.bits_[i] |= o.bits_[i];
    return r;
  }

  BinaryMask complement() const {
    BinaryMask r = *this;
    for (auto& b : r.bits_) b = b ? 0 : 1;
    return r;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  void require_same(const BinaryMask& o, const char* what) const {
    if (!same_shape(o)) {
      throw ShapeError(std::string(what) + ": mask dimensions differ (" + std::to_string(height_) +
                       "x" + std::to_string(width_) + " vs " + std::to_string(o.height_) + "x" +
                       std::to_string(o.width_) + ")");
    }
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

enum class AttentionMode {
  kSoftmax,  // row softmax of q k^T / sqrt(d_k)
  kRaw,      // unnormalized q k^T, for ablations
};

inline std::string_view to_string(AttentionMode m) {
  return m == AttentionMode::kSoftmax ? "softmax" : "raw";
}

inline AttentionMode parse_attention_mode(std::string_view s) {
  if (s == "softmax") return AttentionMode::kSoftmax;
  if (s == "raw") return AttentionMode::kRaw;
  throw ValidationError("unknown attention mode '" + std::string(s) + "'");
}

/// Pixels x words map, row-major.
struct ProbMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t height = 0;  // rows == height * width
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

inline ProbMatrix attention_prob(const AttentionRecord& rec,
                                 AttentionMode mode = AttentionMode::kSoftmax) {
  rec.validate();
  const std::size_t n = rec.n_tokens();
  const std::size_t words = rec.n_words();
  const std::size_t dk = rec.d_k;
  ProbMatrix p{n, words, rec.height, rec.width, std::vector<double>(n * words)};
  const double scale = mode == AttentionMode::kSoftmax ? 1.0 / std::sqrt(static_cast<double>(dk)) : 1.0;
  std::vector<double> logits(words);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t w = 0; w < words; ++w) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dk; ++k) {
        acc += static_cast<double>(rec.q[i * dk + k]) * rec.k[w * dk + k];
      }
      logits[w] = acc * scale;
    }
    if (mode == AttentionMode::kSoftmax) {
      const double mx = *std::max_element(logits.begin(), logits.end());
      double sum = 0.0;
      for (double& l : logits) {
        l = std::exp(l - mx);
        sum += l;
      }
      for (double& l : logits) l /= sum;
    }
    std::copy(logits.begin(), logits.end(), p.values.begin() + static_cast<std::ptrdiff_t>(i * words));
  }
  return p;
}

enum class Connectivity { kFour = 4, kEight = 8 };

struct MaskConfig {
  double tau = 0.3;
  /// Inclusive range of sampling steps to average; unset bounds are open.
  std::optional<std::size_t> step_begin;
  std::optional<std::size_t> step_end;
  /// Layers to average. Empty: every layer whose attention grid is
  /// attention_side x attention_side.
  std::vector<std::string> layers;
  std::size_t attention_side = 16;
  std::vector<std::size_t> words{1};
  AttentionMode mode = AttentionMode::kSoftmax;
  Connectivity connectivity = Connectivity::kFour;

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("mask: tau must lie in (0, 1)");
    if (step_begin && step_end && *step_begin > *step_end) {
      throw ValidationError("mask: empty step range");
    }
    if (layers.empty() && attention_side == 0) {
      throw ValidationError("mask: attention_side must be positive when no layers are listed");
    }
    if (words.empty()) throw ValidationError("mask: at least one word index required");
  }

  bool selects(const AttentionRecord& r) const {
    if (step_begin && r.step_index < *step_begin) return false;
    if (step_end && r.step_index > *step_end) return false;
    if (layers.empty()) return r.height == attention_side && r.width == attention_side;
    return std::find(layers.begin(), layers.end(), r.layer_id) != layers.end();
  }
};

/// Mean attention map over the records selected by `cfg`.
inline ProbMatrix aggregate(const std::vector<AttentionRecord>& records, const MaskConfig& cfg) {
  std::optional<ProbMatrix> acc;
  std::size_t used = 0;
  for (const auto& r : records) {
    if (!cfg.selects(r)) continue;
    ProbMatrix p = attention_prob(r, cfg.mode);
    if (!acc) {
      acc = std::move(p);
    } else {
      if (p.height != acc->height || p.width != acc->width || p.cols != acc->cols) {
        throw ShapeError("aggregate: record (frame " + std::to_string(r.frame_index) + ", step " +
                         std::to_string(r.step_index) + ", layer " + r.layer_id +
                         ") has a different attention shape");
      }
      for (std::size_t i = 0; i < p.values.size(); ++i) acc->values[i] += p.values[i];
    }
    ++used;
  }
  if (!acc) throw ValidationError("aggregate: no attention records match the selection");
  for (double& v : acc->values) v /= static_cast<double>(used);
  return std::move(*acc);
}

struct WordSelection {
  std::vector<std::uint8_t> flags;

  static WordSelection from_indices(const std::vector<std::size_t>& indices, std::size_t n_words) {
    WordSelection s{std::vector<std::uint8_t>(n_words, 0)};
    for (std::size_t i : indices) {
      if (i >= n_words) {
        throw ValidationError("word index " + std::to_string(i) + " out of range (" +
                              std::to_string(n_words) + " words)");
      }
      s.flags[i] = 1;
    }
    s.validate();
    return s;
  }

  void validate() const {
    if (std::none_of(flags.begin(), flags.end(), [](std::uint8_t f) { return f != 0; })) {
      throw ValidationError("word selection: no word selected");
    }
  }
};

/// Pixel p is foreground iff the selected words' summed probability exceeds tau.
inline BinaryMask extract_mask(const ProbMatrix& prob, const WordSelection& sel, double tau,
                               std::size_t height, std::size_t width) {
  if (prob.cols != sel.flags.size()) {
    throw ShapeError("extract_mask: " + std::to_string(prob.cols) + " words but selection has " +
                     std::to_string(sel.flags.size()));
  }
  if (height * width != prob.rows) {
    throw ShapeError("extract_mask: " + std::to_string(height) + "x" + std::to_string(width) +
                     " does not cover " + std::to_string(prob.rows) + " pixels");
  }
  sel.validate();
  BinaryMask m(height, width);
  for (std::size_t p = 0; p < prob.rows; ++p) {
    double mass = 0.0;
    for (std::size_t w = 0; w < prob.cols; ++w) {
      if (sel.flags[w]) mass += prob.at(p, w);
    }
    if (mass > tau) m.set(p / width, p % width);
  }
  return m;
}

struct Pixel {
  std::size_t y = 0;
  std::size_t x = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

using Contour = std::vector<Pixel>;

namespace detail {

// Neighbour offsets; the first four are the 4-neighbourhood.
inline constexpr int kDy[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
inline constexpr int kDx[8] = {0, 0, -1, 1, -1, 1, -1, 1};

inline std::vector<int> label_components(const BinaryMask& m, Connectivity conn, int& count) {
  const std::size_t H = m.height(), W = m.width();
  const int nbrs = static_cast<int>(conn);
  std::vector<int> label(H * W, -1);
  count = 0;
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < H * W; ++start) {
    if (!m[start] || label[start] >= 0) continue;
    label[start] = count;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      const long cy = static_cast<long>(cur / W), cx = static_cast<long>(cur % W);
      for (int k = 0; k < nbrs; ++k) {
        const long ny = cy + kDy[k], nx = cx + kDx[k];
        if (ny < 0 || nx < 0 || ny >= static_cast<long>(H) || nx >= static_cast<long>(W)) continue;
        const std::size_t idx = static_cast<std::size_t>(ny) * W + static_cast<std::size_t>(nx);
        if (m[idx] && label[idx] < 0) {
          label[idx] = count;
          queue.push_back(idx);
        }
      }
    }
    ++count;
  }
  return label;
}

}  // namespace detail

/// Boundary pixels of every foreground component: pixels with a 4-neighbour
/// outside their component or outside the image. Components are ordered by
/// their first pixel in raster order; each contour is in raster order.
inline std::vector<Contour> contours(const BinaryMask& mask,
                                     Connectivity conn = Connectivity::kFour) {
  int count = 0;
  const std::vector<int> label = detail::label_components(mask, conn, count);
  std::vector<Contour> out(static_cast<std::size_t>(count));
  const std::size_t H = mask.height(), W = mask.width();
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const int l = label[y * W + x];
      if (l < 0) continue;
      bool boundary = false;
      for (int k = 0; k < 4 && !boundary; ++k) {
        const long ny = static_cast<long>(y) + detail::kDy[k];
        const long nx = static_cast<long>(x) + detail::kDx[k];
        if (ny < 0 || nx < 0 || ny >= static_cast<long>(H) || nx >= static_cast<long>(W)) {
          boundary = true;
        } else if (label[static_cast<std::size_t>(ny) * W + static_cast<std::size_t>(nx)] != l) {
          boundary = true;
        }
      }
      if (boundary) out[static_cast<std::size_t>(l)].push_back({y, x});
    }
  }
  return out;
}

inline BinaryMask rasterize(const std::vector<Contour>& cs, std::size_t height, std::size_t width) {
  BinaryMask m(height, width);
  for (const auto& c : cs) {
    for (const Pixel& p : c) m.set(p.y, p.x);
  }
  return m;
}

/// Foreground plus every background pixel that a 4-connected flood from the
/// image border cannot reach.
inline BinaryMask fill(const BinaryMask& mask) {
  const std::size_t H = mask.height(), W = mask.width();
  std::vector<std::uint8_t> outside(H * W, 0);
  std::deque<std::size_t> queue;
  auto seed = [&](std::size_t y, std::size_t x) {
    const std::size_t i = y * W + x;
    if (!mask[i] && !outside[i]) {
      outside[i] = 1;
      queue.push_back(i);
    }
  };
  for (std::size_t x = 0; x < W; ++x) {
    seed(0, x);
    seed(H - 1, x);
  }
  for (std::size_t y = 0; y < H; ++y) {
    seed(y, 0);
    seed(y, W - 1);
  }
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    const std::size_t y = cur / W, x = cur % W;
    if (y > 0) seed(y - 1, x);
    if (y + 1 < H) seed(y + 1, x);
    if (x > 0) seed(y, x - 1);
    if (x + 1 < W) seed(y, x + 1);
  }
  BinaryMask out(H, W);
  for (std::size_t i = 0; i < H * W; ++i) {
    if (!outside[i]) out.set(i / W, i % W);
  }
  return out;
}

/// fill(contours(prev) U contours(cur)) U prev U cur.
inline BinaryMask temporal_overlap(const BinaryMask& prev, const BinaryMask& cur,
                                   Connectivity conn = Connectivity::kFour) {
  if (!prev.same_shape(cur)) throw ShapeError("temporal_overlap: mask dimensions differ");
  const BinaryMask edges = rasterize(contours(prev, conn), prev.height(), prev.width()) |
                           rasterize(contours(cur, conn), cur.height(), cur.width());
  return fill(edges) | prev | cur;
}

inline BinaryMask upsample_nearest(const BinaryMask& mask, std::size_t height, std::size_t width) {
  if (height < mask.height() || width < mask.width() || height % mask.height() != 0 ||
      width % mask.width() != 0) {
    throw ValidationError("upsample_nearest: " + std::to_string(mask.height()) + "x" +
                          std::to_string(mask.width()) + " -> " + std::to_string(height) + "x" +
                          std::to_string(width) + " is not an integer upscale");
  }
  const std::size_t sy = height / mask.height(), sx = width / mask.width();
  BinaryMask out(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) out.set(y, x, mask.at(y / sy, x / sx));
  }
  return out;
}

}  // namespace vedit
