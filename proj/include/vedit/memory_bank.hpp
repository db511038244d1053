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

// Bounded per-layer cache of frame feature maps.
//
// Once full, an insertion scans the neighbour distances k_1..k_{n-1} of the
// stored frames from the newest pair backwards and evicts the right-hand
// member of the first pair whose distance does not exceed the distance k'
// between the newest stored frame and the incoming one. The oldest entry is
// never evicted. If no pair qualifies the incoming frame is dropped.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vedit/error.hpp"
#include "vedit/observations.hpp"

namespace vedit {

enum class DistanceMetric {
  kFrameGap,
  kMeanTokenCosine,
};

inline std::string_view to_string(DistanceMetric m) {
  return m == DistanceMetric::kFrameGap ? "frame-gap" : "mean-token-cosine";
}

inline DistanceMetric parse_distance_metric(std::string_view s) {
  if (s == "frame-gap") return DistanceMetric::kFrameGap;
  if (s == "mean-token-cosine" || s == "mean-token-cosine-distance") {
    return DistanceMetric::kMeanTokenCosine;
  }
  throw ValidationError("unknown sfm metric '" + std::string(s) +
                        "' (expected frame-gap or mean-token-cosine)");
}

namespace detail {

inline std::vector<double> mean_row(const FeatureTokenMap& m) {
  std::vector<double> mean(m.dim(), 0.0);
  for (std::size_t i = 0; i < m.n_tokens(); ++i) {
    auto r = m.row(i);
    for (std::size_t d = 0; d < m.dim(); ++d) mean[d] += r[d];
  }
  for (double& v : mean) v /= static_cast<double>(m.n_tokens());
  return mean;
}

inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    dot += a[d] * b[d];
    na += a[d] * a[d];
    nb += b[d] * b[d];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  const double cosine = denom > 0.0 ? dot / denom : 0.0;
  return std::max(0.0, 1.0 - cosine);
}

inline double frame_gap(std::size_t a, std::size_t b) {
  return a > b ? static_cast<double>(a - b) : static_cast<double>(b - a);
}

}  // namespace detail

inline double entry_distance(const FeatureTokenMap& a, const FeatureTokenMap& b,
                             DistanceMetric metric) {
  if (metric == DistanceMetric::kFrameGap) return detail::frame_gap(a.frame_index(), b.frame_index());
  if (a.dim() != b.dim()) {
    throw ShapeError("entry_distance: token dims differ (" + a.shape_string() + " vs " +
                     b.shape_string() + ")");
  }
  return detail::cosine_distance(detail::mean_row(a), detail::mean_row(b));
}

struct InsertReport {
  std::size_t frame_index = 0;
  bool admitted = false;
  std::optional<std::size_t> evicted_frame;
};

/// Row provenance inside the concatenated memory.
struct TokenSource {
  std::size_t frame_index = 0;
  std::size_t token_index = 0;

  friend bool operator==(const TokenSource&, const TokenSource&) = default;
};

/// All stored tokens stacked in (entry, token) order.
struct MemoryTokens {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;        // rows x dim
  std::vector<double> norms;        // one per row
  std::vector<TokenSource> provenance;

  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(values).subspan(i * dim, dim);
  }
};

class MemoryBank {
 public:
  explicit MemoryBank(std::size_t capacity, DistanceMetric metric = DistanceMetric::kFrameGap)
      : capacity_(capacity), metric_(metric) {
    if (capacity_ == 0) throw ValidationError("memory bank: capacity must be >= 1");
  }

  std::size_t capacity() const noexcept { return capacity_; }
  DistanceMetric metric() const noexcept { return metric_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<FeatureTokenMap>& entries() const noexcept { return entries_; }

  std::vector<std::size_t> frame_indices() const {
    std::vector<std::size_t> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.frame_index());
    return out;
  }

  /// Token values currently held (sum of n_tokens * dim over entries).
  std::size_t retained_floats() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.n_tokens() * e.dim();
    return n;
  }

  InsertReport insert(FeatureTokenMap entry) {
    if (!entries_.empty()) {
      const auto& last = entries_.back();
      if (entry.frame_index() <= last.frame_index()) {
        throw ValidationError("memory bank: frame " + std::to_string(entry.frame_index()) +
                              " does not follow stored frame " +
                              std::to_string(last.frame_index()));
      }
      if (!entry.same_layout(entries_.front())) {
        throw ShapeError("memory bank: entry " + entry.shape_string() + " does not match bank " +
                         entries_.front().shape_string());
      }
    }
    if (!entry.norms()) entry.compute_norms();

    InsertReport report{entry.frame_index(), false, std::nullopt};
    if (entries_.size() < capacity_) {
      append(std::move(entry));
      report.admitted = true;
      return report;
    }

    const std::size_t n = entries_.size();
    std::vector<double> gaps(n - 1);  // gaps[i] = distance(entries[i], entries[i + 1])
    for (std::size_t i = 0; i + 1 < n; ++i) gaps[i] = distance(i, i + 1);
    const std::vector<double> incoming_mean =
        metric_ == DistanceMetric::kMeanTokenCosine ? detail::mean_row(entry) : std::vector<double>{};
    const double k_new = metric_ == DistanceMetric::kFrameGap
                             ? detail::frame_gap(entries_.back().frame_index(), entry.frame_index())
                             : detail::cosine_distance(means_.back(), incoming_mean);

    // Pseudocode index j (1-based) runs n-1 .. 1; k_j lives at gaps[j - 1] and
    // the evicted m_{j+1} at entries_[j].
    for (std::size_t j = n - 1; j >= 1; --j) {
      if (gaps[j - 1] <= k_new) {
        report.evicted_frame = entries_[j].frame_index();
        entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(j));
        if (!means_.empty()) means_.erase(means_.begin() + static_cast<std::ptrdiff_t>(j));
        append(std::move(entry));
        report.admitted = true;
        break;
      }
    }
    return report;
  }

  MemoryTokens concat_tokens() const {
    if (entries_.empty()) throw ValidationError("concat_tokens: memory bank is empty");
    MemoryTokens out;
    const auto& first = entries_.front();
    out.dim = first.dim();
    out.rows = entries_.size() * first.n_tokens();
    out.values.reserve(out.rows * out.dim);
    out.norms.reserve(out.rows);
    out.provenance.reserve(out.rows);
    for (const auto& e : entries_) {
      out.values.insert(out.values.end(), e.tokens().begin(), e.tokens().end());
      const auto& norms = *e.norms();
      out.norms.insert(out.norms.end(), norms.begin(), norms.end());
      for (std::size_t t = 0; t < e.n_tokens(); ++t) out.provenance.push_back({e.frame_index(), t});
    }
    return out;
  }

 private:
  double distance(std::size_t a, std::size_t b) const {
    if (metric_ == DistanceMetric::kFrameGap) {
      return detail::frame_gap(entries_[a].frame_index(), entries_[b].frame_index());
    }
    return detail::cosine_distance(means_[a], means_[b]);
  }

  void append(FeatureTokenMap entry) {
    if (metric_ == DistanceMetric::kMeanTokenCosine) means_.push_back(detail::mean_row(entry));
    entries_.push_back(std::move(entry));
  }

  std::size_t capacity_;
  DistanceMetric metric_;
  std::vector<FeatureTokenMap> entries_;
  std::vector<std::vector<double>> means_;  // per-entry mean rows, cosine metric only
};

}  // namespace vedit
