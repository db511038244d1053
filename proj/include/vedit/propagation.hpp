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

// Most-similar token propagation: every token of the current frame is
// replaced by its nearest stored token when their similarity reaches lambda.
// Replacement copies the stored token; tokens are never blended.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vedit/error.hpp"
#include "vedit/memory_bank.hpp"
#include "vedit/observations.hpp"

namespace vedit {

enum class SimilarityKind {
  kCosine,
  kInnerProduct,  // raw dot product, for ablations
};

inline std::string_view to_string(SimilarityKind k) {
  return k == SimilarityKind::kCosine ? "cosine" : "inner-product";
}

inline SimilarityKind parse_similarity(std::string_view s) {
  if (s == "cosine") return SimilarityKind::kCosine;
  if (s == "inner-product" || s == "dot") return SimilarityKind::kInnerProduct;
  throw ValidationError("unknown similarity '" + std::string(s) + "'");
}

struct PropagationConfig {
  double lambda = 0.9;
  SimilarityKind similarity = SimilarityKind::kCosine;

  void validate() const {
    if (!std::isfinite(lambda)) throw ValidationError("propagation: lambda must be finite");
  }
};

struct PropagationResult {
  std::size_t n_tokens = 0;
  std::size_t dim = 0;
  std::vector<float> tokens_out;                  // n_tokens x dim
  std::vector<std::optional<TokenSource>> source;  // nullopt: token kept as is
  std::vector<double> best_similarity;            // -1 when the bank is empty

  std::size_t replaced_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : source) n += s.has_value();
    return n;
  }

  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(tokens_out).subspan(i * dim, dim);
  }

  FeatureTokenMap as_feature_map(std::size_t frame_index, std::string layer_id) const {
    return FeatureTokenMap(frame_index, std::move(layer_id), n_tokens, dim, tokens_out);
  }
};

/// Dense n_tokens x memory_rows score matrix, row-major.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

struct BestMatch {
  std::size_t column = 0;
  double score = 0.0;
};

namespace detail {

// Sequential accumulation so the blocked and brute-force paths agree bit for bit.
inline double dot(const float* a, const float* b, std::size_t d) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  return s;
}

inline std::vector<double> current_norms(const FeatureTokenMap& current) {
  if (current.norms()) return *current.norms();
  std::vector<double> n(current.n_tokens());
  for (std::size_t i = 0; i < n.size(); ++i) {
    double acc = 0.0;
    for (float v : current.row(i)) acc += static_cast<double>(v) * v;
    n[i] = std::sqrt(acc);
  }
  return n;
}

// Score of current row i against memory row j; zero-norm rows score 0 under cosine.
struct Scorer {
  const FeatureTokenMap& current;
  const MemoryTokens& memory;
  SimilarityKind kind;
  std::vector<double> cur_norms;

  Scorer(const FeatureTokenMap& c, const MemoryTokens& m, SimilarityKind k)
      : current(c), memory(m), kind(k), cur_norms(current_norms(c)) {}

  double operator()(std::size_t i, std::size_t j) const noexcept {
    const double d = dot(current.tokens().data() + i * current.dim(),
                         memory.values.data() + j * memory.dim, memory.dim);
    if (kind == SimilarityKind::kInnerProduct) return d;
    const double na = cur_norms[i], nb = memory.norms[j];
    return (na == 0.0 || nb == 0.0) ? 0.0 : d / (na * nb);
  }
};

inline void check_compatible(const FeatureTokenMap& current, const MemoryTokens& memory) {
  if (memory.rows == 0) throw ValidationError("similarity: memory is empty");
  if (current.dim() != memory.dim) {
    throw ShapeError("similarity: token dim " + std::to_string(current.dim()) +
                     " does not match memory dim " + std::to_string(memory.dim));
  }
}

}  // namespace detail

inline ScoreMatrix similarity_scores(const FeatureTokenMap& current, const MemoryTokens& memory,
                                     SimilarityKind kind = SimilarityKind::kCosine) {
  detail::check_compatible(current, memory);
  const detail::Scorer score(current, memory, kind);
  ScoreMatrix out{current.n_tokens(), memory.rows, {}};
  out.values.resize(out.rows * out.cols);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out.values[i * out.cols + j] = score(i, j);
  }
  return out;
}

/// Per-row argmax; the lowest column wins ties.
inline std::vector<BestMatch> select_best(const ScoreMatrix& scores) {
  if (scores.rows == 0 || scores.cols == 0) throw ValidationError("select_best: empty score matrix");
  std::vector<BestMatch> best(scores.rows);
  for (std::size_t i = 0; i < scores.rows; ++i) {
    BestMatch b{0, scores.at(i, 0)};
    for (std::size_t j = 1; j < scores.cols; ++j) {
      if (scores.at(i, j) > b.score) b = {j, scores.at(i, j)};
    }
    best[i] = b;
  }
  return best;
}

namespace detail {

inline PropagationResult identity_result(const FeatureTokenMap& current) {
  PropagationResult r;
  r.n_tokens = current.n_tokens();
  r.dim = current.dim();
  r.tokens_out.assign(current.tokens().begin(), current.tokens().end());
  r.source.assign(r.n_tokens, std::nullopt);
  r.best_similarity.assign(r.n_tokens, -1.0);
  return r;
}

inline void apply_matches(PropagationResult& r, const MemoryTokens& memory,
                          const std::vector<BestMatch>& best, double lambda) {
  for (std::size_t i = 0; i < r.n_tokens; ++i) {
    r.best_similarity[i] = best[i].score;
    if (best[i].score >= lambda) {
      const auto src = memory.row(best[i].column);
      std::copy(src.begin(), src.end(), r.tokens_out.begin() + static_cast<std::ptrdiff_t>(i * r.dim));
      r.source[i] = memory.provenance[best[i].column];
    }
  }
}

}  // namespace detail

/// Propagation against an already concatenated memory. Scores are computed in
/// row x column tiles and reduced to a running argmax without materializing
/// the full score matrix.
inline PropagationResult propagate(const FeatureTokenMap& current, const MemoryTokens& memory,
                                   const PropagationConfig& cfg) {
  cfg.validate();
  detail::check_compatible(current, memory);
  constexpr std::size_t kRowBlock = 32;
  constexpr std::size_t kColBlock = 128;

  const detail::Scorer score(current, memory, cfg.similarity);
  const std::size_t n = current.n_tokens();
  const std::size_t m = memory.rows;
  std::vector<BestMatch> best(n, BestMatch{0, -std::numeric_limits<double>::infinity()});
  for (std::size_t i0 = 0; i0 < n; i0 += kRowBlock) {
    const std::size_t i1 = std::min(n, i0 + kRowBlock);
    for (std::size_t j0 = 0; j0 < m; j0 += kColBlock) {
      const std::size_t j1 = std::min(m, j0 + kColBlock);
      for (std::size_t i = i0; i < i1; ++i) {
        BestMatch b = best[i];
        for (std::size_t j = j0; j < j1; ++j) {
          const double s = score(i, j);
          if (s > b.score) b = {j, s};
        }
        best[i] = b;
      }
    }
  }
  PropagationResult r = detail::identity_result(current);
  detail::apply_matches(r, memory, best, cfg.lambda);
  return r;
}

inline PropagationResult propagate(const FeatureTokenMap& current, const MemoryBank& bank,
                                   const PropagationConfig& cfg) {
  cfg.validate();
  if (bank.empty()) return detail::identity_result(current);
  return propagate(current, bank.concat_tokens(), cfg);
}

/// Reference implementation: explicit loops over stored frames and tokens,
/// norms recomputed for every pair.
inline PropagationResult propagate_bruteforce(const FeatureTokenMap& current,
                                              const MemoryBank& bank,
                                              const PropagationConfig& cfg) {
  cfg.validate();
  PropagationResult r = detail::identity_result(current);
  if (bank.empty()) return r;
  const std::size_t dim = current.dim();
  if (bank.entries().front().dim() != dim) {
    throw ShapeError("propagate_bruteforce: token dim mismatch");
  }
  for (std::size_t i = 0; i < current.n_tokens(); ++i) {
    auto a = current.row(i);
    bool found = false;
    double best = 0.0;
    const FeatureTokenMap* best_entry = nullptr;
    std::size_t best_token = 0;
    for (const auto& entry : bank.entries()) {
      for (std::size_t t = 0; t < entry.n_tokens(); ++t) {
        auto b = entry.row(t);
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          dot += static_cast<double>(a[k]) * static_cast<double>(b[k]);
          na += static_cast<double>(a[k]) * static_cast<double>(a[k]);
          nb += static_cast<double>(b[k]) * static_cast<double>(b[k]);
        }
        double s = dot;
        if (cfg.similarity == SimilarityKind::kCosine) {
          na = std::sqrt(na);
          nb = std::sqrt(nb);
          s = (na == 0.0 || nb == 0.0) ? 0.0 : dot / (na * nb);
        }
        if (!found || s > best) {
          found = true;
          best = s;
          best_entry = &entry;
          best_token = t;
        }
      }
    }
    r.best_similarity[i] = best;
    if (best >= cfg.lambda) {
      auto src = best_entry->row(best_token);
      for (std::size_t k = 0; k < dim; ++k) r.tokens_out[i * dim + k] = src[k];
      r.source[i] = TokenSource{best_entry->frame_index(), best_token};
    }
  }
  return r;
}

}  // namespace vedit
