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

// Frame-by-frame video editing: DDIM inversion of each source frame, then
// guided sampling whose step hook propagates features against the per-layer
// memory banks, stages one bank entry per layer for the end of the frame, builds the instance mask
// from cross-attention and injects source latents into the background.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vedit/blend.hpp"
#include "vedit/diffusion.hpp"
#include "vedit/error.hpp"
#include "vedit/latent.hpp"
#include "vedit/mask.hpp"
#include "vedit/memory_bank.hpp"
#include "vedit/observations.hpp"
#include "vedit/propagation.hpp"

namespace vedit {

/// How the source latent at each sampling position is obtained for injection.
enum class SourceTrajectory {
  kCached,     // keep the whole inversion trajectory of the current frame
  kRecompute,  // keep z0 only and re-run inversion up to the needed position
};

inline std::string_view to_string(SourceTrajectory s) {
  return s == SourceTrajectory::kCached ? "cached" : "recompute";
}

inline SourceTrajectory parse_source_trajectory(std::string_view s) {
  if (s == "cached") return SourceTrajectory::kCached;
  if (s == "recompute") return SourceTrajectory::kRecompute;
  throw ValidationError("unknown source trajectory mode '" + std::string(s) + "'");
}

struct EditConfig {
  std::size_t steps = 50;
  double beta_start = 0.00085;
  double beta_end = 0.012;
  double guidance = 7.5;
  PropagationConfig propagation;  // lambda = 0.9
  std::size_t sfm_capacity = 5;
  DistanceMetric sfm_metric = DistanceMetric::kFrameGap;
  /// Sampling step at which each frame's propagated features enter the bank.
  std::optional<std::size_t> sfm_update_step;  // default: steps / 2
  MaskConfig mask;                              // tau = 0.3
  InjectionWindow injection;                    // [0.2, 1.0] of elapsed steps
  std::uint64_t seed = 0;
  SourceTrajectory source_trajectory = SourceTrajectory::kRecompute;
  /// Keep every frame's propagated features from the bank-update step.
  bool collect_features = false;
  /// Use this mask (latent resolution) instead of extracting one.
  std::optional<BinaryMask> fixed_mask;

  std::size_t resolved_sfm_step(std::size_t total_steps) const {
    const std::size_t s = sfm_update_step.value_or(total_steps / 2);
    if (s >= total_steps) {
      throw ValidationError("sfm_update_step " + std::to_string(s) + " outside [0, " +
                            std::to_string(total_steps) + ")");
    }
    return s;
  }

  /// Inclusive sampling-step range feeding mask aggregation; defaults to the first half.
  std::pair<std::size_t, std::size_t> resolved_mask_steps(std::size_t total_steps) const {
    const std::size_t half = std::max<std::size_t>(total_steps / 2, 1);
    const std::size_t begin = mask.step_begin.value_or(0);
    const std::size_t end = std::min(mask.step_end.value_or(half - 1), total_steps - 1);
    if (begin > end) {
      throw ValidationError("mask step range [" + std::to_string(begin) + ", " +
                            std::to_string(end) + "] is empty for " + std::to_string(total_steps) +
                            " steps");
    }
    return {begin, end};
  }

  void validate() const {
    if (steps == 0) throw ValidationError("steps must be >= 1");
    GuidanceConfig{guidance}.validate();
    propagation.validate();
    if (sfm_capacity == 0) throw ValidationError("sfm_len must be >= 1");
    mask.validate();
    injection.validate();
    make_linear_schedule(steps, beta_start, beta_end);
    resolved_sfm_step(steps);
    resolved_mask_steps(steps);
  }
};

struct StepRecord {
  std::size_t frame = 0;
  std::size_t step = 0;
  std::optional<double> latent_norm;
  std::size_t replaced_tokens = 0;
  std::size_t total_tokens = 0;
  bool injected = false;
};

struct EvictionEvent {
  std::string layer;
  InsertReport insert;
};

struct FrameReport {
  std::size_t frame = 0;
  double replacement_rate = 0.0;
  std::vector<EvictionEvent> evictions;
  std::size_t raw_mask_pixels = 0;
  std::size_t mask_pixels = 0;
};

struct StorageStats {
  std::map<std::string, std::size_t> retained_per_layer;  // bank token floats at the end
  std::size_t retained_total = 0;
  std::size_t peak_retained = 0;   // largest bank footprint seen during the run
  std::size_t peak_transient = 0;  // largest per-frame working set (floats)
};

struct EditReport {
  std::vector<FrameReport> frames;
  std::vector<StepRecord> steps;
  StorageStats storage;
  double elapsed_seconds = 0.0;
};

struct EditResult {
  LatentVideo edited;
  std::vector<BinaryMask> masks;  // final mask per frame, latent resolution
  EditReport report;
  std::map<std::string, std::vector<FeatureTokenMap>> features;  // when collect_features
};

/// Running mean of attention maps over the records a MaskConfig selects.
class MaskAccumulator {
 public:
  explicit MaskAccumulator(const MaskConfig& cfg) : cfg_(cfg) {}

  void add(const AttentionRecord& rec) {
    if (!cfg_.selects(rec)) return;
    ProbMatrix p = attention_prob(rec, cfg_.mode);
    if (!sum_) {
      sum_ = std::move(p);
    } else {
      if (p.height != sum_->height || p.width != sum_->width || p.cols != sum_->cols) {
        throw ShapeError("mask aggregation: record (frame " + std::to_string(rec.frame_index) +
                         ", step " + std::to_string(rec.step_index) + ", layer " + rec.layer_id +
                         ") has a different attention shape");
      }
      for (std::size_t i = 0; i < p.values.size(); ++i) sum_->values[i] += p.values[i];
    }
    ++count_;
  }

  bool empty() const noexcept { return count_ == 0; }
  std::size_t footprint() const noexcept { return sum_ ? sum_->values.size() : 0; }

  ProbMatrix mean() const {
    if (!sum_) throw ValidationError("mask aggregation: no attention records match the selection");
    ProbMatrix m = *sum_;
    for (double& v : m.values) v /= static_cast<double>(count_);
    return m;
  }

 private:
  MaskConfig cfg_;
  std::optional<ProbMatrix> sum_;
  std::size_t count_ = 0;
};

/// Mask finalization shared by live editing and replay.
class MaskTracker {
 public:
  explicit MaskTracker(const MaskConfig& cfg) : cfg_(cfg) {}

  /// Threshold the aggregated map and overlap with the previous frame's raw mask.
  BinaryMask finalize(const MaskAccumulator& acc, std::size_t* raw_pixels = nullptr) {
    const ProbMatrix prob = acc.mean();
    const WordSelection sel = WordSelection::from_indices(cfg_.words, prob.cols);
    BinaryMask raw = extract_mask(prob, sel, cfg_.tau, prob.height, prob.width);
    if (raw_pixels) *raw_pixels = raw.count();
    if (prev_raw_ && !prev_raw_->same_shape(raw)) {
      throw ShapeError("mask resolution changed between frames");
    }
    BinaryMask out = temporal_overlap(prev_raw_ ? *prev_raw_ : raw, raw, cfg_.connectivity);
    prev_raw_ = std::move(raw);
    return out;
  }

 private:
  MaskConfig cfg_;
  std::optional<BinaryMask> prev_raw_;
};

namespace detail {

inline std::size_t observation_floats(const Observations& obs) {
  std::size_t n = 0;
  for (const auto& f : obs.features) n += f.tokens().size();
  for (const auto& a : obs.attention) n += a.q.size() + a.k.size();
  return n;
}

}  // namespace detail

/// Runs the full edit. Frames are processed strictly in order.
inline EditResult edit_video(const LatentVideo& src, const Conditioning& src_conditioning,
                             const Conditioning& edit_conditioning, const EditConfig& cfg,
                             DenoiserBackend& backend) {
  cfg.validate();
  src.validate();
  const auto started = std::chrono::steady_clock::now();
  const NoiseSchedule sched = make_linear_schedule(cfg.steps, cfg.beta_start, cfg.beta_end);
  const std::size_t T = cfg.steps;
  const std::size_t sfm_step = cfg.resolved_sfm_step(T);
  const auto [mask_begin, mask_end] = cfg.resolved_mask_steps(T);
  const LatentGrid& shape = src.frames.front();
  if (cfg.fixed_mask &&
      (cfg.fixed_mask->height() != shape.height() || cfg.fixed_mask->width() != shape.width())) {
    throw ShapeError("fixed mask does not match the latent resolution");
  }

  MaskConfig mask_cfg = cfg.mask;
  mask_cfg.step_begin = mask_begin;
  mask_cfg.step_end = mask_end;

  EditResult result;
  std::map<std::string, MemoryBank> banks;
  MaskTracker tracker(mask_cfg);
  StorageStats& storage = result.report.storage;

  for (std::size_t f = 0; f < src.frames.size(); ++f) {
    const long frame = static_cast<long>(f);
    const LatentGrid& z0 = src.frames[f];
    std::vector<LatentGrid> trajectory =
        ddim_invert(z0, backend, sched, src_conditioning, frame);
    const LatentGrid z_T = trajectory.back();
    if (cfg.source_trajectory == SourceTrajectory::kRecompute) {
      trajectory.resize(1);
      trajectory.shrink_to_fit();
    }
    std::size_t trajectory_floats = (trajectory.size() + 1) * z0.size();

    FrameReport fr;
    fr.frame = f;
    std::size_t replaced = 0, total = 0;
    MaskAccumulator acc(mask_cfg);
    std::optional<BinaryMask> mask = cfg.fixed_mask;
    std::size_t peak_obs = 0;
    // Entries join the banks after the frame, so a frame never matches itself.
    std::vector<FeatureTokenMap> staged;

    auto source_at = [&](std::size_t position) -> LatentGrid {
      if (cfg.source_trajectory == SourceTrajectory::kCached) return trajectory[position];
      if (position == 0) return z0;
      return ddim_invert(z0, backend, sched, src_conditioning, frame, position).back();
    };

    StepHook hook = [&](SampleStep& info, LatentGrid& latent) {
      StepRecord rec;
      rec.frame = f;
      rec.step = info.step;
      peak_obs = std::max(peak_obs, detail::observation_floats(info.observations));
      const StepContext ctx{Phase::kSampling, frame, info.step, info.from,
                            sched.alpha_bar_at(info.from), &edit_conditioning};

      for (auto& features : info.observations.features) {
        features.set_frame_index(f);
        auto it = banks.find(features.layer_id());
        if (it == banks.end()) {
          it = banks.emplace(features.layer_id(), MemoryBank(cfg.sfm_capacity, cfg.sfm_metric)).first;
        }
        const PropagationResult prop = propagate(features, it->second, cfg.propagation);
        rec.replaced_tokens += prop.replaced_count();
        rec.total_tokens += prop.n_tokens;
        FeatureTokenMap out = prop.as_feature_map(f, features.layer_id());
        backend.receive_features(out, ctx);
        if (info.step == sfm_step) {
          if (cfg.collect_features) result.features[out.layer_id()].push_back(out);
          staged.push_back(std::move(out));
        }
      }
      replaced += rec.replaced_tokens;
      total += rec.total_tokens;

      if (!cfg.fixed_mask) {
        for (const auto& a : info.observations.attention) acc.add(a);
        if (info.step == mask_end) {
          if (acc.empty()) {
            throw ValidationError("no cross-attention records in steps [" +
                                  std::to_string(mask_begin) + ", " + std::to_string(mask_end) +
                                  "] to extract a mask from");
          }
          BinaryMask m = tracker.finalize(acc, &fr.raw_mask_pixels);
          mask = upsample_nearest(m, latent.height(), latent.width());
        }
      }

      const double step_pos = static_cast<double>(info.step + 1) / static_cast<double>(info.total);
      if (mask && in_window(step_pos, cfg.injection)) {
        latent = inject_background(latent, source_at(info.to), *mask, step_pos, cfg.injection);
        rec.injected = true;
      }
      rec.latent_norm = latent.l2_norm();
      result.report.steps.push_back(rec);
    };

    SampleOptions opts;
    opts.guidance = GuidanceConfig{cfg.guidance};
    opts.frame = frame;
    LatentGrid edited = ddim_sample(z_T, backend, sched, edit_conditioning, {hook}, opts);
    if (!mask) throw ValidationError("frame " + std::to_string(f) + " finished without a mask");

    std::size_t staged_floats = 0;
    for (auto& entry : staged) {
      staged_floats += entry.tokens().size();
      const std::string id = entry.layer_id();
      fr.evictions.push_back({id, banks.at(id).insert(std::move(entry))});
    }
    std::size_t retained = 0;
    for (const auto& [id, bank] : banks) retained += bank.retained_floats();
    storage.peak_retained = std::max(storage.peak_retained, retained);

    fr.replacement_rate = total == 0 ? 0.0 : static_cast<double>(replaced) / static_cast<double>(total);
    fr.mask_pixels = mask->count();
    const std::size_t transient = trajectory_floats + acc.footprint() + peak_obs * 2 + staged_floats;
    storage.peak_transient = std::max(storage.peak_transient, transient);
    result.edited.frames.push_back(std::move(edited));
    result.masks.push_back(std::move(*mask));
    result.report.frames.push_back(std::move(fr));
  }

  for (const auto& [id, bank] : banks) {
    storage.retained_per_layer[id] = bank.retained_floats();
    storage.retained_total += bank.retained_floats();
  }
  result.report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic backend and source video.

struct ToyLayerSpec {
  std::string id;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t dim = 32;
};

struct ToyAttentionSpec {
  std::string id;
  std::size_t side = 16;
  std::size_t heads = 1;
};

struct ToyFeatureOptions {
  std::uint64_t seed = 0;
  double drift_rate = 0.05;
  std::vector<ToyLayerSpec> feature_layers{{"down_1", 8, 8, 32}, {"mid", 4, 4, 64}};
  std::vector<ToyAttentionSpec> attention_layers{{"down_0", 16, 2}, {"down_1", 8, 1}};
  std::size_t n_words = 4;
  std::size_t object_word = 1;
  std::size_t background_word = 0;
  // Hotspot disk in normalized [0, 1) coordinates, moving (with wrap-around) per frame.
  double hotspot_y = 0.5;
  double hotspot_x = 0.4;
  double hotspot_radius = 0.2;
  double hotspot_vy = 0.0;
  double hotspot_vx = 0.01;
};

/// Deterministic stand-in for a denoising network.
///
/// Noise: attractor toward a constant grid whose level is the mean of the
/// conditioning embedding (0 for the unconditional prompt). Features: for
/// frame f, token (y, x) of each layer holds
///   sin(2 pi (a_d y/h + b_d x/w) + phase_d + f * drift_rate * speed_d)
/// over its dim components, row-normalized. Cross-attention: queries select
/// the object word inside a moving disk and the background word elsewhere.
class ToyFeatureBackend final : public DenoiserBackend {
 public:
  explicit ToyFeatureBackend(ToyFeatureOptions opts) : opts_(std::move(opts)) {
    if (opts_.n_words < 2 || opts_.object_word >= opts_.n_words ||
        opts_.background_word >= opts_.n_words) {
      throw ValidationError("toy backend: invalid word layout");
    }
    std::mt19937_64 rng(opts_.seed);
    std::uniform_real_distribution<double> freq(-2.0, 2.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> speed(0.5, 1.5);
    for (const auto& l : opts_.feature_layers) {
      if (l.height == 0 || l.width == 0 || l.dim == 0) throw ValidationError("toy backend: empty layer");
      LayerParams p;
      for (std::size_t d = 0; d < l.dim; ++d) {
        p.a.push_back(freq(rng));
        p.b.push_back(freq(rng));
        p.phase.push_back(phase(rng));
        p.speed.push_back(speed(rng));
      }
      params_.push_back(std::move(p));
    }
  }

  const ToyFeatureOptions& options() const noexcept { return opts_; }

  LatentGrid predict_noise(const LatentGrid& latent, const StepContext& ctx) override {
    double level = 0.0;
    if (ctx.conditioning && !ctx.conditioning->is_null()) {
      for (float v : ctx.conditioning->embedding) level += v;
      level /= static_cast<double>(ctx.conditioning->embedding.size());
    }
    const LatentGrid mu(latent.channels(), latent.height(), latent.width(), static_cast<float>(level));
    return AttractorBackend::attractor_noise(latent, mu, ctx.alpha_bar);
  }

  Observations observe(const StepContext& ctx) override {
    const std::size_t frame = ctx.frame < 0 ? 0 : static_cast<std::size_t>(ctx.frame);
    Observations obs;
    for (std::size_t i = 0; i < opts_.feature_layers.size(); ++i) {
      obs.features.push_back(features(frame, i));
    }
    for (const auto& a : opts_.attention_layers) {
      for (std::size_t h = 0; h < a.heads; ++h) obs.attention.push_back(attention(frame, ctx.step, a, h));
    }
    return obs;
  }

  void receive_features(const FeatureTokenMap& fm, const StepContext&) override {
    ++received_count_;
    last_received_[fm.layer_id()] = fm;
  }

  std::size_t received_count() const noexcept { return received_count_; }
  const std::map<std::string, FeatureTokenMap>& last_received() const noexcept { return last_received_; }

  FeatureTokenMap features(std::size_t frame, std::size_t layer) const {
    const auto& spec = opts_.feature_layers.at(layer);
    const auto& p = params_.at(layer);
    const std::size_t n = spec.height * spec.width;
    std::vector<float> tokens(n * spec.dim);
    const double t = static_cast<double>(frame) * opts_.drift_rate;
    for (std::size_t y = 0; y < spec.height; ++y) {
      for (std::size_t x = 0; x < spec.width; ++x) {
        const std::size_t i = y * spec.width + x;
        const double fy = static_cast<double>(y) / static_cast<double>(spec.height);
        const double fx = static_cast<double>(x) / static_cast<double>(spec.width);
        double norm = 0.0;
        std::vector<double> row(spec.dim);
        for (std::size_t d = 0; d < spec.dim; ++d) {
          row[d] = std::sin(2.0 * std::numbers::pi * (p.a[d] * fy + p.b[d] * fx) + p.phase[d] +
                            t * p.speed[d]);
          norm += row[d] * row[d];
        }
        norm = std::sqrt(norm);
        for (std::size_t d = 0; d < spec.dim; ++d) {
          tokens[i * spec.dim + d] = static_cast<float>(norm > 0.0 ? row[d] / norm : 0.0);
        }
      }
    }
    return FeatureTokenMap(frame, spec.id, n, spec.dim, std::move(tokens));
  }

  bool hot(std::size_t frame, std::size_t side, std::size_t y, std::size_t x) const {
    const double cy = wrap(opts_.hotspot_y + opts_.hotspot_vy * static_cast<double>(frame));
    const double cx = wrap(opts_.hotspot_x + opts_.hotspot_vx * static_cast<double>(frame));
    const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(side);
    const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(side);
    const double dy = py - cy, dx = px - cx;
    return dy * dy + dx * dx <= opts_.hotspot_radius * opts_.hotspot_radius;
  }

  AttentionRecord attention(std::size_t frame, std::size_t step, const ToyAttentionSpec& spec,
                            std::size_t head) const {
    AttentionRecord r;
    r.frame_index = frame;
    r.step_index = step;
    r.layer_id = spec.id;
    r.head_index = head;
    r.height = spec.side;
    r.width = spec.side;
    r.d_k = opts_.n_words;
    const double key_scale = 12.0 + static_cast<double>(head);
    r.k.assign(opts_.n_words * opts_.n_words, 0.0f);
    for (std::size_t w = 0; w < opts_.n_words; ++w) {
      r.k[w * opts_.n_words + w] = static_cast<float>(key_scale);
    }
    r.q.assign(spec.side * spec.side * opts_.n_words, 0.0f);
    for (std::size_t y = 0; y < spec.side; ++y) {
      for (std::size_t x = 0; x < spec.side; ++x) {
        const std::size_t word = hot(frame, spec.side, y, x) ? opts_.object_word : opts_.background_word;
        r.q[(y * spec.side + x) * opts_.n_words + word] = 1.0f;
      }
    }
    return r;
  }

 private:
  struct LayerParams {
    std::vector<double> a, b, phase, speed;
  };

  static double wrap(double v) { return v - std::floor(v); }

  ToyFeatureOptions opts_;
  std::vector<LayerParams> params_;
  std::size_t received_count_ = 0;
  std::map<std::string, FeatureTokenMap> last_received_;
};

inline std::unique_ptr<ToyFeatureBackend> toy_feature_backend(std::uint64_t seed,
                                                              std::vector<ToyLayerSpec> layers,
                                                              double drift_rate) {
  ToyFeatureOptions o;
  o.seed = seed;
  o.feature_layers = std::move(layers);
  o.drift_rate = drift_rate;
  return std::make_unique<ToyFeatureBackend>(std::move(o));
}

/// Smooth moving pattern with values in [0.1, 0.9].
inline LatentVideo synthetic_source_video(std::size_t frames, std::size_t channels, std::size_t height,
                                          std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  std::uniform_real_distribution<double> freq(0.5, 2.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> fy(channels), fx(channels), ph(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    fy[c] = freq(rng);
    fx[c] = freq(rng);
    ph[c] = phase(rng);
  }
  LatentVideo v;
  for (std::size_t f = 0; f < frames; ++f) {
    LatentGrid g(channels, height, width);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double u = static_cast<double>(y) / static_cast<double>(height);
          const double w = static_cast<double>(x) / static_cast<double>(width);
          g.at(c, y, x) = static_cast<float>(
              0.5 + 0.4 * std::sin(2.0 * std::numbers::pi * (fy[c] * u + fx[c] * w) + ph[c] +
                                   0.1 * static_cast<double>(f)));
        }
      }
    }
    v.frames.push_back(std::move(g));
  }
  return v;
}

}  // namespace vedit
