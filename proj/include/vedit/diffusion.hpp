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

// DDIM inversion and sampling over a pluggable noise-prediction backend.
//
// Trajectory positions run 0..T. Position 0 is the clean latent (alpha_bar = 1);
// position p >= 1 uses alpha_bar[p - 1] of the schedule. Inversion walks
// 0 -> T, sampling walks T -> 0.

#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vedit/error.hpp"
#include "vedit/latent.hpp"
#include "vedit/observations.hpp"

namespace vedit {

class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  explicit NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
    if (betas_.empty()) throw ValidationError("noise schedule: at least one step required");
    alpha_bar_.reserve(betas_.size());
    double acc = 1.0;
    for (double b : betas_) {
      if (!(b > 0.0 && b < 1.0)) throw ValidationError("noise schedule: beta outside (0, 1)");
      acc *= 1.0 - b;
      alpha_bar_.push_back(acc);
    }
  }

  std::size_t num_steps() const noexcept { return betas_.size(); }
  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alpha_bar() const noexcept { return alpha_bar_; }

  /// alpha_bar at a trajectory position in [0, T]; position 0 is noise-free.
  double alpha_bar_at(std::size_t position) const {
    if (position > betas_.size()) {
      throw ValidationError("noise schedule: position " + std::to_string(position) +
                            " outside [0, " + std::to_string(betas_.size()) + "]");
    }
    return position == 0 ? 1.0 : alpha_bar_[position - 1];
  }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;
};

inline NoiseSchedule make_linear_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps == 0) throw ValidationError("linear schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ValidationError("linear schedule: require 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_start + (beta_end - beta_start) * frac;
  }
  return NoiseSchedule(std::move(betas));
}

/// One DDIM move between noise levels, in x0-prediction form:
/// x0 = (z - sqrt(1 - a) eps) / sqrt(a);  z' = sqrt(a') x0 + sqrt(1 - a') eps.
inline LatentGrid ddim_step(const LatentGrid& z, const LatentGrid& eps, double alpha_bar_from,
                            double alpha_bar_to) {
  require_same_shape(z, eps, "ddim_step");
  if (!(alpha_bar_from > 0.0 && alpha_bar_from <= 1.0 && alpha_bar_to > 0.0 &&
        alpha_bar_to <= 1.0)) {
    throw ValidationError("ddim_step: alpha_bar must lie in (0, 1]");
  }
  if (alpha_bar_from == alpha_bar_to) return z;
  const double sa = std::sqrt(alpha_bar_from);
  const double sn = std::sqrt(1.0 - alpha_bar_from);
  const double sa_to = std::sqrt(alpha_bar_to);
  const double sn_to = std::sqrt(1.0 - alpha_bar_to);
  LatentGrid out = z;
  auto o = out.values();
  auto zv = z.values();
  auto ev = eps.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double x0 = (static_cast<double>(zv[i]) - sn * ev[i]) / sa;
    o[i] = static_cast<float>(sa_to * x0 + sn_to * ev[i]);
  }
  return out;
}

inline LatentGrid ddim_step(const LatentGrid& z, const LatentGrid& eps, std::size_t from,
                            std::size_t to, const NoiseSchedule& sched) {
  return ddim_step(z, eps, sched.alpha_bar_at(from), sched.alpha_bar_at(to));
}

struct GuidanceConfig {
  double scale = 7.5;

  void validate() const {
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
      throw ValidationError("guidance scale must be finite and >= 0");
    }
  }
};

inline LatentGrid combine_guidance(const LatentGrid& eps_uncond, const LatentGrid& eps_cond,
                                   const GuidanceConfig& cfg) {
  require_same_shape(eps_uncond, eps_cond, "combine_guidance");
  cfg.validate();
  LatentGrid out = eps_uncond;
  auto o = out.values();
  auto c = eps_cond.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double u = o[i];
    o[i] = static_cast<float>(u + cfg.scale * (static_cast<double>(c[i]) - u));
  }
  return out;
}

/// Opaque prompt embedding. An empty embedding is the unconditional prompt.
struct Conditioning {
  std::vector<float> embedding;

  static Conditioning null() { return {}; }
  bool is_null() const noexcept { return embedding.empty(); }
};

enum class Phase { kInversion, kSampling };

inline const char* phase_name(Phase p) {
  return p == Phase::kInversion ? "inversion" : "sampling";
}

struct StepContext {
  Phase phase = Phase::kSampling;
  long frame = -1;            // -1 when the trajectory is not part of a video
  std::size_t step = 0;       // 0-based step counter within the trajectory
  std::size_t position = 0;   // trajectory position the latent currently sits at
  double alpha_bar = 1.0;     // alpha_bar at `position`
  const Conditioning* conditioning = nullptr;
};

/// Noise predictor standing in for the denoising U-Net.
class DenoiserBackend {
 public:
  virtual ~DenoiserBackend() = default;

  /// Noise prediction with the same shape as `latent`.
  virtual LatentGrid predict_noise(const LatentGrid& latent, const StepContext& ctx) = 0;

  /// Internal features and cross-attention of the most recent conditional evaluation.
  virtual Observations observe(const StepContext&) { return {}; }

  /// Receives features after propagation so the backend can continue with them.
  virtual void receive_features(const FeatureTokenMap&, const StepContext&) {}
};

/// Predicts the same noise grid for every input.
class ConstantNoiseBackend final : public DenoiserBackend {
 public:
  explicit ConstantNoiseBackend(LatentGrid eps) : eps_(std::move(eps)) {
    if (!eps_.all_finite()) throw ValidationError("constant backend: non-finite noise");
  }

  LatentGrid predict_noise(const LatentGrid& latent, const StepContext&) override {
    require_same_shape(latent, eps_, "constant backend");
    return eps_;
  }

 private:
  LatentGrid eps_;
};

/// Predicts eps = (z - sqrt(a) mu) / sqrt(1 - a), whose x0-prediction is exactly mu.
/// At the noise-free position (a = 1) it predicts zero noise.
class AttractorBackend final : public DenoiserBackend {
 public:
  explicit AttractorBackend(LatentGrid target_mean) : mu_(std::move(target_mean)) {}

  LatentGrid predict_noise(const LatentGrid& latent, const StepContext& ctx) override {
    require_same_shape(latent, mu_, "attractor backend");
    return attractor_noise(latent, mu_, ctx.alpha_bar);
  }

  static LatentGrid attractor_noise(const LatentGrid& z, const LatentGrid& mu, double alpha_bar) {
    LatentGrid eps(z.channels(), z.height(), z.width(), 0.0f);
    if (alpha_bar >= 1.0) return eps;
    const double sa = std::sqrt(alpha_bar);
    const double sn = std::sqrt(1.0 - alpha_bar);
    auto e = eps.values();
    auto zv = z.values();
    auto mv = mu.values();
    for (std::size_t i = 0; i < e.size(); ++i) {
      e[i] = static_cast<float>((static_cast<double>(zv[i]) - sa * mv[i]) / sn);
    }
    return eps;
  }

 private:
  LatentGrid mu_;
};

inline std::unique_ptr<DenoiserBackend> toy_constant_backend(LatentGrid eps_value) {
  return std::make_unique<ConstantNoiseBackend>(std::move(eps_value));
}

inline std::unique_ptr<DenoiserBackend> toy_attractor_backend(LatentGrid target_mean) {
  return std::make_unique<AttractorBackend>(std::move(target_mean));
}

namespace detail {

template <typename Fn>
decltype(auto) with_step_context(Phase phase, long frame, std::size_t step, Fn&& fn) {
  try {
    return fn();
  } catch (const StepError&) {
    throw;
  } catch (const std::exception& e) {
    throw StepError(phase_name(phase), frame, step, e.what());
  }
}

}  // namespace detail

/// Invert a clean latent into noise. Returns positions 0..T; element 0 is z0 itself.
inline std::vector<LatentGrid> ddim_invert(const LatentGrid& z0, DenoiserBackend& backend,
                                           const NoiseSchedule& sched,
                                           const Conditioning& conditioning, long frame = -1,
                                           std::size_t stop_position = static_cast<std::size_t>(-1)) {
  if (!z0.all_finite()) throw ValidationError("ddim_invert: z0 has non-finite values");
  const std::size_t last = std::min(stop_position, sched.num_steps());
  std::vector<LatentGrid> traj;
  traj.reserve(last + 1);
  traj.push_back(z0);
  for (std::size_t p = 0; p < last; ++p) {
    StepContext ctx{Phase::kInversion, frame, p, p, sched.alpha_bar_at(p), &conditioning};
    LatentGrid next = detail::with_step_context(Phase::kInversion, frame, p, [&] {
      LatentGrid eps = backend.predict_noise(traj.back(), ctx);
      require_same_shape(eps, traj.back(), "backend output");
      return ddim_step(traj.back(), eps, p, p + 1, sched);
    });
    traj.push_back(std::move(next));
  }
  return traj;
}

struct SampleStep {
  std::size_t step = 0;       // 0-based sampling step counter
  std::size_t total = 0;      // number of sampling steps
  std::size_t from = 0;       // position before the step
  std::size_t to = 0;         // position after the step
  long frame = -1;
  Observations observations;
};

/// Called after every sampling step; may overwrite the latent in place.
using StepHook = std::function<void(SampleStep&, LatentGrid&)>;

struct SampleOptions {
  /// Classifier-free guidance against Conditioning::null(); disabled when unset.
  std::optional<GuidanceConfig> guidance;
  long frame = -1;
};

inline LatentGrid ddim_sample(const LatentGrid& z_T, DenoiserBackend& backend,
                              const NoiseSchedule& sched, const Conditioning& conditioning,
                              const std::vector<StepHook>& hooks = {},
                              const SampleOptions& opts = {}) {
  if (!z_T.all_finite()) throw ValidationError("ddim_sample: z_T has non-finite values");
  if (opts.guidance) opts.guidance->validate();
  const std::size_t T = sched.num_steps();
  const Conditioning uncond = Conditioning::null();
  LatentGrid z = z_T;
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t from = T - s;
    const std::size_t to = from - 1;
    StepContext ctx{Phase::kSampling, opts.frame, s, from, sched.alpha_bar_at(from), &conditioning};
    SampleStep info{s, T, from, to, opts.frame, {}};
    z = detail::with_step_context(Phase::kSampling, opts.frame, s, [&] {
      LatentGrid eps;
      if (opts.guidance) {
        StepContext uctx = ctx;
        uctx.conditioning = &uncond;
        LatentGrid eps_u = backend.predict_noise(z, uctx);
        LatentGrid eps_c = backend.predict_noise(z, ctx);
        require_same_shape(eps_u, z, "backend output");
        require_same_shape(eps_c, z, "backend output");
        eps = combine_guidance(eps_u, eps_c, *opts.guidance);
      } else {
        eps = backend.predict_noise(z, ctx);
        require_same_shape(eps, z, "backend output");
      }
      info.observations = backend.observe(ctx);
      LatentGrid next = ddim_step(z, eps, from, to, sched);
      for (const auto& hook : hooks) {
        hook(info, next);
        require_same_shape(next, z, "step hook output");
      }
      return next;
    });
  }
  return z;
}

}  // namespace vedit
