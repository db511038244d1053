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

// Reference-free quality metrics: PSNR, SSIM (optionally restricted to a
// region such as the background) and an adjacent-frame token drift score.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vedit/error.hpp"
#include "vedit/latent.hpp"
#include "vedit/mask.hpp"
#include "vedit/observations.hpp"

namespace vedit {

/// Channel-major image with values in [0, 1].
struct ImageGrid {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  ImageGrid() = default;
  ImageGrid(std::size_t c, std::size_t h, std::size_t w, std::vector<double> v)
      : channels(c), height(h), width(w), values(std::move(v)) {
    validate();
  }

  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values[(c * height + y) * width + x];
  }

  void validate() const {
    if (channels == 0 || height == 0 || width == 0) throw ShapeError("image: empty dimensions");
    if (values.size() != channels * height * width) throw ShapeError("image: value count mismatch");
    for (double v : values) {
      if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) throw ValidationError("image: value outside [0, 1]");
    }
  }

  bool same_shape(const ImageGrid& o) const noexcept {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

/// Stand-in decoder for toy latents: clamp every value into [0, 1].
inline ImageGrid to_image(const LatentGrid& z) {
  std::vector<double> v(z.size());
  auto zv = z.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(static_cast<double>(zv[i]), 0.0, 1.0);
  return ImageGrid(z.channels(), z.height(), z.width(), std::move(v));
}

inline constexpr double kPsnrCap = 99.0;

namespace detail {

inline void check_region(const ImageGrid& a, const std::optional<BinaryMask>& region) {
  if (!region) return;
  if (region->height() != a.height || region->width() != a.width) {
    throw ShapeError("metric region does not match image dimensions");
  }
  if (region->count() == 0) throw ValidationError("metric region is empty");
}

}  // namespace detail

/// 10 log10(1 / MSE) over the region (all pixels when unset), capped at 99 dB.
inline double psnr(const ImageGrid& a, const ImageGrid& b,
                   const std::optional<BinaryMask>& region = std::nullopt) {
  if (!a.same_shape(b)) throw ShapeError("psnr: image shapes differ");
  detail::check_region(a, region);
  const std::size_t plane = a.height * a.width;
  double sse = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      if (region && !(*region)[p]) continue;
      const double d = a.values[c * plane + p] - b.values[c * plane + p];
      sse += d * d;
      ++n;
    }
  }
  const double mse = sse / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

struct SsimParams {
  static constexpr std::size_t kWindow = 11;
  static constexpr double kSigma = 1.5;
  static constexpr double kK1 = 0.01;
  static constexpr double kK2 = 0.03;
  static constexpr double kRange = 1.0;
};

namespace detail {

inline std::array<double, SsimParams::kWindow> gaussian_taps() {
  std::array<double, SsimParams::kWindow> taps{};
  const int r = static_cast<int>(SsimParams::kWindow / 2);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    taps[static_cast<std::size_t>(i + r)] =
        std::exp(-(i * i) / (2.0 * SsimParams::kSigma * SsimParams::kSigma));
    sum += taps[static_cast<std::size_t>(i + r)];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable Gaussian filter evaluated only at window centres fully inside the
// image; result is (H - 10) x (W - 10).
inline std::vector<double> filter_valid(const std::vector<double>& img, std::size_t H, std::size_t W,
                                        const std::array<double, SsimParams::kWindow>& taps) {
  constexpr std::size_t K = SsimParams::kWindow;
  const std::size_t Wo = W - K + 1, Ho = H - K + 1;
  std::vector<double> horiz(H * Wo, 0.0);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < Wo; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += taps[k] * img[y * W + x + k];
      horiz[y * Wo + x] = acc;
    }
  }
  std::vector<double> out(Ho * Wo, 0.0);
  for (std::size_t y = 0; y < Ho; ++y) {
    for (std::size_t x = 0; x < Wo; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += taps[k] * horiz[(y + k) * Wo + x];
      out[y * Wo + x] = acc;
    }
  }
  return out;
}

}  // namespace detail

/// Mean local SSIM (11x11 Gaussian window, sigma 1.5, K1 0.01, K2 0.03, range 1),
/// averaged over channels. With a region, pixels outside it are zeroed in both
/// images and only windows centred inside it contribute.
inline double ssim(const ImageGrid& a, const ImageGrid& b,
                   const std::optional<BinaryMask>& region = std::nullopt) {
  if (!a.same_shape(b)) throw ShapeError("ssim: image shapes differ");
  constexpr std::size_t K = SsimParams::kWindow;
  if (a.height < K || a.width < K) {
    throw ValidationError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                          " is smaller than the 11x11 window");
  }
  detail::check_region(a, region);
  const auto taps = detail::gaussian_taps();
  const double c1 = std::pow(SsimParams::kK1 * SsimParams::kRange, 2);
  const double c2 = std::pow(SsimParams::kK2 * SsimParams::kRange, 2);
  const std::size_t H = a.height, W = a.width, plane = H * W;
  const std::size_t Ho = H - K + 1, Wo = W - K + 1, r = K / 2;

  double total = 0.0;
  std::size_t windows = 0;
  std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
  for (std::size_t c = 0; c < a.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      const bool keep = !region || (*region)[p];
      x[p] = keep ? a.values[c * plane + p] : 0.0;
      y[p] = keep ? b.values[c * plane + p] : 0.0;
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = detail::filter_valid(x, H, W, taps);
    const auto my = detail::filter_valid(y, H, W, taps);
    const auto mxx = detail::filter_valid(xx, H, W, taps);
    const auto myy = detail::filter_valid(yy, H, W, taps);
    const auto mxy = detail::filter_valid(xy, H, W, taps);
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        if (region && !region->at(oy + r, ox + r)) continue;
        const std::size_t i = oy * Wo + ox;
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cxy = mxy[i] - mx[i] * my[i];
        const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2);
        const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
        total += num / den;
        ++windows;
      }
    }
  }
  if (windows == 0) throw ValidationError("ssim: no window centre lies inside the region");
  return total / static_cast<double>(windows);
}

/// Mean cosine between token i of frame f and token i of frame f + 1.
inline double token_drift(const std::vector<FeatureTokenMap>& frames) {
  if (frames.size() < 2) throw ValidationError("token_drift: at least two frames required");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f + 1 < frames.size(); ++f) {
    const auto& a = frames[f];
    const auto& b = frames[f + 1];
    if (a.n_tokens() != b.n_tokens() || a.dim() != b.dim()) {
      throw ShapeError("token_drift: frames " + std::to_string(f) + " and " +
                       std::to_string(f + 1) + " differ in shape");
    }
    for (std::size_t t = 0; t < a.n_tokens(); ++t) {
      auto ra = a.row(t);
      auto rb = b.row(t);
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t d = 0; d < a.dim(); ++d) {
        dot += static_cast<double>(ra[d]) * rb[d];
        na += static_cast<double>(ra[d]) * ra[d];
        nb += static_cast<double>(rb[d]) * rb[d];
      }
      const double denom = std::sqrt(na) * std::sqrt(nb);
      total += denom > 0.0 ? dot / denom : 0.0;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace vedit
