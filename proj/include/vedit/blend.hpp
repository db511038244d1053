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
#include <string>

#include "vedit/error.hpp"
#include "vedit/latent.hpp"
#include "vedit/mask.hpp"

namespace vedit {

/// Fractions of elapsed sampling steps during which background injection runs.
struct InjectionWindow {
  double start_fraction = 0.2;
  double end_fraction = 1.0;

  void validate() const {
    if (!(0.0 <= start_fraction && start_fraction <= end_fraction && end_fraction <= 1.0)) {
      throw ValidationError("injection window: require 0 <= start <= end <= 1");
    }
  }
};

inline bool in_window(double step_pos, const InjectionWindow& window) {
  return window.start_fraction <= step_pos && step_pos <= window.end_fraction;
}

/// mask * z_edit + (1 - mask) * z_src while step_pos is inside the window,
/// otherwise z_edit untouched. The mask is shared by all channels.
inline LatentGrid inject_background(const LatentGrid& z_edit, const LatentGrid& z_src,
                                    const BinaryMask& mask, double step_pos,
                                    const InjectionWindow& window) {
  require_same_shape(z_edit, z_src, "inject_background");
  if (mask.height() != z_edit.height() || mask.width() != z_edit.width()) {
    throw ShapeError("inject_background: mask is " + std::to_string(mask.height()) + "x" +
                     std::to_string(mask.width()) + ", latent is " + z_edit.shape_string());
  }
  window.validate();
  if (!in_window(step_pos, window)) return z_edit;
  LatentGrid out = z_edit;
  const std::size_t plane = z_edit.plane_size();
  auto o = out.values();
  auto s = z_src.values();
  for (std::size_t c = 0; c < z_edit.channels(); ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      if (!mask[p]) o[c * plane + p] = s[c * plane + p];
    }
  }
  return out;
}

}  // namespace vedit
