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

// EditReport as line-delimited JSON: one "step" line per (frame, step), one
// "frame" line per frame, a closing "storage" line and, on request, "timing".

#include <filesystem>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vedit/io/tensor_file.hpp"
#include "vedit/pipeline.hpp"

namespace vedit::io {

inline std::string encode_report(const EditReport& report, bool include_timing = false) {
  std::ostringstream out;
  for (const auto& s : report.steps) {
    nlohmann::ordered_json j{{"type", "step"},          {"frame", s.frame},
                     {"step", s.step},          {"replaced", s.replaced_tokens},
                     {"tokens", s.total_tokens}, {"injected", s.injected}};
    if (s.latent_norm) j["latent_norm"] = *s.latent_norm;
    out << j.dump() << '\n';
  }
  for (const auto& f : report.frames) {
    nlohmann::ordered_json ev = nlohmann::ordered_json::array();
    for (const auto& e : f.evictions) {
      ev.push_back({{"layer", e.layer},
                    {"frame", e.insert.frame_index},
                    {"admitted", e.insert.admitted},
                    {"evicted", e.insert.evicted_frame ? nlohmann::ordered_json(*e.insert.evicted_frame)
                                                       : nlohmann::ordered_json(nullptr)}});
    }
    nlohmann::ordered_json j{{"type", "frame"},
                     {"frame", f.frame},
                     {"replacement_rate", f.replacement_rate},
                     {"raw_mask_pixels", f.raw_mask_pixels},
                     {"mask_pixels", f.mask_pixels},
                     {"sfm", ev}};
    out << j.dump() << '\n';
  }
  nlohmann::ordered_json storage{{"type", "storage"},
                         {"retained_total", report.storage.retained_total},
                         {"retained_per_layer", report.storage.retained_per_layer},
                         {"peak_retained", report.storage.peak_retained},
                         {"peak_transient", report.storage.peak_transient}};
  out << storage.dump() << '\n';
  if (include_timing) {
    out << nlohmann::ordered_json{{"type", "timing"}, {"elapsed_seconds", report.elapsed_seconds}}.dump() << '\n';
  }
  return out.str();
}

inline void write_report(const std::filesystem::path& path, const EditReport& report,
                         bool include_timing = false) {
  detail::write_file_atomic(path, encode_report(report, include_timing));
}

}  // namespace vedit::io
