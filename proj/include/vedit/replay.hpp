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

// Offline runs over recorded features and cross-attention (no sampling).

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "vedit/diffusion.hpp"
#include "vedit/error.hpp"
#include "vedit/io/manifest.hpp"
#include "vedit/io/tensor_file.hpp"
#include "vedit/mask.hpp"
#include "vedit/memory_bank.hpp"
#include "vedit/pipeline.hpp"
#include "vedit/propagation.hpp"

namespace vedit {

struct PropagatedFeatures {
  std::size_t frame = 0;
  std::size_t step = 0;
  FeatureTokenMap features;
  std::size_t replaced = 0;
};

struct ReplayResult {
  std::vector<PropagatedFeatures> features;  // (frame, step, layer) order
  std::vector<std::size_t> mask_frames;      // frame index of each mask
  std::vector<BinaryMask> masks;             // attention resolution; empty without attention records
  EditReport report;
};

namespace detail {

inline FeatureTokenMap load_features(const io::RecordManifest& m, const io::ManifestRow& row) {
  io::Tensor t = io::read_tensor(m.resolve(row));
  if (t.dims.size() != 2) {
    throw ShapeError(row.describe() + ": expected a rank-2 tensor, got rank " + std::to_string(t.dims.size()));
  }
  if (t.dims[0] != row.height * row.width) {
    throw ShapeError(row.describe() + ": " + std::to_string(t.dims[0]) + " tokens do not match " +
                     std::to_string(row.height) + "x" + std::to_string(row.width));
  }
  return FeatureTokenMap(row.frame, row.layer, t.dims[0], t.dims[1], std::move(t.values));
}

inline AttentionRecord load_attention(const io::RecordManifest& m, const io::ManifestRow& q_row,
                                      const io::ManifestRow& k_row) {
  io::Tensor q = io::read_tensor(m.resolve(q_row));
  io::Tensor k = io::read_tensor(m.resolve(k_row));
  if (q.dims.size() != 2 || k.dims.size() != 2 || q.dims[1] != k.dims[1]) {
    throw ShapeError(q_row.describe() + ": q/k must be rank-2 with a shared d_k");
  }
  AttentionRecord r;
  r.frame_index = q_row.frame;
  r.step_index = q_row.step;
  r.layer_id = q_row.layer;
  r.head_index = q_row.head.value_or(0);
  r.height = q_row.height;
  r.width = q_row.width;
  r.d_k = q.dims[1];
  r.q = std::move(q.values);
  r.k = std::move(k.values);
  r.validate();
  return r;
}

}  // namespace detail

/// Propagation, bank updates and mask extraction over a recording. The step
/// index of each record is its position among the recording's distinct steps.
/// With `with_features` false only the cross-attention records are read.
inline ReplayResult replay_edit(const std::filesystem::path& record_dir, const EditConfig& cfg,
                                bool with_features = true) {
  using io::RecordKind;
  const auto started = std::chrono::steady_clock::now();
  cfg.propagation.validate();
  cfg.mask.validate();
  const io::RecordManifest manifest = io::load_manifest(record_dir);
  io::check_complete(manifest);

  std::set<std::size_t> frame_set, step_set;
  for (const auto& r : manifest.rows) {
    frame_set.insert(r.frame);
    step_set.insert(r.step);
  }
  if (step_set.empty()) throw FormatError(FormatError::Code::kBadManifest, "manifest has no records");
  const std::vector<std::size_t> steps(step_set.begin(), step_set.end());
  const std::size_t S = steps.size();
  const std::size_t sfm_step = cfg.resolved_sfm_step(S);
  const auto [mask_begin, mask_end] = cfg.resolved_mask_steps(S);
  MaskConfig mask_cfg = cfg.mask;
  mask_cfg.step_begin = mask_begin;
  mask_cfg.step_end = mask_end;

  // (frame, step, layer) -> feature row; (frame, step, layer, head) -> q/k rows
  std::map<std::tuple<std::size_t, std::size_t, std::string>, const io::ManifestRow*> feature_rows;
  std::map<std::tuple<std::size_t, std::size_t, std::string, std::size_t>,
           std::pair<const io::ManifestRow*, const io::ManifestRow*>> attention_rows;
  for (const auto& r : manifest.rows) {
    if (r.kind == RecordKind::kSpatialFeatures) {
      if (with_features) feature_rows[{r.frame, r.step, r.layer}] = &r;
    } else if (r.kind == RecordKind::kCrossQ) {
      attention_rows[{r.frame, r.step, r.layer, r.head.value_or(0)}].first = &r;
    } else if (r.kind == RecordKind::kCrossK) {
      attention_rows[{r.frame, r.step, r.layer, r.head.value_or(0)}].second = &r;
    }
  }

  ReplayResult result;
  std::map<std::string, MemoryBank> banks;
  MaskTracker tracker(mask_cfg);
  for (std::size_t frame : frame_set) {
    FrameReport fr;
    fr.frame = frame;
    std::size_t replaced = 0, total = 0;
    MaskAccumulator acc(mask_cfg);
    bool saw_attention = false;
    std::vector<FeatureTokenMap> staged;  // committed after the frame, as in edit_video
    for (std::size_t si = 0; si < S; ++si) {
      StepRecord rec;
      rec.frame = frame;
      rec.step = si;
      for (auto it = feature_rows.lower_bound({frame, steps[si], std::string()});
           it != feature_rows.end() && std::get<0>(it->first) == frame &&
           std::get<1>(it->first) == steps[si];
           ++it) {
        FeatureTokenMap fm = detail::load_features(manifest, *it->second);
        auto bank = banks.find(fm.layer_id());
        if (bank == banks.end()) {
          bank = banks.emplace(fm.layer_id(), MemoryBank(cfg.sfm_capacity, cfg.sfm_metric)).first;
        }
        const PropagationResult prop = propagate(fm, bank->second, cfg.propagation);
        rec.replaced_tokens += prop.replaced_count();
        rec.total_tokens += prop.n_tokens;
        FeatureTokenMap out = prop.as_feature_map(frame, fm.layer_id());
        if (si == sfm_step) staged.push_back(out);
        result.features.push_back({frame, si, std::move(out), prop.replaced_count()});
      }
      for (auto it = attention_rows.lower_bound({frame, steps[si], std::string(), 0});
           it != attention_rows.end() && std::get<0>(it->first) == frame &&
           std::get<1>(it->first) == steps[si];
           ++it) {
        AttentionRecord a = detail::load_attention(manifest, *it->second.first, *it->second.second);
        a.step_index = si;
        saw_attention = true;
        acc.add(a);
      }
      replaced += rec.replaced_tokens;
      total += rec.total_tokens;
      result.report.steps.push_back(rec);
    }
    for (auto& entry : staged) {
      const std::string id = entry.layer_id();
      fr.evictions.push_back({id, banks.at(id).insert(std::move(entry))});
    }
    if (saw_attention) {
      BinaryMask m = tracker.finalize(acc, &fr.raw_mask_pixels);
      fr.mask_pixels = m.count();
      result.mask_frames.push_back(frame);
      result.masks.push_back(std::move(m));
    }
    fr.replacement_rate = total == 0 ? 0.0 : static_cast<double>(replaced) / static_cast<double>(total);
    result.report.frames.push_back(std::move(fr));
    std::size_t retained = 0;
    for (const auto& [id, bank] : banks) retained += bank.retained_floats();
    result.report.storage.peak_retained = std::max(result.report.storage.peak_retained, retained);
  }
  for (const auto& [id, bank] : banks) {
    result.report.storage.retained_per_layer[id] = bank.retained_floats();
    result.report.storage.retained_total += bank.retained_floats();
  }
  result.report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

namespace detail {

inline std::string record_name(std::size_t frame, std::size_t step, const std::string& layer,
                               std::optional<std::size_t> head, io::RecordKind kind) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "f%04zu_s%03zu_", frame, step);
  std::string name = buf + layer;
  if (head) name += "_h" + std::to_string(*head);
  return name + "_" + std::string(io::to_string(kind)) + ".eyit";
}

}  // namespace detail

/// Writes the toy backend's observations for `frames` x `steps` as a recording
/// that replay_edit can consume.
inline io::RecordManifest record_toy_run(const std::filesystem::path& dir, const ToyFeatureBackend& backend,
                                         std::size_t frames, std::size_t steps) {
  using io::RecordKind;
  std::filesystem::create_directories(dir);
  io::RecordManifest m;
  m.directory = dir;
  io::ManifestHeader header;
  header.frames = frames;
  header.steps = steps;
  std::set<std::string> layers;
  for (const auto& l : backend.options().feature_layers) layers.insert(l.id);
  for (const auto& a : backend.options().attention_layers) layers.insert(a.id);
  header.layers.assign(layers.begin(), layers.end());
  m.header = header;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t s = 0; s < steps; ++s) {
      for (std::size_t li = 0; li < backend.options().feature_layers.size(); ++li) {
        const auto& spec = backend.options().feature_layers[li];
        const FeatureTokenMap fm = backend.features(f, li);
        const std::string name = detail::record_name(f, s, spec.id, std::nullopt, RecordKind::kSpatialFeatures);
        const std::uint64_t dims[2] = {fm.n_tokens(), fm.dim()};
        io::write_tensor(dir / name, dims, fm.tokens());
        m.rows.push_back({f, s, spec.id, std::nullopt, RecordKind::kSpatialFeatures, name, spec.height, spec.width});
      }
      for (const auto& a : backend.options().attention_layers) {
        for (std::size_t h = 0; h < a.heads; ++h) {
          const AttentionRecord r = backend.attention(f, s, a, h);
          const std::string qn = detail::record_name(f, s, a.id, h, RecordKind::kCrossQ);
          const std::string kn = detail::record_name(f, s, a.id, h, RecordKind::kCrossK);
          const std::uint64_t qd[2] = {r.n_tokens(), r.d_k};
          const std::uint64_t kd[2] = {r.n_words(), r.d_k};
          io::write_tensor(dir / qn, qd, r.q);
          io::write_tensor(dir / kn, kd, r.k);
          m.rows.push_back({f, s, a.id, h, RecordKind::kCrossQ, qn, a.side, a.side});
          m.rows.push_back({f, s, a.id, h, RecordKind::kCrossK, kn, a.side, a.side});
        }
      }
    }
  }
  io::write_manifest(m);
  return m;
}

}  // namespace vedit
