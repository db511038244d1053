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

// Record manifests: `manifest.jsonl` inside a recording directory, one JSON
// object per line.
//
//   {"manifest_version":1,"frames":2,"steps":10,"layers":["down_0"]}      optional header
//   {"frame":0,"step":0,"layer":"down_0","kind":"spatial_features","path":"...","h":8,"w":8}
//   {"frame":0,"step":0,"layer":"down_0","head":0,"kind":"cross_q","path":"...","h":16,"w":16}
//
// kind is one of spatial_features, cross_q, cross_k, latent. Paths are
// relative to the manifest's directory.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "vedit/error.hpp"
#include "vedit/io/tensor_file.hpp"

namespace vedit::io {

inline constexpr int kManifestVersion = 1;
inline constexpr std::string_view kManifestFile = "manifest.jsonl";

enum class RecordKind { kSpatialFeatures, kCrossQ, kCrossK, kLatent };

inline std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::kSpatialFeatures: return "spatial_features";
    case RecordKind::kCrossQ: return "cross_q";
    case RecordKind::kCrossK: return "cross_k";
    case RecordKind::kLatent: return "latent";
  }
  return "?";
}

inline RecordKind parse_record_kind(std::string_view s) {
  if (s == "spatial_features") return RecordKind::kSpatialFeatures;
  if (s == "cross_q") return RecordKind::kCrossQ;
  if (s == "cross_k") return RecordKind::kCrossK;
  if (s == "latent") return RecordKind::kLatent;
  throw FormatError(FormatError::Code::kBadManifest, "manifest: unknown record kind '" + std::string(s) + "'");
}

struct ManifestRow {
  std::size_t frame = 0;
  std::size_t step = 0;
  std::string layer;
  std::optional<std::size_t> head;
  RecordKind kind = RecordKind::kSpatialFeatures;
  std::string path;
  std::size_t height = 0;
  std::size_t width = 0;

  auto key() const { return std::make_tuple(frame, step, layer, head.value_or(0), head.has_value(), kind); }

  std::string describe() const {
    std::string s = std::string(to_string(kind)) + " record for frame=" + std::to_string(frame) +
                    " step=" + std::to_string(step) + " layer=" + layer;
    if (head) s += " head=" + std::to_string(*head);
    return s;
  }
};

struct ManifestHeader {
  int version = kManifestVersion;
  std::optional<std::size_t> frames;
  std::optional<std::size_t> steps;
  std::vector<std::string> layers;
};

struct RecordManifest {
  std::filesystem::path directory;
  std::optional<ManifestHeader> header;
  std::vector<ManifestRow> rows;

  std::filesystem::path resolve(const ManifestRow& row) const { return directory / row.path; }
};

namespace detail {

inline ManifestRow parse_row(const nlohmann::json& j) {
  ManifestRow r;
  r.frame = j.at("frame").get<std::size_t>();
  r.step = j.at("step").get<std::size_t>();
  r.layer = j.at("layer").get<std::string>();
  if (j.contains("head") && !j.at("head").is_null()) r.head = j.at("head").get<std::size_t>();
  r.kind = parse_record_kind(j.at("kind").get<std::string>());
  r.path = j.at("path").get<std::string>();
  r.height = j.at("h").get<std::size_t>();
  r.width = j.at("w").get<std::size_t>();
  return r;
}

inline nlohmann::json row_to_json(const ManifestRow& r) {
  nlohmann::json j;
  j["frame"] = r.frame;
  j["step"] = r.step;
  j["layer"] = r.layer;
  if (r.head) j["head"] = *r.head;
  j["kind"] = std::string(to_string(r.kind));
  j["path"] = r.path;
  j["h"] = r.height;
  j["w"] = r.width;
  return j;
}

}  // namespace detail

/// Checks that every (frame, step, layer[, head]) tuple implied by the manifest
/// is present: features cover frames x steps for every feature layer, each
/// attention (layer, head) covers frames x steps, and every cross_q has its
/// cross_k. Throws FormatError(kMissingRecord) naming the first gap.
inline void check_complete(const RecordManifest& m) {
  using Code = FormatError::Code;
  std::set<std::size_t> frames, steps;
  std::set<std::string> feature_layers;
  std::set<std::pair<std::string, std::size_t>> attention_sites;
  std::set<std::tuple<std::size_t, std::size_t, std::string, std::size_t, RecordKind>> present;
  for (const auto& r : m.rows) {
    frames.insert(r.frame);
    steps.insert(r.step);
    if (r.kind == RecordKind::kSpatialFeatures) feature_layers.insert(r.layer);
    if (r.kind == RecordKind::kCrossQ || r.kind == RecordKind::kCrossK) {
      attention_sites.insert({r.layer, r.head.value_or(0)});
    }
    present.insert({r.frame, r.step, r.layer, r.head.value_or(0), r.kind});
  }
  if (m.header) {
    if (m.header->frames) {
      frames.clear();
      for (std::size_t f = 0; f < *m.header->frames; ++f) frames.insert(f);
    }
    if (m.header->steps) {
      steps.clear();
      for (std::size_t s = 0; s < *m.header->steps; ++s) steps.insert(s);
    }
  }
  auto missing = [&](std::size_t f, std::size_t s, const std::string& layer,
                     std::optional<std::size_t> head, RecordKind kind) {
    ManifestRow r{f, s, layer, head, kind, "", 0, 0};
    throw FormatError(Code::kMissingRecord, "manifest incomplete: missing " + r.describe());
  };
  if (m.header) {
    for (const auto& layer : m.header->layers) {
      const bool any = std::any_of(m.rows.begin(), m.rows.end(),
                                   [&](const ManifestRow& r) { return r.layer == layer; });
      if (!any) missing(frames.empty() ? 0 : *frames.begin(), steps.empty() ? 0 : *steps.begin(),
                        layer, std::nullopt, RecordKind::kSpatialFeatures);
    }
  }
  for (std::size_t f : frames) {
    for (std::size_t s : steps) {
      for (const auto& layer : feature_layers) {
        if (!present.count({f, s, layer, 0, RecordKind::kSpatialFeatures})) {
          missing(f, s, layer, std::nullopt, RecordKind::kSpatialFeatures);
        }
      }
      for (const auto& [layer, head] : attention_sites) {
        for (RecordKind k : {RecordKind::kCrossQ, RecordKind::kCrossK}) {
          if (!present.count({f, s, layer, head, k})) missing(f, s, layer, head, k);
        }
      }
    }
  }
}

/// Parses `dir/manifest.jsonl`, checks uniqueness and that every referenced file exists.
inline RecordManifest load_manifest(const std::filesystem::path& dir) {
  using Code = FormatError::Code;
  const auto path = std::filesystem::is_directory(dir) ? dir / kManifestFile : dir;
  std::ifstream in(path);
  if (!in) throw FormatError(Code::kIo, "cannot open manifest " + path.string());
  RecordManifest m;
  m.directory = path.parent_path();
  std::set<decltype(ManifestRow{}.key())> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(Code::kBadManifest, where + "invalid JSON (" + e.what() + ")");
    }
    try {
      if (j.contains("manifest_version")) {
        if (m.header || !m.rows.empty()) {
          throw FormatError(Code::kBadManifest, where + "header must be the first record");
        }
        ManifestHeader h;
        h.version = j.at("manifest_version").get<int>();
        if (h.version != kManifestVersion) {
          throw FormatError(Code::kUnsupportedVersion,
                            where + "unsupported manifest version " + std::to_string(h.version));
        }
        if (j.contains("frames")) h.frames = j.at("frames").get<std::size_t>();
        if (j.contains("steps")) h.steps = j.at("steps").get<std::size_t>();
        if (j.contains("layers")) h.layers = j.at("layers").get<std::vector<std::string>>();
        m.header = std::move(h);
        continue;
      }
      ManifestRow r = detail::parse_row(j);
      if (!seen.insert(r.key()).second) {
        throw FormatError(Code::kBadManifest, where + "duplicate " + r.describe());
      }
      if (!std::filesystem::exists(m.directory / r.path)) {
        throw FormatError(Code::kMissingRecord, where + "file " + r.path + " for " + r.describe() +
                                                    " does not exist");
      }
      m.rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(Code::kBadManifest, where + e.what());
    }
  }
  return m;
}

inline void write_manifest(const RecordManifest& m) {
  std::ostringstream out;
  if (m.header) {
    nlohmann::json h;
    h["manifest_version"] = m.header->version;
    if (m.header->frames) h["frames"] = *m.header->frames;
    if (m.header->steps) h["steps"] = *m.header->steps;
    if (!m.header->layers.empty()) h["layers"] = m.header->layers;
    out << h.dump() << '\n';
  }
  for (const auto& r : m.rows) out << detail::row_to_json(r).dump() << '\n';
  std::filesystem::create_directories(m.directory);
  detail::write_file_atomic(m.directory / kManifestFile, out.str());
}

}  // namespace vedit::io
