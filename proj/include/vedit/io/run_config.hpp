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

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment. Keys mirror EditConfig; unknown keys are rejected. `auto` resets
// an optional setting to its derived default. Lists are comma-separated.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vedit/error.hpp"
#include "vedit/io/tensor_file.hpp"
#include "vedit/pipeline.hpp"

namespace vedit::io {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ValidationError("config: " + key + " expects a number, got '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ValidationError("config: " + key + " expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

// Shortest text that parses back to the same double.
inline std::string fmt_double(double d) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, ptr);
}

}  // namespace detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "steps",          "beta_start",      "beta_end",        "guidance",
      "lambda",         "similarity",      "sfm_len",         "sfm_metric",
      "sfm_update_step", "tau",            "mask_step_begin", "mask_step_end",
      "mask_layers",    "attention_side",  "words",           "attention_mode",
      "connectivity",   "inject_start",    "inject_end",      "seed",
      "source_trajectory"};
  return keys;
}

/// Applies one setting; throws ValidationError for unknown keys or bad values.
inline void apply_setting(EditConfig& cfg, const std::string& key, const std::string& raw) {
  using detail::parse_double;
  using detail::parse_uint;
  const std::string v = detail::trim(raw);
  if (key == "steps") cfg.steps = parse_uint(key, v);
  else if (key == "beta_start") cfg.beta_start = parse_double(key, v);
  else if (key == "beta_end") cfg.beta_end = parse_double(key, v);
  else if (key == "guidance") cfg.guidance = parse_double(key, v);
  else if (key == "lambda") cfg.propagation.lambda = parse_double(key, v);
  else if (key == "similarity") cfg.propagation.similarity = parse_similarity(v);
  else if (key == "sfm_len") cfg.sfm_capacity = parse_uint(key, v);
  else if (key == "sfm_metric") cfg.sfm_metric = parse_distance_metric(v);
  else if (key == "sfm_update_step") {
    if (v == "auto") cfg.sfm_update_step.reset();
    else cfg.sfm_update_step = parse_uint(key, v);
  } else if (key == "tau") cfg.mask.tau = parse_double(key, v);
  else if (key == "mask_step_begin") {
    if (v == "auto") cfg.mask.step_begin.reset();
    else cfg.mask.step_begin = parse_uint(key, v);
  } else if (key == "mask_step_end") {
    if (v == "auto") cfg.mask.step_end.reset();
    else cfg.mask.step_end = parse_uint(key, v);
  } else if (key == "mask_layers") {
    cfg.mask.layers = v == "auto" ? std::vector<std::string>{} : detail::split_list(v);
  } else if (key == "attention_side") cfg.mask.attention_side = parse_uint(key, v);
  else if (key == "words") {
    cfg.mask.words.clear();
    for (const auto& w : detail::split_list(v)) cfg.mask.words.push_back(parse_uint(key, w));
  } else if (key == "attention_mode") cfg.mask.mode = parse_attention_mode(v);
  else if (key == "connectivity") {
    const auto c = parse_uint(key, v);
    if (c != 4 && c != 8) throw ValidationError("config: connectivity must be 4 or 8");
    cfg.mask.connectivity = c == 4 ? Connectivity::kFour : Connectivity::kEight;
  } else if (key == "inject_start") cfg.injection.start_fraction = parse_double(key, v);
  else if (key == "inject_end") cfg.injection.end_fraction = parse_double(key, v);
  else if (key == "seed") cfg.seed = parse_uint(key, v);
  else if (key == "source_trajectory") cfg.source_trajectory = parse_source_trajectory(v);
  else throw ValidationError("config: unknown key '" + key + "'");
}

inline void apply_config_text(EditConfig& cfg, std::string_view text, const std::string& origin = "config") {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(cfg, detail::trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_file(EditConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path.string());
}

/// Every key with its resolved value; parses back to an equivalent config.
inline std::string encode_config(const EditConfig& cfg) {
  using detail::fmt_double;
  std::vector<std::string> words;
  for (auto w : cfg.mask.words) words.push_back(std::to_string(w));
  const auto [mb, me] = cfg.resolved_mask_steps(cfg.steps);
  std::ostringstream o;
  o << "steps = " << cfg.steps << '\n'
    << "beta_start = " << fmt_double(cfg.beta_start) << '\n'
    << "beta_end = " << fmt_double(cfg.beta_end) << '\n'
    << "guidance = " << fmt_double(cfg.guidance) << '\n'
    << "lambda = " << fmt_double(cfg.propagation.lambda) << '\n'
    << "similarity = " << to_string(cfg.propagation.similarity) << '\n'
    << "sfm_len = " << cfg.sfm_capacity << '\n'
    << "sfm_metric = " << to_string(cfg.sfm_metric) << '\n'
    << "sfm_update_step = " << cfg.resolved_sfm_step(cfg.steps) << '\n'
    << "tau = " << fmt_double(cfg.mask.tau) << '\n'
    << "mask_step_begin = " << mb << '\n'
    << "mask_step_end = " << me << '\n'
    << "mask_layers = " << (cfg.mask.layers.empty() ? "auto" : detail::join(cfg.mask.layers)) << '\n'
    << "attention_side = " << cfg.mask.attention_side << '\n'
    << "words = " << detail::join(words) << '\n'
    << "attention_mode = " << to_string(cfg.mask.mode) << '\n'
    << "connectivity = " << static_cast<int>(cfg.mask.connectivity) << '\n'
    << "inject_start = " << fmt_double(cfg.injection.start_fraction) << '\n'
    << "inject_end = " << fmt_double(cfg.injection.end_fraction) << '\n'
    << "seed = " << cfg.seed << '\n'
    << "source_trajectory = " << to_string(cfg.source_trajectory) << '\n';
  return o.str();
}

}  // namespace vedit::io
