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

// Command-line front end. Subcommands:
//   simulate   toy end-to-end edit of a synthetic video
//   replay     propagation and masks over a recorded manifest
//   mask       mask extraction only, from recorded cross-attention
//   metrics    PSNR / SSIM / token-drift table for two frame directories
//   fmp-bench  propagation timing on tensor files or random tokens
//   sfm-trace  memory-bank evolution over a toy feature stream
//
// Settings resolve as defaults, then --config file, then explicit flags.
// Parse errors exit 2 with usage; runtime and validation errors exit 1.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "vedit/diffusion.hpp"
#include "vedit/error.hpp"
#include "vedit/io/convert.hpp"
#include "vedit/io/manifest.hpp"
#include "vedit/io/pgm.hpp"
#include "vedit/io/report.hpp"
#include "vedit/io/run_config.hpp"
#include "vedit/io/tensor_file.hpp"
#include "vedit/mask.hpp"
#include "vedit/memory_bank.hpp"
#include "vedit/metrics.hpp"
#include "vedit/pipeline.hpp"
#include "vedit/propagation.hpp"
#include "vedit/replay.hpp"

namespace vedit::cli {

namespace detail {

namespace fs = std::filesystem;

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

inline const std::vector<FlagSpec>& config_flags() {
  static const std::vector<FlagSpec> flags = {
      {"--steps", "steps", "DDIM steps T"},
      {"--beta-start", "beta_start", "first beta of the linear schedule"},
      {"--beta-end", "beta_end", "last beta of the linear schedule"},
      {"--guidance", "guidance", "classifier-free guidance scale"},
      {"--lambda", "lambda", "propagation similarity threshold"},
      {"--similarity", "similarity", "cosine | inner-product"},
      {"--sfm-len", "sfm_len", "memory bank capacity N"},
      {"--sfm-metric", "sfm_metric", "frame-gap | mean-token-cosine"},
      {"--sfm-update-step", "sfm_update_step", "sampling step that feeds the bank (auto = T/2)"},
      {"--tau", "tau", "mask threshold"},
      {"--mask-step-begin", "mask_step_begin", "first step aggregated into the mask"},
      {"--mask-step-end", "mask_step_end", "last step aggregated into the mask"},
      {"--mask-layers", "mask_layers", "comma-separated attention layers (auto = by side)"},
      {"--attention-side", "attention_side", "attention resolution used when mask layers are auto"},
      {"--words", "words", "comma-separated prompt token indices"},
      {"--attention-mode", "attention_mode", "softmax | raw"},
      {"--connectivity", "connectivity", "4 | 8"},
      {"--inject-start", "inject_start", "injection window start (fraction of steps)"},
      {"--inject-end", "inject_end", "injection window end (fraction of steps)"},
      {"--seed", "seed", "random seed"},
      {"--source-trajectory", "source_trajectory", "cached | recompute"},
  };
  return flags;
}

/// Config file path plus explicit flag overrides, resolved after parsing.
struct Settings {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  EditConfig resolve() const {
    EditConfig cfg;
    if (!config_path.empty()) io::apply_config_file(cfg, config_path);
    for (const auto& [key, value] : overrides) io::apply_setting(cfg, key, value);
    return cfg;
  }
};

inline void add_settings(CLI::App* sub, Settings& s, const std::vector<std::string>& keys) {
  sub->add_option("--config", s.config_path, "key = value run configuration file");
  for (const auto& spec : config_flags()) {
    if (std::find(keys.begin(), keys.end(), spec.key) == keys.end()) continue;
    const std::string key = spec.key;
    sub->add_option_function<std::string>(
        spec.flag, [&s, key](const std::string& v) { s.overrides[key] = v; }, spec.help);
  }
}

inline std::vector<std::string> all_keys() { return io::config_keys(); }

inline void write_text(const fs::path& path, const std::string& text) {
  io::detail::write_file_atomic(path, text);
}

inline void write_run_meta(const fs::path& out_dir, const std::string& command, const EditConfig& cfg,
                           const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ostringstream o;
  o << "# vedit " << command << '\n';
  for (const auto& [k, v] : extra) o << "# " << k << " = " << v << '\n';
  o << io::encode_config(cfg);
  write_text(out_dir / "run.meta", o.str());
}

inline std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

/// Every pixel as a C-dimensional token.
inline FeatureTokenMap pixel_tokens(const LatentGrid& g, std::size_t frame) {
  const std::size_t n = g.plane_size();
  std::vector<float> t(n * g.channels());
  for (std::size_t c = 0; c < g.channels(); ++c) {
    for (std::size_t i = 0; i < n; ++i) t[i * g.channels() + c] = g.values()[c * n + i];
  }
  return FeatureTokenMap(frame, "pixels", n, g.channels(), std::move(t));
}

inline void write_masks(const fs::path& dir, const std::vector<std::size_t>& frames,
                        const std::vector<BinaryMask>& masks) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    io::write_mask_pgm(dir / io::frame_name(frames[i], "pgm"), masks[i]);
  }
}

inline std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Settings settings;
  std::string out_dir;
  std::size_t frames = 8;
  std::size_t channels = 4;
  std::size_t size = 16;
  double drift = 0.05;
  double edit_level = 0.1;
};

inline int run_simulate(const SimulateArgs& a, std::ostream& out) {
  EditConfig cfg = a.settings.resolve();
  cfg.collect_features = true;
  if (a.frames == 0) throw ValidationError("--frames must be >= 1");
  if (a.channels == 0 || a.size == 0) throw ValidationError("--channels and --size must be >= 1");
  cfg.validate();

  ToyFeatureOptions opts;
  opts.seed = cfg.seed;
  opts.drift_rate = a.drift;
  ToyFeatureBackend backend(opts);
  const LatentVideo source = synthetic_source_video(a.frames, a.channels, a.size, a.size, cfg.seed);
  const Conditioning src_cond{std::vector<float>(8, 0.0f)};
  const Conditioning edit_cond{std::vector<float>(8, static_cast<float>(a.edit_level))};
  const EditResult r = edit_video(source, src_cond, edit_cond, cfg, backend);

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  io::write_latent_frames(dir / "source", source);
  io::write_latent_frames(dir / "edited", r.edited);
  write_masks(dir / "masks", iota(r.masks.size()), r.masks);
  for (const auto& [layer, maps] : r.features) {
    fs::create_directories(dir / "features" / layer);
    for (const auto& fm : maps) {
      io::write_tensor(dir / "features" / layer / io::frame_name(fm.frame_index(), "eyit"), io::to_tensor(fm));
    }
  }
  io::write_report(dir / "report.jsonl", r.report);
  write_run_meta(dir, "simulate", cfg,
                 {{"frames", std::to_string(a.frames)},
                  {"channels", std::to_string(a.channels)},
                  {"size", std::to_string(a.size)},
                  {"drift", io::detail::fmt_double(a.drift)},
                  {"edit_level", io::detail::fmt_double(a.edit_level)}});
  out << "simulate: " << a.frames << " frames, retained bank floats " << r.report.storage.retained_total
      << ", " << fmt(r.report.elapsed_seconds, 3) << " s\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ReplayArgs {
  Settings settings;
  std::string record_dir;
  std::string out_dir;
};

inline int run_replay(const ReplayArgs& a, std::ostream& out) {
  const EditConfig cfg = a.settings.resolve();
  const ReplayResult r = replay_edit(a.record_dir, cfg);
  const fs::path dir = a.out_dir;
  fs::create_directories(dir / "features");
  io::RecordManifest m;
  m.directory = dir / "features";
  for (const auto& pf : r.features) {
    const auto& fm = pf.features;
    const std::string name = vedit::detail::record_name(pf.frame, pf.step, fm.layer_id(), std::nullopt,
                                                        io::RecordKind::kSpatialFeatures);
    io::write_tensor(m.directory / name, io::to_tensor(fm));
    m.rows.push_back({pf.frame, pf.step, fm.layer_id(), std::nullopt, io::RecordKind::kSpatialFeatures, name,
                      fm.n_tokens(), 1});
  }
  io::write_manifest(m);
  write_masks(dir / "masks", r.mask_frames, r.masks);
  io::write_report(dir / "report.jsonl", r.report);
  write_run_meta(dir, "replay", cfg, {});
  out << "replay: " << r.report.frames.size() << " frames, " << r.masks.size() << " masks, "
      << fmt(r.report.elapsed_seconds, 3) << " s\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct MaskArgs {
  Settings settings;
  std::string manifest;
  std::string out_dir;
};

inline int run_mask(const MaskArgs& a, std::ostream& out) {
  const EditConfig cfg = a.settings.resolve();
  const ReplayResult r = replay_edit(a.manifest, cfg, /*with_features=*/false);
  if (r.masks.empty()) throw ValidationError("manifest has no cross-attention records");
  const fs::path dir = a.out_dir;
  write_masks(dir / "masks", r.mask_frames, r.masks);
  std::ostringstream summary;
  summary << "frame\tforeground_pixels\n";
  for (std::size_t i = 0; i < r.masks.size(); ++i) {
    summary << r.mask_frames[i] << '\t' << r.masks[i].count() << '\n';
  }
  write_text(dir / "summary.tsv", summary.str());
  write_run_meta(dir, "mask", cfg, {});
  out << summary.str();
  return 0;
}

// ---------------------------------------------------------------------------

struct MetricsArgs {
  std::string dir_a;
  std::string dir_b;
  std::string mask_dir;
  std::string out_dir;
};

inline int run_metrics(const MetricsArgs& a, std::ostream& out) {
  const LatentVideo va = io::read_latent_frames(a.dir_a);
  const LatentVideo vb = io::read_latent_frames(a.dir_b);
  if (va.frames.size() != vb.frames.size()) {
    throw ValidationError("frame counts differ: " + std::to_string(va.frames.size()) + " vs " +
                          std::to_string(vb.frames.size()));
  }
  std::vector<FeatureTokenMap> tokens;
  for (std::size_t f = 0; f < vb.frames.size(); ++f) tokens.push_back(pixel_tokens(vb.frames[f], f));

  std::ostringstream t;
  t << "frame\tpsnr\tssim\tdrift\n";
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (std::size_t f = 0; f < va.frames.size(); ++f) {
    const ImageGrid ia = to_image(va.frames[f]);
    const ImageGrid ib = to_image(vb.frames[f]);
    std::optional<BinaryMask> region;
    if (!a.mask_dir.empty()) {
      const BinaryMask m = io::read_mask_pgm(fs::path(a.mask_dir) / io::frame_name(f, "pgm"));
      region = upsample_nearest(m, ia.height, ia.width).complement();
    }
    const double p = psnr(ia, ib, region);
    const double s = ssim(ia, ib, region);
    psnr_sum += p;
    ssim_sum += s;
    t << f << '\t' << fmt(p) << '\t' << fmt(s) << '\t'
      << (f == 0 ? std::string("-") : fmt(token_drift({tokens[f - 1], tokens[f]}))) << '\n';
  }
  const double n = static_cast<double>(va.frames.size());
  t << "mean\t" << fmt(psnr_sum / n) << '\t' << fmt(ssim_sum / n) << '\t'
    << (tokens.size() < 2 ? std::string("-") : fmt(token_drift(tokens))) << '\n';
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    write_text(fs::path(a.out_dir) / "metrics.tsv", t.str());
    write_run_meta(a.out_dir, "metrics", EditConfig{},
                   {{"dir_a", a.dir_a}, {"dir_b", a.dir_b}, {"masks", a.mask_dir.empty() ? "none" : a.mask_dir}});
  }
  out << t.str();
  return 0;
}

// ---------------------------------------------------------------------------

struct FmpBenchArgs {
  Settings settings;
  std::string current;
  std::vector<std::string> bank;
  std::string out_dir;
  std::size_t tokens = 1024;
  std::size_t dim = 64;
  std::size_t bank_frames = 5;
  std::size_t repeat = 5;
  bool check = false;
};

inline FeatureTokenMap random_tokens(std::mt19937_64& rng, std::size_t frame, std::size_t n, std::size_t dim) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(n * dim);
  for (float& x : v) x = g(rng);
  return FeatureTokenMap(frame, "bench", n, dim, std::move(v));
}

inline int run_fmp_bench(const FmpBenchArgs& a, std::ostream& out) {
  const EditConfig cfg = a.settings.resolve();
  cfg.propagation.validate();
  if (a.repeat == 0) throw ValidationError("--repeat must be >= 1");
  std::vector<FeatureTokenMap> entries;
  FeatureTokenMap current;
  if (!a.current.empty()) {
    if (a.bank.empty()) throw ValidationError("--current requires at least one --bank tensor");
    for (std::size_t i = 0; i < a.bank.size(); ++i) {
      entries.push_back(io::to_features(io::read_tensor(a.bank[i]), i, "bench", a.bank[i]));
    }
    current = io::to_features(io::read_tensor(a.current), a.bank.size(), "bench", a.current);
  } else {
    if (a.tokens == 0 || a.dim == 0 || a.bank_frames == 0) {
      throw ValidationError("--tokens, --dim and --bank-frames must be >= 1");
    }
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t i = 0; i < a.bank_frames; ++i) entries.push_back(random_tokens(rng, i, a.tokens, a.dim));
    current = random_tokens(rng, a.bank_frames, a.tokens, a.dim);
  }
  MemoryBank bank(entries.size(), cfg.sfm_metric);
  for (auto& e : entries) bank.insert(std::move(e));

  std::vector<double> ms;
  PropagationResult result;
  for (std::size_t r = 0; r < a.repeat; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    result = propagate(current, bank, cfg.propagation);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::optional<double> brute_ms;
  if (a.check) {
    const auto t0 = std::chrono::steady_clock::now();
    const PropagationResult ref = propagate_bruteforce(current, bank, cfg.propagation);
    brute_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (ref.source != result.source) throw Error("fmp-bench: blocked and brute-force sources disagree");
    for (std::size_t i = 0; i < ref.tokens_out.size(); ++i) {
      if (std::fabs(ref.tokens_out[i] - result.tokens_out[i]) > 1e-5f) {
        throw Error("fmp-bench: blocked and brute-force tokens disagree");
      }
    }
  }

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  io::write_tensor(dir / "tokens.eyit", io::Tensor{{result.n_tokens, result.dim}, result.tokens_out});
  std::ostringstream prov;
  prov << "token\tsource_frame\tsource_token\tsimilarity\n";
  for (std::size_t i = 0; i < result.n_tokens; ++i) {
    prov << i << '\t';
    if (result.source[i]) prov << result.source[i]->frame_index << '\t' << result.source[i]->token_index;
    else prov << "-\t-";
    prov << '\t' << fmt(result.best_similarity[i], 9) << '\n';
  }
  write_text(dir / "provenance.tsv", prov.str());
  double mean = 0.0, best = ms.front();
  for (double v : ms) {
    mean += v;
    best = std::min(best, v);
  }
  mean /= static_cast<double>(ms.size());
  std::ostringstream timing;
  timing << "tokens\tbank_rows\tdim\trepeat\tmean_ms\tmin_ms\tbruteforce_ms\treplaced\n"
         << result.n_tokens << '\t' << bank.concat_tokens().rows << '\t' << result.dim << '\t' << a.repeat << '\t'
         << fmt(mean, 3) << '\t' << fmt(best, 3) << '\t' << (brute_ms ? fmt(*brute_ms, 3) : std::string("-"))
         << '\t' << result.replaced_count() << '\n';
  write_text(dir / "timing.tsv", timing.str());
  write_run_meta(dir, "fmp-bench", cfg, {});
  out << timing.str();
  return 0;
}

// ---------------------------------------------------------------------------

struct SfmTraceArgs {
  Settings settings;
  std::string out_dir;
  std::size_t frames = 9;
  std::size_t size = 4;
  std::size_t dim = 16;
  double drift = 0.05;
};

inline int run_sfm_trace(const SfmTraceArgs& a, std::ostream& out) {
  const EditConfig cfg = a.settings.resolve();
  if (cfg.sfm_capacity == 0) throw ValidationError("sfm_len must be >= 1");
  if (a.size == 0 || a.dim == 0) throw ValidationError("--size and --dim must be >= 1");
  ToyFeatureOptions opts;
  opts.seed = cfg.seed;
  opts.drift_rate = a.drift;
  opts.feature_layers = {{"trace", a.size, a.size, a.dim}};
  const ToyFeatureBackend backend(opts);

  MemoryBank bank(cfg.sfm_capacity, cfg.sfm_metric);
  std::ostringstream trace;
  trace << "frame\tadmitted\tevicted\tbank\n";
  auto join = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  for (std::size_t f = 0; f < a.frames; ++f) {
    const InsertReport rep = bank.insert(backend.features(f, 0));
    trace << f << '\t' << (rep.admitted ? "yes" : "no") << '\t'
          << (rep.evicted_frame ? std::to_string(*rep.evicted_frame) : std::string("-")) << '\t'
          << join(bank.frame_indices()) << '\n';
  }

  const fs::path dir = a.out_dir;
  fs::create_directories(dir / "bank");
  write_text(dir / "trace.tsv", trace.str());
  io::RecordManifest m;
  m.directory = dir / "bank";
  for (const auto& e : bank.entries()) {
    const std::string name = io::frame_name(e.frame_index(), "eyit");
    io::write_tensor(m.directory / name, io::to_tensor(e));
    m.rows.push_back({e.frame_index(), 0, e.layer_id(), std::nullopt, io::RecordKind::kSpatialFeatures, name,
                      a.size, a.size});
  }
  io::write_manifest(m);
  write_run_meta(dir, "sfm-trace", cfg,
                 {{"frames", std::to_string(a.frames)},
                  {"size", std::to_string(a.size)},
                  {"dim", std::to_string(a.dim)},
                  {"drift", io::detail::fmt_double(a.drift)}});
  out << "final bank: " << join(bank.frame_indices()) << '\n';
  return 0;
}

inline std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace detail

/// Runs one subcommand. Returns the process exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"vedit: zero-shot video editing consistency engine", "vedit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "toy end-to-end edit of a synthetic video");
  add_settings(simulate, sim.settings, all_keys());
  simulate->add_option("--out-dir", sim.out_dir, "output directory")->required();
  simulate->add_option("--frames", sim.frames, "number of frames")->capture_default_str();
  simulate->add_option("--channels", sim.channels, "latent channels")->capture_default_str();
  simulate->add_option("--size", sim.size, "latent height and width")->capture_default_str();
  simulate->add_option("--drift", sim.drift, "feature drift per frame")->capture_default_str();
  simulate->add_option("--edit-level", sim.edit_level, "toy edit prompt level")->capture_default_str();

  ReplayArgs rep;
  auto* replay = app.add_subcommand("replay", "propagation and masks over a recorded manifest");
  add_settings(replay, rep.settings, all_keys());
  replay->add_option("record_dir,--manifest", rep.record_dir, "recording directory or manifest.jsonl")->required();
  replay->add_option("--out-dir", rep.out_dir, "output directory")->required();

  MaskArgs msk;
  auto* mask = app.add_subcommand("mask", "mask extraction from recorded cross-attention");
  add_settings(mask, msk.settings,
               {"steps", "tau", "mask_step_begin", "mask_step_end", "mask_layers", "attention_side", "words",
                "attention_mode", "connectivity"});
  mask->add_option("record_dir,--manifest", msk.manifest, "recording directory or manifest.jsonl")->required();
  mask->add_option("--out-dir", msk.out_dir, "output directory")->required();

  MetricsArgs met;
  auto* metrics = app.add_subcommand("metrics", "PSNR, SSIM and token drift between frame directories");
  metrics->add_option("dir_a", met.dir_a, "reference frames (frame_NNNN.eyit)")->required();
  metrics->add_option("dir_b", met.dir_b, "compared frames (frame_NNNN.eyit)")->required();
  metrics->add_option("--masks", met.mask_dir, "foreground masks; metrics use their complement");
  metrics->add_option("--out-dir", met.out_dir, "also write metrics.tsv here");

  FmpBenchArgs fmp;
  auto* bench = app.add_subcommand("fmp-bench", "feature propagation timing");
  add_settings(bench, fmp.settings, {"lambda", "similarity", "seed"});
  bench->add_option("--current", fmp.current, "current-frame tokens (rank-2 tensor)");
  bench->add_option("--bank", fmp.bank, "bank entries (rank-2 tensors, oldest first)");
  bench->add_option("--out-dir", fmp.out_dir, "output directory")->required();
  bench->add_option("--tokens", fmp.tokens, "random instance: tokens per frame")->capture_default_str();
  bench->add_option("--dim", fmp.dim, "random instance: token dimension")->capture_default_str();
  bench->add_option("--bank-frames", fmp.bank_frames, "random instance: bank entries")->capture_default_str();
  bench->add_option("--repeat", fmp.repeat, "timed repetitions")->capture_default_str();
  bench->add_flag("--check", fmp.check, "also run the brute-force search and compare");

  SfmTraceArgs trc;
  auto* trace = app.add_subcommand("sfm-trace", "memory bank evolution over a toy feature stream");
  add_settings(trace, trc.settings, {"sfm_len", "sfm_metric", "seed"});
  trace->add_option("--out-dir", trc.out_dir, "output directory")->required();
  trace->add_option("--frames", trc.frames, "frames inserted")->capture_default_str();
  trace->add_option("--size", trc.size, "token grid side")->capture_default_str();
  trace->add_option("--dim", trc.dim, "token dimension")->capture_default_str();
  trace->add_option("--drift", trc.drift, "feature drift per frame")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << '\n';
    const CLI::App* failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << failing->help();
    return 2;
  }

  try {
    if (*simulate) return run_simulate(sim, out);
    if (*replay) return run_replay(rep, out);
    if (*mask) return run_mask(msk, out);
    if (*metrics) return run_metrics(met, out);
    if (*bench) return run_fmp_bench(fmp, out);
    if (*trace) return run_sfm_trace(trc, out);
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 2;
}

}  // namespace vedit::cli
