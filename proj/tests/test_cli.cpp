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

#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "support/testing.hpp"
#include "vedit/cli.hpp"
#include "vedit/io/pgm.hpp"
#include "vedit/replay.hpp"

namespace vedit::cli {
namespace {

namespace fs = std::filesystem;
using testing::ScratchDir;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "vedit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::detail::read_file(e.path());
  }
  return files;
}

std::string text(const fs::path& p) { return io::detail::read_file(p); }

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string meta_value(const fs::path& dir, const std::string& key) {
  for (const auto& l : lines(text(dir / "run.meta"))) {
    if (l.rfind(key + " = ", 0) == 0) return l.substr(key.size() + 3);
  }
  return "<missing>";
}

TEST(Cli, SimulateIsDeterministic) {
  ScratchDir a("cli_sim_a"), b("cli_sim_b");
  const std::vector<std::string> args = {"--frames", "8", "--sfm-len", "5", "--lambda", "0.9", "--seed", "7",
                                         "--steps", "10", "--size", "16"};
  auto with_dir = [&](const ScratchDir& d) {
    std::vector<std::string> v = {"simulate", "--out-dir", d.path().string()};
    v.insert(v.end(), args.begin(), args.end());
    return v;
  };
  ASSERT_EQ(run(with_dir(a)).code, 0);
  ASSERT_EQ(run(with_dir(b)).code, 0);
  const auto ta = tree(a.path()), tb = tree(b.path());
  EXPECT_EQ(ta, tb);
  EXPECT_TRUE(ta.count("run.meta"));
  EXPECT_TRUE(ta.count("report.jsonl"));
  EXPECT_TRUE(ta.count("edited/frame_0007.eyit"));
  EXPECT_TRUE(ta.count("masks/frame_0000.pgm"));
  EXPECT_EQ(meta_value(a.path(), "lambda"), "0.9");
  EXPECT_EQ(meta_value(a.path(), "sfm_len"), "5");
}

TEST(Cli, MetricsOfADirectoryAgainstItself) {
  ScratchDir d("cli_metrics");
  ASSERT_EQ(run({"simulate", "--out-dir", d.path().string(), "--frames", "3", "--steps", "4", "--size", "16"}).code, 0);
  const Outcome r = run({"metrics", (d / "source").string(), (d / "source").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 5u);  // header, 3 frames, mean
  EXPECT_EQ(rows[0], "frame\tpsnr\tssim\tdrift");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_NE(rows[i].find("\t99.000000\t1.000000\t"), std::string::npos) << rows[i];
  }
}

TEST(Cli, BackgroundMetricsWithMasks) {
  ScratchDir d("cli_bg");
  ASSERT_EQ(run({"simulate", "--out-dir", d.path().string(), "--frames", "2", "--steps", "6", "--size", "16",
                 "--inject-start", "0"})
                .code,
            0);
  const Outcome r = run({"metrics", (d / "source").string(), (d / "edited").string(), "--masks",
                     (d / "masks").string(), "--out-dir", (d / "m").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (std::size_t i = 1; i < 3; ++i) {
    EXPECT_NE(lines(r.out)[i].find("\t99.000000\t1.000000\t"), std::string::npos) << lines(r.out)[i];
  }
  EXPECT_TRUE(fs::exists(d / "m" / "metrics.tsv"));
}

TEST(Cli, SfmTraceFinalBank) {
  ScratchDir d("cli_trace");
  const Outcome r = run({"sfm-trace", "--frames", "9", "--sfm-len", "5", "--out-dir", d.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("final bank: 0,1,5,7,8"), std::string::npos) << r.out;
  const auto rows = lines(text(d / "trace.tsv"));
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[7], "6\tyes\t3\t0,1,2,5,6");
  EXPECT_TRUE(fs::exists(d / "run.meta"));
  EXPECT_TRUE(fs::exists(d / "bank" / "manifest.jsonl"));
}

TEST(Cli, FmpBenchCheck) {
  ScratchDir d("cli_bench");
  const Outcome r = run({"fmp-bench", "--tokens", "64", "--dim", "16", "--bank-frames", "3", "--repeat", "1",
                     "--check", "--out-dir", d.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "tokens.eyit"));
  EXPECT_TRUE(fs::exists(d / "provenance.tsv"));
  EXPECT_TRUE(fs::exists(d / "run.meta"));
}

TEST(Cli, ReplayAndMaskOverARecording) {
  ScratchDir rec("cli_rec"), out("cli_replay"), masks("cli_mask");
  ToyFeatureOptions o;
  o.feature_layers = {{"down_1", 4, 4, 8}};
  o.attention_layers = {{"down_0", 16, 1}};
  record_toy_run(rec.path(), ToyFeatureBackend(o), 3, 4);

  const Outcome r = run({"replay", rec.path().string(), "--out-dir", out.path().string(), "--steps", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "features" / "manifest.jsonl"));
  EXPECT_TRUE(fs::exists(out / "masks" / "frame_0002.pgm"));
  EXPECT_TRUE(fs::exists(out / "report.jsonl"));
  EXPECT_TRUE(fs::exists(out / "run.meta"));

  const Outcome m = run({"mask", "--manifest", (rec / "manifest.jsonl").string(), "--out-dir", masks.path().string(),
                     "--tau", "0.3"});
  ASSERT_EQ(m.code, 0) << m.err;
  for (const char* f : {"frame_0000.pgm", "frame_0001.pgm", "frame_0002.pgm"}) {
    EXPECT_EQ(io::read_mask_pgm(masks / "masks" / f), io::read_mask_pgm(out / "masks" / f)) << f;
  }
  EXPECT_EQ(lines(text(masks / "summary.tsv")).size(), 4u);
}

TEST(Cli, PrecedenceFlagOverConfigOverDefault) {
  ScratchDir d("cli_prec");
  {
    std::ofstream cfg(d / "run.cfg");
    cfg << "lambda = 0.5\ntau = 0.4\nsfm_len = 3\n";
  }
  const Outcome r = run({"sfm-trace", "--frames", "4", "--config", (d / "run.cfg").string(), "--sfm-len", "2",
                     "--out-dir", (d / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(meta_value(d / "o", "sfm_len"), "2");
  EXPECT_EQ(meta_value(d / "o", "lambda"), "0.5");
  EXPECT_EQ(meta_value(d / "o", "tau"), "0.4");
  EXPECT_EQ(meta_value(d / "o", "guidance"), "7.5");
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, 2);

  const Outcome unknown = run({"transmogrify"});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.err.find("error:"), std::string::npos);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos);

  ScratchDir d("cli_codes");
  EXPECT_EQ(run({"sfm-trace", "--out-dir", d.path().string(), "--bogus-flag"}).code, 2);

  const Outcome bad = run({"simulate", "--out-dir", d.path().string(), "--lambda", "abc"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(lines(bad.err).size(), 1u) << bad.err;

  const Outcome invalid = run({"simulate", "--out-dir", d.path().string(), "--tau", "1.5"});
  EXPECT_EQ(invalid.code, 1);
  EXPECT_EQ(lines(invalid.err).size(), 1u);

  const Outcome missing = run({"metrics", (d / "nope").string(), (d / "nope").string()});
  EXPECT_EQ(missing.code, 1);
}

}  // namespace
}  // namespace vedit::cli
