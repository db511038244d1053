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

#include <cstring>
#include <fstream>

#include <gtest/gtest.h>

#include "support/testing.hpp"
#include "vedit/replay.hpp"

namespace vedit {
namespace {

namespace fs = std::filesystem;
using testing::ScratchDir;

const fs::path kData = VEDIT_TEST_DATA_DIR;

bool bit_equal(const FeatureTokenMap& a, const FeatureTokenMap& b) {
  return a.n_tokens() == b.n_tokens() && a.dim() == b.dim() &&
         std::memcmp(a.tokens().data(), b.tokens().data(), a.tokens().size() * sizeof(float)) == 0;
}

ToyFeatureOptions toy(double drift = 0.05) {
  ToyFeatureOptions o;
  o.seed = 21;
  o.drift_rate = drift;
  o.feature_layers = {{"down_1", 4, 4, 8}};
  o.attention_layers = {{"down_0", 8, 1}};
  return o;
}

EditConfig replay_config() {
  EditConfig cfg;
  cfg.mask.attention_side = 8;
  return cfg;
}

TEST(Replay, SingleFrameIsIdentity) {
  ScratchDir dir("replay_one");
  const ToyFeatureBackend backend(toy());
  record_toy_run(dir.path(), backend, 1, 3);
  const ReplayResult r = replay_edit(dir.path(), replay_config());
  ASSERT_EQ(r.features.size(), 3u);
  for (const auto& pf : r.features) {
    EXPECT_EQ(pf.replaced, 0u);
    EXPECT_TRUE(bit_equal(pf.features, backend.features(0, 0)));
  }
  ASSERT_EQ(r.masks.size(), 1u);
  EXPECT_GT(r.masks[0].count(), 0u);
}

TEST(Replay, DuplicatedFrameReturnsStoredTokens) {
  ScratchDir dir("replay_dup");
  const ToyFeatureBackend backend(toy(0.0));
  record_toy_run(dir.path(), backend, 2, 4);
  for (double lambda : {-1.0, 0.0, 0.5, 1.0}) {
    EditConfig cfg = replay_config();
    cfg.propagation.lambda = lambda;
    const ReplayResult r = replay_edit(dir.path(), cfg);
    ASSERT_EQ(r.features.size(), 8u);
    const FeatureTokenMap& stored = r.features[2].features;  // frame 0 at the bank-update step
    for (std::size_t i = 4; i < 8; ++i) {
      EXPECT_EQ(r.features[i].frame, 1u);
      EXPECT_TRUE(bit_equal(r.features[i].features, stored)) << "lambda " << lambda << " step " << i - 4;
    }
  }
}

TEST(Replay, MatchesLivePropagationOnTheSameStream) {
  ScratchDir dir("replay_live");
  const ToyFeatureBackend backend(toy(0.3));
  record_toy_run(dir.path(), backend, 6, 2);
  EditConfig cfg = replay_config();
  cfg.sfm_capacity = 3;
  cfg.propagation.lambda = 0.7;
  const ReplayResult r = replay_edit(dir.path(), cfg);

  MemoryBank bank(3);
  std::size_t i = 0;
  for (std::size_t f = 0; f < 6; ++f) {
    for (std::size_t s = 0; s < 2; ++s, ++i) {
      const PropagationResult p = propagate(backend.features(f, 0), bank, cfg.propagation);
      ASSERT_TRUE(bit_equal(r.features[i].features, p.as_feature_map(f, "down_1")));
      if (s == 1) bank.insert(p.as_feature_map(f, "down_1"));
    }
  }
  EXPECT_EQ(r.report.storage.retained_total, bank.retained_floats());
}

TEST(Replay, TruncatedManifestNamesTheMissingTuple) {
  ScratchDir dir("replay_trunc");
  record_toy_run(dir.path(), ToyFeatureBackend(toy()), 2, 2);
  std::ifstream in(dir / "manifest.jsonl");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  in.close();
  std::ofstream out(dir / "manifest.jsonl", std::ios::trunc);
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) out << lines[i] << '\n';  // drop the last record
  out.close();
  try {
    replay_edit(dir.path(), replay_config());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatError::Code::kMissingRecord);
    EXPECT_NE(std::string(e.what()).find("frame=1 step=1 layer=down_0 head=0"), std::string::npos) << e.what();
  }
}

TEST(Replay, MissingTensorAndVersionErrors) {
  ScratchDir dir("replay_missing");
  record_toy_run(dir.path(), ToyFeatureBackend(toy()), 1, 1);
  for (const auto& e : fs::directory_iterator(dir.path())) {
    if (e.path().extension() == ".eyit") {
      std::ofstream(e.path(), std::ios::binary | std::ios::trunc) << "EYIT\x07";
      break;
    }
  }
  EXPECT_THROW(replay_edit(dir.path(), replay_config()), FormatError);
}

TEST(Replay, GoldenRecordingFromIndependentWriter) {
  EditConfig cfg = replay_config();
  cfg.mask.attention_side = 2;
  const ReplayResult r = replay_edit(kData / "golden_record", cfg);
  EXPECT_EQ(r.features.size(), 4u);
  ASSERT_EQ(r.masks.size(), 2u);
  EXPECT_EQ(r.masks[0].height(), 2u);
  EXPECT_EQ(r.report.frames.size(), 2u);
}

TEST(Replay, MaskOnlyModeSkipsFeatures) {
  ScratchDir dir("replay_masks");
  const ToyFeatureBackend backend(toy());
  record_toy_run(dir.path(), backend, 3, 4);
  const ReplayResult full = replay_edit(dir.path(), replay_config());
  const ReplayResult masks = replay_edit(dir.path(), replay_config(), false);
  EXPECT_TRUE(masks.features.empty());
  ASSERT_EQ(masks.masks.size(), 3u);
  for (std::size_t f = 0; f < 3; ++f) EXPECT_EQ(masks.masks[f], full.masks[f]);
}

}  // namespace
}  // namespace vedit
