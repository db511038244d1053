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

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support/testing.hpp"
#include "vedit/io/convert.hpp"
#include "vedit/io/manifest.hpp"
#include "vedit/io/pgm.hpp"
#include "vedit/io/report.hpp"
#include "vedit/io/run_config.hpp"
#include "vedit/io/tensor_file.hpp"

namespace vedit::io {
namespace {

namespace fs = std::filesystem;
using testing::Gen;
using testing::ScratchDir;
using Code = FormatError::Code;

const fs::path kData = VEDIT_TEST_DATA_DIR;

template <typename F>
Code format_code(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no FormatError thrown";
  return Code::kIo;
}

std::string slurp(const fs::path& p) { return detail::read_file(p); }

void spit(const fs::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

TEST(TensorFile, RoundTripTwoByThree) {
  ScratchDir dir("tensor");
  const std::vector<std::uint64_t> dims = {2, 3};
  const std::vector<float> v = {1.0f, -0.0f, 3.5e-38f, 1e30f, -2.25f, 7.0f};
  write_tensor(dir / "t.eyit", dims, v);
  const Tensor t = read_tensor(dir / "t.eyit");
  EXPECT_EQ(t.dims, dims);
  EXPECT_TRUE(bit_equal(t.values, v));
  EXPECT_EQ(slurp(dir / "t.eyit").size(), 8u + 16u + 24u);
}

TEST(TensorFile, HeaderLayoutIsLittleEndian) {
  const std::vector<std::uint64_t> dims = {1, 258};
  const std::string bytes = encode_tensor(dims, std::vector<float>(258, 1.0f));
  EXPECT_EQ(bytes.substr(0, 4), "EYIT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 2u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 2u);  // 258 = 0x0102
  EXPECT_EQ(static_cast<unsigned char>(bytes[17]), 1u);
  EXPECT_EQ(bytes.substr(24, 4), std::string("\x00\x00\x80\x3f", 4));
}

TEST(TensorFile, GoldenFileFromIndependentWriter) {
  const fs::path golden = kData / "golden_2x3.eyit";
  const Tensor t = read_tensor(golden);
  EXPECT_EQ(t.dims, (std::vector<std::uint64_t>{2, 3}));
  EXPECT_TRUE(bit_equal(t.values, {0.5f, -1.25f, 3.0f, 1e-3f, 65504.0f, -0.0f}));
  EXPECT_EQ(encode_tensor(t.dims, t.values), slurp(golden));
}

TEST(TensorFile, PropertyRoundTripIsBitwise) {
  Gen g(1);
  ScratchDir dir("tensor_prop");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rank = g.size(0, 4);
    std::vector<std::uint64_t> dims(rank);
    std::size_t n = 1;
    for (auto& d : dims) n *= (d = g.size(0, 5));
    std::vector<float> v(n);
    for (float& x : v) x = std::bit_cast<float>(static_cast<std::uint32_t>(g.engine()()) & 0xBF7FFFFFu);
    write_tensor(dir / "p.eyit", dims, v);
    const Tensor t = read_tensor(dir / "p.eyit");
    ASSERT_EQ(t.dims, dims);
    ASSERT_TRUE(bit_equal(t.values, v));
  }
}

TEST(TensorFile, CorruptHeaders) {
  const std::vector<std::uint64_t> dims = {10};
  const std::string good = encode_tensor(dims, std::vector<float>(10, 0.5f));

  std::string bad = good;
  bad.replace(0, 4, "XXXX");
  EXPECT_EQ(format_code([&] { decode_tensor(bad); }), Code::kBadMagic);

  EXPECT_EQ(format_code([&] { decode_tensor(good.substr(0, good.size() - 4)); }), Code::kTruncated);
  EXPECT_EQ(format_code([&] { decode_tensor(good.substr(0, 5)); }), Code::kTruncated);
  EXPECT_EQ(format_code([&] { decode_tensor(good.substr(0, 12)); }), Code::kTruncated);
  EXPECT_EQ(format_code([&] { decode_tensor(good + "x"); }), Code::kTrailingBytes);

  bad = good;
  bad[4] = 2;
  EXPECT_EQ(format_code([&] { decode_tensor(bad); }), Code::kUnsupportedVersion);
  bad = good;
  bad[6] = 2;
  EXPECT_EQ(format_code([&] { decode_tensor(bad); }), Code::kUnsupportedDtype);

  std::string huge = std::string("EYIT\x01\x00\x01\x02", 8);
  for (int d = 0; d < 2; ++d) huge += std::string(8, '\xff');
  EXPECT_EQ(format_code([&] { decode_tensor(huge); }), Code::kDimOverflow);
}

TEST(TensorFile, WriteErrors) {
  ScratchDir dir("tensor_err");
  const std::vector<std::uint64_t> dims = {2};
  EXPECT_EQ(format_code([&] { write_tensor(dir / "n.eyit", dims, std::vector<float>{1.0f, NAN}); }),
            Code::kNonFinite);
  EXPECT_FALSE(fs::exists(dir / "n.eyit"));
  EXPECT_THROW(write_tensor(dir / "s.eyit", dims, std::vector<float>{1.0f}), ShapeError);
  EXPECT_EQ(format_code([&] { read_tensor(dir / "missing.eyit"); }), Code::kIo);
}

TEST(TensorFile, ReadErrorNamesThePath) {
  ScratchDir dir("tensor_path");
  spit(dir / "broken.eyit", "NOPE0000");
  try {
    read_tensor(dir / "broken.eyit");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.eyit"), std::string::npos);
  }
}

TEST(Pgm, RoundTripFiveByFive) {
  ScratchDir dir("pgm");
  const BinaryMask m = testing::mask_from_rows({"#...#", ".#.#.", "..#..", ".#.#.", "#...#"});
  write_mask_pgm(dir / "m.pgm", m);
  EXPECT_EQ(read_mask_pgm(dir / "m.pgm"), m);
  const std::string bytes = slurp(dir / "m.pgm");
  EXPECT_EQ(bytes.substr(0, 11), "P5\n5 5\n255\n");
  EXPECT_EQ(static_cast<unsigned char>(bytes[11]), 255u);
  EXPECT_EQ(bytes[12], '\0');
}

TEST(Pgm, PropertyRoundTrip) {
  Gen g(2);
  for (int trial = 0; trial < 100; ++trial) {
    const BinaryMask m = g.mask(g.size(1, 20), g.size(1, 20), g.real(0.0, 1.0));
    ASSERT_EQ(decode_mask_pgm(encode_mask_pgm(m)), m);
  }
}

TEST(Pgm, AcceptsHeaderComments) {
  const std::string bytes = std::string("P5\n# made elsewhere\n2 1\n255\n") + '\xff' + '\0';
  const BinaryMask m = decode_mask_pgm(bytes);
  EXPECT_TRUE(m.at(0, 0));
  EXPECT_FALSE(m.at(0, 1));
}

TEST(Pgm, Errors) {
  EXPECT_EQ(format_code([] { decode_mask_pgm("P2\n2 1\n255\n255 0\n"); }), Code::kBadPgm);
  EXPECT_EQ(format_code([] { decode_mask_pgm(std::string("P5\n2 1\n255\n") + '\x80' + '\0'); }), Code::kBadPgm);
  EXPECT_EQ(format_code([] { decode_mask_pgm(std::string("P5\n2 1\n15\n") + '\0' + '\0'); }), Code::kBadPgm);
  EXPECT_EQ(format_code([] { decode_mask_pgm(std::string("P5\n2 2\n255\n") + '\0' + '\0'); }), Code::kTruncated);
  EXPECT_EQ(format_code([] { decode_mask_pgm("GIF89a"); }), Code::kBadPgm);
}

// Writes tensors and a manifest for a tiny feature-only recording.
RecordManifest feature_recording(const fs::path& dir, std::size_t frames, std::size_t steps) {
  RecordManifest m;
  m.directory = dir;
  m.header = ManifestHeader{kManifestVersion, frames, steps, {"L"}};
  const std::vector<std::uint64_t> dims = {4, 2};
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t s = 0; s < steps; ++s) {
      const std::string name = "f" + std::to_string(f) + "s" + std::to_string(s) + ".eyit";
      write_tensor(dir / name, dims, std::vector<float>(8, static_cast<float>(f + s)));
      m.rows.push_back({f, s, "L", std::nullopt, RecordKind::kSpatialFeatures, name, 2, 2});
    }
  }
  write_manifest(m);
  return m;
}

TEST(Manifest, RoundTripAndCompleteness) {
  ScratchDir dir("manifest");
  const RecordManifest written = feature_recording(dir.path(), 2, 3);
  const RecordManifest m = load_manifest(dir.path());
  ASSERT_TRUE(m.header);
  EXPECT_EQ(m.header->frames, 2u);
  EXPECT_EQ(m.rows.size(), 6u);
  for (std::size_t i = 0; i < m.rows.size(); ++i) EXPECT_EQ(m.rows[i].key(), written.rows[i].key());
  EXPECT_NO_THROW(check_complete(m));
}

TEST(Manifest, GoldenRecordingFromIndependentWriter) {
  const RecordManifest m = load_manifest(kData / "golden_record");
  EXPECT_EQ(m.rows.size(), 2u * 2u * 3u);
  EXPECT_NO_THROW(check_complete(m));
  for (const auto& r : m.rows) {
    const Tensor t = read_tensor(m.resolve(r));
    ASSERT_EQ(t.dims.size(), 2u);
    if (r.kind != RecordKind::kCrossK) {
      EXPECT_EQ(t.dims[0], r.height * r.width) << r.describe();
    }
  }
}

TEST(Manifest, DuplicateTupleRejected) {
  ScratchDir dir("manifest_dup");
  feature_recording(dir.path(), 1, 1);
  std::string text = slurp(dir / "manifest.jsonl");
  text += text.substr(text.find('\n') + 1);
  spit(dir / "manifest.jsonl", text);
  try {
    load_manifest(dir.path());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), Code::kBadManifest);
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(Manifest, MissingFileRejected) {
  ScratchDir dir("manifest_missing");
  feature_recording(dir.path(), 2, 1);
  fs::remove(dir / "f1s0.eyit");
  EXPECT_EQ(format_code([&] { load_manifest(dir.path()); }), Code::kMissingRecord);
}

TEST(Manifest, MissingTupleIsNamed) {
  ScratchDir dir("manifest_gap");
  feature_recording(dir.path(), 2, 2);
  std::string text = slurp(dir / "manifest.jsonl");
  const auto pos = text.find("f1s1.eyit");
  const auto begin = text.rfind('\n', pos) + 1;
  text.erase(begin, text.find('\n', pos) - begin + 1);
  spit(dir / "manifest.jsonl", text);
  const RecordManifest m = load_manifest(dir.path());
  try {
    check_complete(m);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), Code::kMissingRecord);
    EXPECT_NE(std::string(e.what()).find("frame=1 step=1 layer=L"), std::string::npos) << e.what();
  }
}

TEST(Manifest, BadLinesAndVersions) {
  ScratchDir dir("manifest_bad");
  spit(dir / "manifest.jsonl", "{\"manifest_version\": 2}\n");
  EXPECT_EQ(format_code([&] { load_manifest(dir.path()); }), Code::kUnsupportedVersion);
  spit(dir / "manifest.jsonl", "{not json\n");
  EXPECT_EQ(format_code([&] { load_manifest(dir.path()); }), Code::kBadManifest);
  spit(dir / "manifest.jsonl", "{\"frame\": 0}\n");
  EXPECT_EQ(format_code([&] { load_manifest(dir.path()); }), Code::kBadManifest);
  spit(dir / "manifest.jsonl",
       "{\"frame\":0,\"step\":0,\"layer\":\"L\",\"kind\":\"weights\",\"path\":\"x\",\"h\":1,\"w\":1}\n");
  EXPECT_EQ(format_code([&] { load_manifest(dir.path()); }), Code::kBadManifest);
  EXPECT_EQ(format_code([&] { load_manifest(dir / "nowhere"); }), Code::kIo);
}

TEST(RunConfig, FileValuesAndComments) {
  EditConfig cfg;
  apply_config_text(cfg, "# tuned\nsteps = 20\nlambda=0.75  # inline\n\nsfm_metric = mean-token-cosine\nwords = 1, 3\n");
  EXPECT_EQ(cfg.steps, 20u);
  EXPECT_EQ(cfg.propagation.lambda, 0.75);
  EXPECT_EQ(cfg.sfm_metric, DistanceMetric::kMeanTokenCosine);
  EXPECT_EQ(cfg.mask.words, (std::vector<std::size_t>{1, 3}));
}

TEST(RunConfig, UnknownKeyAndBadValuesRejected) {
  EditConfig cfg;
  try {
    apply_config_text(cfg, "steps = 4\nlamda = 0.5\n", "run.cfg");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("lamda"), std::string::npos);
  }
  EXPECT_THROW(apply_setting(cfg, "steps", "-3"), ValidationError);
  EXPECT_THROW(apply_setting(cfg, "tau", "high"), ValidationError);
  EXPECT_THROW(apply_setting(cfg, "connectivity", "6"), ValidationError);
  EXPECT_THROW(apply_config_text(cfg, "just words\n"), ValidationError);
  EXPECT_THROW(apply_config_file(cfg, "/nonexistent/run.cfg"), ValidationError);
}

TEST(RunConfig, PrecedenceFlagOverConfigOverDefault) {
  ScratchDir dir("config");
  spit(dir / "run.cfg", "lambda = 0.5\ntau = 0.4\n");
  EditConfig cfg;
  const EditConfig defaults;
  apply_config_file(cfg, dir / "run.cfg");
  apply_setting(cfg, "lambda", "0.8");  // as a command-line flag would
  EXPECT_EQ(cfg.propagation.lambda, 0.8);
  EXPECT_EQ(cfg.mask.tau, 0.4);
  EXPECT_EQ(cfg.guidance, defaults.guidance);
}

TEST(RunConfig, EncodeCoversEveryKeyAndParsesBack) {
  EditConfig cfg;
  cfg.steps = 12;
  cfg.propagation.lambda = 0.1;
  cfg.mask.tau = 0.35;
  cfg.mask.layers = {"a", "b"};
  cfg.seed = 99;
  cfg.source_trajectory = SourceTrajectory::kCached;
  const std::string text = encode_config(cfg);
  for (const auto& key : config_keys()) {
    EXPECT_NE(("\n" + text).find("\n" + key + " = "), std::string::npos) << key;
  }
  EditConfig back;
  apply_config_text(back, text);
  EXPECT_EQ(encode_config(back), text);
  EXPECT_EQ(back.propagation.lambda, 0.1);
  EXPECT_EQ(back.source_trajectory, SourceTrajectory::kCached);
}

TEST(Report, JsonLinesShape) {
  EditReport r;
  r.steps.push_back({0, 1, 2.5, 3, 4, true});
  FrameReport fr;
  fr.frame = 0;
  fr.replacement_rate = 0.75;
  fr.evictions.push_back({"L", InsertReport{0, true, std::nullopt}});
  r.frames.push_back(fr);
  r.storage.retained_per_layer["L"] = 10;
  r.storage.retained_total = 10;
  const std::string text = encode_report(r);
  std::istringstream in(text);
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0]["type"], "step");
  EXPECT_EQ(rows[0]["replaced"], 3);
  EXPECT_EQ(rows[1]["type"], "frame");
  EXPECT_TRUE(rows[1]["sfm"][0]["evicted"].is_null());
  EXPECT_EQ(rows[2]["type"], "storage");
  EXPECT_EQ(rows[2]["retained_per_layer"]["L"], 10);
  EXPECT_EQ(text.find("elapsed"), std::string::npos);
}

TEST(Convert, LatentFramesRoundTrip) {
  Gen g(3);
  ScratchDir dir("frames");
  LatentVideo v;
  for (int f = 0; f < 3; ++f) v.frames.push_back(g.latent(2, 3, 4));
  write_latent_frames(dir.path(), v);
  EXPECT_EQ(list_frames(dir.path(), "eyit").size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "frame_0002.eyit"));
  const LatentVideo back = read_latent_frames(dir.path());
  ASSERT_EQ(back.frames.size(), 3u);
  for (int f = 0; f < 3; ++f) EXPECT_EQ(max_abs_diff(back.frames[f], v.frames[f]), 0.0);
  const std::vector<std::uint64_t> dims = {2, 2};
  write_tensor(dir / "flat.eyit", dims, std::vector<float>(4));
  EXPECT_THROW(to_latent(read_tensor(dir / "flat.eyit")), ShapeError);
}

}  // namespace
}  // namespace vedit::io
