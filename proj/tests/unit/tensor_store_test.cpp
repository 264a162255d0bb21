/*
 * Copyright 2026 The maskflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "maskflow/tensor_store.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "json.hpp"
#include "maskflow/error.hpp"
#include "test_support.hpp"

namespace maskflow {
namespace {

using testing::fixture;
using testing::TempDir;

// Runs `fn`, expecting an Error of `category` whose message contains `needle`.
template <class Fn>
void expect_error(Fn&& fn, ErrorCategory category, const std::string& needle) {
  try {
    fn();
    FAIL() << "no error thrown, wanted: " << needle;
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), category) << e.what();
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(FeatureFile, GoldenBytes) {
  std::vector<float> v(24);
  for (int i = 0; i < 24; ++i) v[i] = static_cast<float>(i - 10) * 0.25f;
  const FeatureMap grid(2, 3, 4, v);
  EXPECT_EQ(encode_feature_map(grid), read_file_bytes(fixture("golden_2x3x4.fmap")));
  EXPECT_EQ(read_feature_map(fixture("golden_2x3x4.fmap")), grid);
}

TEST(FeatureFile, HeaderLayout) {
  const auto bytes = encode_feature_map(FeatureMap(2, 3, 4));
  ASSERT_EQ(bytes.size(), kFeatureHeaderBytes + 2 * 3 * 4 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FMAP");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 1);
  EXPECT_EQ(bytes[6], 3);
  EXPECT_EQ(bytes[7], 0);
  // Little-endian u32 dims.
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[9], 0);
  EXPECT_EQ(bytes[12], 3);
  EXPECT_EQ(bytes[16], 4);
}

TEST(FeatureFile, ZeroGridRoundTrip) {
  TempDir tmp;
  const FeatureMap grid(2, 2, 3);
  write_feature_map(tmp / "a.fmap", grid);
  EXPECT_EQ(read_feature_map(tmp / "a.fmap"), grid);
}

TEST(FeatureFile, DeterministicBytes) {
  TempDir tmp;
  testing::Rng rng(7);
  const auto grid = testing::random_features(rng, 5, 3, 6);
  write_feature_map(tmp / "a.fmap", grid);
  write_feature_map(tmp / "b.fmap", grid);
  EXPECT_EQ(read_file_bytes(tmp / "a.fmap"), read_file_bytes(tmp / "b.fmap"));
}

TEST(FeatureFile, RandomRoundTripIsBitExact) {
  testing::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto grid = testing::random_features(rng, testing::uniform_int(rng, 1, 9),
                                               testing::uniform_int(rng, 1, 9),
                                               testing::uniform_int(rng, 1, 17));
    EXPECT_EQ(decode_feature_map(encode_feature_map(grid)), grid);
  }
}

TEST(FeatureFile, RejectsNonFiniteOnWrite) {
  TempDir tmp;
  FeatureMap grid(1, 1, 2);
  grid.values()[1] = std::numeric_limits<float>::quiet_NaN();
  expect_error([&] { write_feature_map(tmp / "x.fmap", grid); }, ErrorCategory::kFormat,
               "non-finite value");
  grid.values()[1] = std::numeric_limits<float>::infinity();
  expect_error([&] { encode_feature_map(grid); }, ErrorCategory::kFormat, "non-finite value");
  EXPECT_FALSE(std::filesystem::exists(tmp / "x.fmap"));
}

TEST(FeatureFile, MinimalFile) {
  const auto grid = read_feature_map(fixture("one_1x1x1.fmap"));
  ASSERT_EQ(grid.height(), 1);
  ASSERT_EQ(grid.width(), 1);
  ASSERT_EQ(grid.channels(), 1);
  EXPECT_EQ(grid.values()[0], 1.5f);
}

TEST(FeatureFile, ReadErrors) {
  expect_error([] { read_feature_map(fixture("bad_magic.fmap")); }, ErrorCategory::kFormat,
               "not a feature file");
  expect_error([] { read_feature_map(fixture("truncated_4x4x8.fmap")); }, ErrorCategory::kFormat,
               "length mismatch: expected 512");
  expect_error([] { read_feature_map(fixture("bad_dtype.fmap")); }, ErrorCategory::kFormat,
               "unsupported");
  expect_error([] { read_feature_map(fixture("bad_version.fmap")); }, ErrorCategory::kFormat,
               "unsupported");
  expect_error([] { read_feature_map(fixture("nan_1x1x2.fmap")); }, ErrorCategory::kFormat,
               "non-finite");
  expect_error([] { read_feature_map(fixture("does_not_exist.fmap")); }, ErrorCategory::kIo,
               "cannot open");
}

TEST(FeatureFile, ShortHeader) {
  const std::vector<std::uint8_t> bytes = {'F', 'M', 'A', 'P', 1, 1};
  expect_error([&] { decode_feature_map(bytes); }, ErrorCategory::kFormat, "length mismatch");
}

TEST(MaskFile, GoldenBytes) {
  LabelMask mask(3, 4, 5);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) mask.at(y, x) = static_cast<Label>((y * 4 + x) % 5);
  }
  EXPECT_EQ(encode_mask(mask), read_file_bytes(fixture("golden_3x4_k5.lmsk")));
  EXPECT_EQ(read_mask(fixture("golden_3x4_k5.lmsk")), mask);
}

TEST(MaskFile, TwoByTwoRoundTrip) {
  TempDir tmp;
  const LabelMask mask(2, 2, 2, std::vector<Label>{0, 0, 1, 1});
  write_mask(tmp / "m.lmsk", mask, 2);
  const auto back = read_mask(tmp / "m.lmsk");
  EXPECT_EQ(back, mask);
  EXPECT_EQ(back.num_classes(), 2);
}

TEST(MaskFile, ExplicitClassCountIsWritten) {
  TempDir tmp;
  const LabelMask mask(1, 3, 3, std::vector<Label>{0, 1, 2});
  write_mask(tmp / "m.lmsk", mask, 13);
  EXPECT_EQ(read_mask(tmp / "m.lmsk").num_classes(), 13);
  EXPECT_EQ(read_mask_header(tmp / "m.lmsk").num_classes, 13);
}

TEST(MaskFile, LabelOutOfRange) {
  TempDir tmp;
  const LabelMask mask(1, 2, 6, std::vector<Label>{0, 5});
  expect_error([&] { write_mask(tmp / "m.lmsk", mask, 2); }, ErrorCategory::kFormat,
               "label out of range");
  EXPECT_FALSE(std::filesystem::exists(tmp / "m.lmsk"));
  expect_error([] { read_mask(fixture("label5_k2.lmsk")); }, ErrorCategory::kFormat,
               "label out of range");
}

TEST(MaskFile, SingleClassIsValid) {
  const auto mask = read_mask(fixture("k1_2x2.lmsk"));
  EXPECT_EQ(mask.num_classes(), 1);
  EXPECT_EQ(mask, LabelMask(2, 2, 1));
}

TEST(MaskFile, Header) {
  const auto header = read_mask_header(fixture("golden_3x4_k5.lmsk"));
  EXPECT_EQ(header.num_classes, 5);
  EXPECT_EQ(header.height, 3);
  EXPECT_EQ(header.width, 4);
  expect_error([] { read_mask_header(fixture("golden_2x3x4.fmap")); }, ErrorCategory::kFormat,
               "not a mask file");
}

TEST(MaskFile, Truncated) {
  auto bytes = encode_mask(LabelMask(3, 3, 2));
  bytes.pop_back();
  expect_error([&] { decode_mask(bytes); }, ErrorCategory::kFormat, "length mismatch");
}

TEST(MaskFile, RandomRoundTrip) {
  testing::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mask = testing::random_mask(rng, testing::uniform_int(rng, 1, 12),
                                           testing::uniform_int(rng, 1, 12),
                                           testing::uniform_int(rng, 1, 300));
    EXPECT_EQ(decode_mask(encode_mask(mask)), mask);
  }
}

TEST(Manifest, MinimalDataset) {
  const auto m = load_manifest(fixture("dataset_min/manifest.json"));
  EXPECT_EQ(m.name, "min");
  ASSERT_EQ(m.palette.size(), 2u);
  EXPECT_EQ(m.palette[1].name, "tool");
  EXPECT_EQ(m.palette[1].color[0], 255);
  ASSERT_EQ(m.videos.size(), 1u);
  const auto& v = m.video("v1");
  ASSERT_EQ(v.frames.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(v.frames[i].index, i);
  EXPECT_TRUE(v.frames[0].mask.has_value());
  EXPECT_FALSE(v.frames[1].mask.has_value());
  EXPECT_TRUE(std::filesystem::exists(v.frames[2].features));
  EXPECT_EQ(v.frames[2].features.filename(), "f2.fmap");
}

TEST(Manifest, ThirteenClassPalette) {
  const auto m = load_manifest(fixture("dataset_13/manifest.json"));
  EXPECT_EQ(m.palette.size(), 13u);
  const auto mask = read_mask(*m.videos[0].frames[0].mask);
  EXPECT_EQ(mask.num_classes(), 13);
  EXPECT_EQ(mask.labels()[12], 12);
}

class ManifestErrors : public ::testing::Test {
 protected:
  void SetUp() override {
    std::filesystem::copy(fixture("dataset_min"), tmp_.path() / "d",
                          std::filesystem::copy_options::recursive);
    std::ifstream in(path());
    doc_ = nlohmann::json::parse(in);
  }
  std::filesystem::path path() const { return tmp_.path() / "d" / "manifest.json"; }
  void save() {
    std::ofstream out(path());
    out << doc_.dump(2);
  }

  TempDir tmp_;
  nlohmann::json doc_;
};

TEST_F(ManifestErrors, MissingFile) {
  expect_error([&] { load_manifest(tmp_.path() / "nope.json"); }, ErrorCategory::kIo,
               "manifest not found");
}

TEST_F(ManifestErrors, Malformed) {
  {
    std::ofstream out(path());
    out << "{\"dataset\": ";
  }
  expect_error([&] { load_manifest(path()); }, ErrorCategory::kFormat, "malformed manifest");
  doc_.erase("videos");
  save();
  expect_error([&] { load_manifest(path()); }, ErrorCategory::kFormat, "malformed manifest");
}

TEST_F(ManifestErrors, DanglingPathIsNamed) {
  doc_["videos"][0]["frames"][1]["features"] = "features/missing.fmap";
  save();
  expect_error([&] { load_manifest(path()); }, ErrorCategory::kIo, "missing.fmap");
}

TEST_F(ManifestErrors, PaletteGap) {
  doc_["palette"][1]["id"] = 2;
  save();
  expect_error([&] { load_manifest(path()); }, ErrorCategory::kFormat, "palette gap");
}

TEST_F(ManifestErrors, PaletteMustCoverLabels) {
  doc_["palette"].erase(1);
  save();
  expect_error([&] { load_manifest(path()); }, ErrorCategory::kFormat, "palette does not cover");
}

TEST_F(ManifestErrors, FrameOrder) {
  doc_["videos"][0]["frames"][2]["index"] = 1;
  save();
  expect_error([&] { load_manifest(path()); }, ErrorCategory::kFormat, "strictly increasing");
}

TEST_F(ManifestErrors, UnknownVideo) {
  const auto m = load_manifest(path());
  expect_error([&] { m.video("zzz"); }, ErrorCategory::kConfig, "zzz");
}

TEST(Manifest, SaveLoadRoundTrip) {
  TempDir tmp;
  std::filesystem::copy(fixture("dataset_min"), tmp.path(),
                        std::filesystem::copy_options::recursive);
  const auto m = load_manifest(tmp / "manifest.json");
  save_manifest(tmp / "again.json", m);
  const auto back = load_manifest(tmp / "again.json");
  EXPECT_EQ(back.name, m.name);
  ASSERT_EQ(back.videos.size(), 1u);
  ASSERT_EQ(back.videos[0].frames.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(std::filesystem::canonical(back.videos[0].frames[i].features),
              std::filesystem::canonical(m.videos[0].frames[i].features));
  }
  const auto doc = nlohmann::json::parse(read_file_bytes(tmp / "again.json"));
  EXPECT_EQ(doc["videos"][0]["frames"][0]["features"], "features/f0.fmap");
}

}  // namespace
}  // namespace maskflow
