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

// Portable on-disk formats shared with the feature extractor.
//
// Feature map file (little-endian throughout):
//   "FMAP" | u8 version=1 | u8 dtype=1 (f32) | u8 ndim=3 | u8 reserved=0 |
//   u32 H | u32 W | u32 C | H*W*C f32, row-major, channel fastest
//
// Label mask file:
//   "LMSK" | u8 version=1 | u16 num_classes | u32 H | u32 W | H*W u16 labels
//
// Dataset manifest: JSON, see DatasetManifest below.

#ifndef MASKFLOW_TENSOR_STORE_HPP_
#define MASKFLOW_TENSOR_STORE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskflow/types.hpp"

namespace maskflow {

inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 20;
inline constexpr std::size_t kMaskHeaderBytes = 15;

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& grid);
FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_mask(const LabelMask& mask);
LabelMask decode_mask(std::span<const std::uint8_t> bytes);

void write_feature_map(const std::filesystem::path& path, const FeatureMap& grid);
FeatureMap read_feature_map(const std::filesystem::path& path);

// The mask's own num_classes is written unless `num_classes` overrides it.
void write_mask(const std::filesystem::path& path, const LabelMask& mask,
                std::optional<int> num_classes = std::nullopt);
LabelMask read_mask(const std::filesystem::path& path);

struct MaskHeader {
  int num_classes = 0;
  int height = 0;
  int width = 0;
};
// Reads and validates only the fixed-size header.
MaskHeader read_mask_header(const std::filesystem::path& path);

struct PaletteEntry {
  int id = 0;
  std::string name;
  std::array<std::uint8_t, 3> color{};
};

struct FrameEntry {
  int index = 0;
  std::optional<std::filesystem::path> image;
  std::filesystem::path features;
  std::optional<std::filesystem::path> mask;
};

struct VideoEntry {
  std::string id;
  std::vector<FrameEntry> frames;
};

// Paths are stored resolved against the manifest's directory.
struct DatasetManifest {
  std::string name;
  std::vector<PaletteEntry> palette;
  std::vector<VideoEntry> videos;

  const VideoEntry& video(const std::string& id) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);

// Writes paths relative to the manifest's directory where possible.
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace maskflow

#endif  // MASKFLOW_TENSOR_STORE_HPP_
