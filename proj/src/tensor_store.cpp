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

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <string>

#include "json.hpp"
#include "maskflow/error.hpp"

namespace maskflow {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::array<char, 4> kFeatureMagic = {'F', 'M', 'A', 'P'};
constexpr std::array<char, 4> kMaskMagic = {'L', 'M', 'S', 'K'};

class ByteWriter {
 public:
  explicit ByteWriter(std::size_t reserve) { bytes_.reserve(reserve); }

  void magic(const std::array<char, 4>& m) {
    for (char c : m) bytes_.push_back(static_cast<std::uint8_t>(c));
  }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    bytes_.push_back(static_cast<std::uint8_t>(v & 0xFFu));
    bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
      bytes_.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFFu));
    }
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  bool has_magic(const std::array<char, 4>& m) const {
    if (bytes_.size() < 4) return false;
    for (std::size_t i = 0; i < 4; ++i) {
      if (bytes_[i] != static_cast<std::uint8_t>(m[i])) return false;
    }
    return true;
  }
  void skip(std::size_t n) { pos_ += n; }
  std::uint8_t u8() { return bytes_[pos_++]; }
  std::uint16_t u16() {
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

[[noreturn]] void format_error(const std::string& message) {
  fail(ErrorCategory::kFormat, message);
}

void check_dim(std::uint32_t value, const char* what) {
  if (value < 1 || value > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
    format_error(std::string("unsupported ") + what + ": " + std::to_string(value));
  }
}

void check_payload(std::uint64_t expected, std::size_t actual) {
  if (expected != actual) {
    format_error("length mismatch: expected " + std::to_string(expected) +
                 " payload bytes, got " + std::to_string(actual));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& grid) {
  const auto values = grid.values();
  if (values.empty()) {
    fail(ErrorCategory::kDimension, "cannot serialize an empty feature map");
  }
  for (float v : values) {
    if (!std::isfinite(v)) format_error("non-finite value in feature map");
  }
  ByteWriter out(kFeatureHeaderBytes + values.size() * 4);
  out.magic(kFeatureMagic);
  out.u8(kFormatVersion);
  out.u8(kDtypeFloat32);
  out.u8(3);
  out.u8(0);
  out.u32(static_cast<std::uint32_t>(grid.height()));
  out.u32(static_cast<std::uint32_t>(grid.width()));
  out.u32(static_cast<std::uint32_t>(grid.channels()));
  for (float v : values) out.f32(v);
  return out.take();
}

FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  if (!in.has_magic(kFeatureMagic)) format_error("not a feature file (bad magic)");
  if (bytes.size() < kFeatureHeaderBytes) {
    format_error("length mismatch: truncated feature header");
  }
  in.skip(4);
  const auto version = in.u8();
  const auto dtype = in.u8();
  const auto ndim = in.u8();
  const auto reserved = in.u8();
  if (version != kFormatVersion) format_error("unsupported version " + std::to_string(version));
  if (dtype != kDtypeFloat32) format_error("unsupported dtype " + std::to_string(dtype));
  if (ndim != 3) format_error("unsupported ndim " + std::to_string(ndim));
  if (reserved != 0) format_error("unsupported header: reserved byte is nonzero");
  const auto h = in.u32();
  const auto w = in.u32();
  const auto c = in.u32();
  check_dim(h, "height");
  check_dim(w, "width");
  check_dim(c, "channels");
  const std::uint64_t count = std::uint64_t{h} * w * c;
  check_payload(count * 4, in.remaining());

  std::vector<float> values(count);
  for (auto& v : values) {
    v = in.f32();
    if (!std::isfinite(v)) format_error("non-finite value in feature file");
  }
  return FeatureMap(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c),
                    std::move(values));
}

std::vector<std::uint8_t> encode_mask(const LabelMask& mask) {
  const int k = mask.num_classes();
  if (k < 1 || k > 0xFFFF) {
    fail(ErrorCategory::kFormat, "unsupported num_classes " + std::to_string(k));
  }
  ByteWriter out(kMaskHeaderBytes + mask.pixel_count() * 2);
  out.magic(kMaskMagic);
  out.u8(kFormatVersion);
  out.u16(static_cast<std::uint16_t>(k));
  out.u32(static_cast<std::uint32_t>(mask.height()));
  out.u32(static_cast<std::uint32_t>(mask.width()));
  for (Label label : mask.labels()) {
    if (label >= k) {
      format_error("label out of range: " + std::to_string(label) + " >= " + std::to_string(k));
    }
    out.u16(label);
  }
  return out.take();
}

LabelMask decode_mask(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  if (!in.has_magic(kMaskMagic)) format_error("not a mask file (bad magic)");
  if (bytes.size() < kMaskHeaderBytes) format_error("length mismatch: truncated mask header");
  in.skip(4);
  const auto version = in.u8();
  if (version != kFormatVersion) format_error("unsupported version " + std::to_string(version));
  const auto k = in.u16();
  if (k < 1) format_error("unsupported num_classes 0");
  const auto h = in.u32();
  const auto w = in.u32();
  check_dim(h, "height");
  check_dim(w, "width");
  const std::uint64_t count = std::uint64_t{h} * w;
  check_payload(count * 2, in.remaining());

  std::vector<Label> labels(count);
  for (auto& label : labels) {
    label = in.u16();
    if (label >= k) {
      format_error("label out of range: " + std::to_string(label) + " >= " + std::to_string(k));
    }
  }
  return LabelMask(static_cast<int>(h), static_cast<int>(w), k, std::move(labels));
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCategory::kIo, "read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::kIo, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCategory::kIo, "write failed: " + path.string());
}

void write_feature_map(const fs::path& path, const FeatureMap& grid) {
  write_file_bytes(path, encode_feature_map(grid));
}

FeatureMap read_feature_map(const fs::path& path) {
  return decode_feature_map(read_file_bytes(path));
}

void write_mask(const fs::path& path, const LabelMask& mask, std::optional<int> num_classes) {
  if (num_classes && *num_classes != mask.num_classes()) {
    if (*num_classes < 1 || *num_classes > 0xFFFF) {
      format_error("unsupported num_classes " + std::to_string(*num_classes));
    }
    const auto labels = mask.labels();
    for (Label label : labels) {
      if (label >= *num_classes) {
        format_error("label out of range: " + std::to_string(label) + " >= " +
                     std::to_string(*num_classes));
      }
    }
    LabelMask relabelled(mask.height(), mask.width(), *num_classes,
                         std::vector<Label>(labels.begin(), labels.end()));
    write_file_bytes(path, encode_mask(relabelled));
    return;
  }
  write_file_bytes(path, encode_mask(mask));
}

LabelMask read_mask(const fs::path& path) { return decode_mask(read_file_bytes(path)); }

MaskHeader read_mask_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  std::array<std::uint8_t, kMaskHeaderBytes> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size())) {
    format_error("length mismatch: truncated mask header in " + path.string());
  }
  ByteReader r(header);
  if (!r.has_magic(kMaskMagic)) format_error("not a mask file (bad magic): " + path.string());
  r.skip(4);
  if (r.u8() != kFormatVersion) format_error("unsupported version in " + path.string());
  MaskHeader out;
  out.num_classes = r.u16();
  out.height = static_cast<int>(r.u32());
  out.width = static_cast<int>(r.u32());
  return out;
}

// --- manifest ---------------------------------------------------------------

const VideoEntry& DatasetManifest::video(const std::string& id) const {
  for (const auto& v : videos) {
    if (v.id == id) return v;
  }
  fail(ErrorCategory::kConfig, "manifest has no video '" + id + "'");
}

namespace {

[[noreturn]] void malformed(const fs::path& path, const std::string& what) {
  format_error("malformed manifest " + path.string() + ": " + what);
}

fs::path resolve(const fs::path& base, const std::string& rel) {
  fs::path p(rel);
  return p.is_absolute() ? p : base / p;
}

void require_exists(const fs::path& p) {
  if (!fs::exists(p)) fail(ErrorCategory::kIo, "dangling path in manifest: " + p.string());
}

std::string relative_or_absolute(const fs::path& p, const fs::path& base) {
  std::error_code ec;
  auto rel = fs::relative(p, base, ec);
  if (ec || rel.empty()) return p.generic_string();
  return rel.generic_string();
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCategory::kIo, "manifest not found: " + path.string());
  const auto bytes = read_file_bytes(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    malformed(path, e.what());
  }

  const fs::path base = path.parent_path();
  DatasetManifest manifest;
  try {
    manifest.name = doc.at("dataset").get<std::string>();

    for (const auto& p : doc.at("palette")) {
      PaletteEntry entry;
      entry.id = p.at("id").get<int>();
      entry.name = p.at("name").get<std::string>();
      const auto color = p.at("color").get<std::vector<int>>();
      if (color.size() != 3) malformed(path, "palette colour must have 3 components");
      for (std::size_t i = 0; i < 3; ++i) {
        if (color[i] < 0 || color[i] > 255) malformed(path, "palette colour out of range");
        entry.color[i] = static_cast<std::uint8_t>(color[i]);
      }
      manifest.palette.push_back(std::move(entry));
    }

    std::set<std::string> seen_ids;
    for (const auto& v : doc.at("videos")) {
      VideoEntry video;
      video.id = v.at("id").get<std::string>();
      if (!seen_ids.insert(video.id).second) malformed(path, "duplicate video id " + video.id);
      for (const auto& f : v.at("frames")) {
        FrameEntry frame;
        frame.index = f.at("index").get<int>();
        frame.features = resolve(base, f.at("features").get<std::string>());
        if (f.contains("image") && !f.at("image").is_null()) {
          frame.image = resolve(base, f.at("image").get<std::string>());
        }
        if (f.contains("mask") && !f.at("mask").is_null()) {
          frame.mask = resolve(base, f.at("mask").get<std::string>());
        }
        if (!video.frames.empty() && frame.index <= video.frames.back().index) {
          malformed(path, "frame order not strictly increasing in video " + video.id);
        }
        video.frames.push_back(std::move(frame));
      }
      manifest.videos.push_back(std::move(video));
    }
  } catch (const json::exception& e) {
    malformed(path, e.what());
  }

  // Palette ids must be exactly 0..P-1.
  std::vector<int> ids;
  for (const auto& p : manifest.palette) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != static_cast<int>(i)) {
      format_error("palette gap in " + path.string() + ": expected id " + std::to_string(i) +
                   ", found " + std::to_string(ids[i]));
    }
  }
  std::sort(manifest.palette.begin(), manifest.palette.end(),
            [](const PaletteEntry& a, const PaletteEntry& b) { return a.id < b.id; });

  const int palette_size = static_cast<int>(manifest.palette.size());
  for (const auto& video : manifest.videos) {
    for (const auto& frame : video.frames) {
      require_exists(frame.features);
      if (frame.image) require_exists(*frame.image);
      if (!frame.mask) continue;
      require_exists(*frame.mask);
      const auto header = read_mask_header(*frame.mask);
      if (header.num_classes <= palette_size) continue;
      // The header admits labels beyond the palette; check the labels themselves.
      const auto mask = read_mask(*frame.mask);
      for (Label label : mask.labels()) {
        if (label >= palette_size) {
          format_error("palette does not cover label " + std::to_string(label) + " in " +
                       frame.mask->string());
        }
      }
    }
  }
  return manifest;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  const fs::path base = path.parent_path();
  json doc;
  doc["dataset"] = manifest.name;
  doc["palette"] = json::array();
  for (const auto& p : manifest.palette) {
    doc["palette"].push_back(
        {{"id", p.id}, {"name", p.name}, {"color", {p.color[0], p.color[1], p.color[2]}}});
  }
  doc["videos"] = json::array();
  for (const auto& v : manifest.videos) {
    json frames = json::array();
    for (const auto& f : v.frames) {
      json entry;
      entry["index"] = f.index;
      entry["features"] = relative_or_absolute(f.features, base);
      if (f.image) entry["image"] = relative_or_absolute(*f.image, base);
      if (f.mask) entry["mask"] = relative_or_absolute(*f.mask, base);
      frames.push_back(std::move(entry));
    }
    doc["videos"].push_back({{"id", v.id}, {"frames", std::move(frames)}});
  }
  const std::string text = doc.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace maskflow
