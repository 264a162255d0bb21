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

#include "maskflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "maskflow/error.hpp"
#include "maskflow/tensor_store.hpp"

namespace maskflow {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform in (0, 1].
double unit_uniform(std::uint64_t key) {
  return static_cast<double>((splitmix64(key) >> 11) + 1) * 0x1.0p-53;
}

struct Span {
  int begin;
  int end;
};

// Interior box along one axis for a total drift of `drift` pixels.
Span interior(int extent, int drift) {
  const int lo = std::max(0, -drift);
  const int hi = extent - std::max(0, drift);
  const int margin = extent / 16;
  if (hi - lo - 2 * margin >= 1) return {lo + margin, hi - margin};
  return {lo, hi};
}

LabelMask base_layout(const SynthConfig& cfg) {
  LabelMask mask(cfg.height, cfg.width, cfg.num_classes);
  const int objects = cfg.num_classes - 1;
  if (objects == 0) return mask;
  const Span rows = interior(cfg.height, cfg.motion_y * (cfg.frames - 1));
  const Span cols = interior(cfg.width, cfg.motion_x * (cfg.frames - 1));
  const bool split_cols = (cols.end - cols.begin) >= (rows.end - rows.begin);
  const Span along = split_cols ? cols : rows;
  const int extent = along.end - along.begin;
  for (int i = 0; i < objects; ++i) {
    const int a = along.begin + static_cast<int>(static_cast<long>(extent) * i / objects);
    const int b = along.begin + static_cast<int>(static_cast<long>(extent) * (i + 1) / objects);
    for (int y = rows.begin; y < rows.end; ++y) {
      for (int x = cols.begin; x < cols.end; ++x) {
        const int pos = split_cols ? x : y;
        if (pos >= a && pos < b) mask.at(y, x) = static_cast<Label>(i + 1);
      }
    }
  }
  return mask;
}

}  // namespace

void SynthConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCategory::kConfig, "synth: " + what); };
  if (height < 1 || width < 1 || channels < 1) bad("grid dimensions must be >= 1");
  if (num_classes < 1 || num_classes > 0xFFFF) bad("num_classes must be in [1, 65535]");
  if (num_classes > channels) bad("num_classes must not exceed channels (orthogonal prototypes)");
  if (frames < 1) bad("frames must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) bad("noise must be a finite value >= 0");
  const long drift_y = std::labs(static_cast<long>(motion_y)) * (frames - 1);
  const long drift_x = std::labs(static_cast<long>(motion_x)) * (frames - 1);
  if (drift_y >= height || drift_x >= width) bad("objects would leave the frame: |motion| * (frames - 1) must be < grid size");
  const Span rows = interior(height, motion_y * (frames - 1));
  const Span cols = interior(width, motion_x * (frames - 1));
  const int along = std::max(rows.end - rows.begin, cols.end - cols.begin);
  if (num_classes - 1 > along) bad("grid too small to hold " + std::to_string(num_classes - 1) + " objects");
  for (int f : corrupt_frames) {
    if (f < 0 || f >= frames) bad("corrupt frame " + std::to_string(f) + " out of range");
  }
}

double synth_normal(std::uint64_t seed, std::uint64_t frame, std::uint64_t pixel,
                    std::uint64_t channel) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ frame);
  key = splitmix64(key ^ pixel);
  key = splitmix64(key ^ channel);
  const double u1 = unit_uniform(key);
  const double u2 = unit_uniform(key ^ 0xD1B54A32D192ED03ull);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SynthSequence gen_sequence(const SynthConfig& cfg) {
  cfg.validate();
  const LabelMask base = base_layout(cfg);
  SynthSequence seq;
  for (int f = 0; f < cfg.frames; ++f) {
    LabelMask mask(cfg.height, cfg.width, cfg.num_classes);
    const int sy = cfg.motion_y * f;
    const int sx = cfg.motion_x * f;
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        const int by = y - sy;
        const int bx = x - sx;
        if (by >= 0 && by < cfg.height && bx >= 0 && bx < cfg.width) {
          mask.at(y, x) = base.at(by, bx);
        }
      }
    }

    const bool corrupt =
        std::find(cfg.corrupt_frames.begin(), cfg.corrupt_frames.end(), f) != cfg.corrupt_frames.end();
    FeatureMap features(cfg.height, cfg.width, cfg.channels);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        const auto pixel = static_cast<std::uint64_t>(y) * cfg.width + x;
        auto v = features.pixel(y, x);
        for (int c = 0; c < cfg.channels; ++c) {
          if (corrupt) {
            v[c] = static_cast<float>(synth_normal(cfg.seed ^ 0xC0FFEEull, f, pixel, c));
            continue;
          }
          double value = c == mask.at(y, x) ? 1.0 : 0.0;
          if (cfg.noise > 0.0) value += cfg.noise * synth_normal(cfg.seed, f, pixel, c);
          v[c] = static_cast<float>(value);
        }
      }
    }
    seq.features.push_back(std::move(features));
    seq.masks.push_back(std::move(mask));
  }
  return seq;
}

nlohmann::json synth_config_to_json(const SynthConfig& c) {
  return {{"height", c.height},       {"width", c.width},
          {"channels", c.channels},   {"num_classes", c.num_classes},
          {"frames", c.frames},       {"noise", c.noise},
          {"motion", {c.motion_y, c.motion_x}},
          {"seed", c.seed},           {"corrupt_frames", c.corrupt_frames}};
}

SynthConfig synth_config_from_json(const nlohmann::json& doc) {
  SynthConfig c;
  try {
    c.height = doc.at("height").get<int>();
    c.width = doc.at("width").get<int>();
    c.channels = doc.at("channels").get<int>();
    c.num_classes = doc.at("num_classes").get<int>();
    c.frames = doc.at("frames").get<int>();
    c.noise = doc.at("noise").get<double>();
    const auto motion = doc.at("motion").get<std::vector<int>>();
    if (motion.size() != 2) fail(ErrorCategory::kFormat, "synth config: motion needs 2 values");
    c.motion_y = motion[0];
    c.motion_x = motion[1];
    c.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("corrupt_frames")) c.corrupt_frames = doc.at("corrupt_frames").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, std::string("synth config: ") + e.what());
  }
  return c;
}

fs::path write_synth_dataset(const fs::path& dir, const SynthConfig& config,
                             const SynthSequence& sequence) {
  std::error_code ec;
  fs::create_directories(dir / "features", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec) fail(ErrorCategory::kIo, "cannot create " + dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.name = "synth";
  for (int k = 0; k < config.num_classes; ++k) {
    PaletteEntry p;
    p.id = k;
    p.name = k == 0 ? "background" : "object_" + std::to_string(k);
    // Spread hues deterministically; background stays black.
    if (k > 0) {
      p.color = {static_cast<std::uint8_t>((k * 97) % 256), static_cast<std::uint8_t>((k * 57 + 80) % 256),
                 static_cast<std::uint8_t>((k * 151 + 160) % 256)};
    }
    manifest.palette.push_back(std::move(p));
  }
  VideoEntry video;
  video.id = "synth";
  for (std::size_t f = 0; f < sequence.features.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05zu", f);
    FrameEntry entry;
    entry.index = static_cast<int>(f);
    entry.features = dir / "features" / (std::string(name) + ".fmap");
    entry.mask = dir / "masks" / (std::string(name) + ".lmsk");
    write_feature_map(entry.features, sequence.features[f]);
    write_mask(*entry.mask, sequence.masks[f]);
    video.frames.push_back(std::move(entry));
  }
  manifest.videos.push_back(std::move(video));

  const fs::path manifest_path = dir / "manifest.json";
  save_manifest(manifest_path, manifest);
  const std::string sidecar = synth_config_to_json(config).dump(2) + "\n";
  write_file_bytes(dir / "synth.json",
                   std::span(reinterpret_cast<const std::uint8_t*>(sidecar.data()), sidecar.size()));
  return manifest_path;
}

}  // namespace maskflow
