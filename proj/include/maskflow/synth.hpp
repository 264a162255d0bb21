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

// Synthetic sequences with analytic ground truth.
//
// Frame 0 holds num_classes - 1 axis-aligned rectangles (classes 1..K-1) tiled
// inside a box, surrounded by background class 0. The box is placed so that
// the whole label field stays inside the grid while it translates by
// (motion_y, motion_x) per frame; uncovered pixels are background. The
// feature of a pixel is the standard basis vector of its class plus Gaussian
// noise of standard deviation `noise`.

#ifndef MASKFLOW_SYNTH_HPP_
#define MASKFLOW_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "maskflow/types.hpp"

namespace maskflow {

struct SynthConfig {
  int height = 64;
  int width = 64;
  int channels = 16;
  int num_classes = 4;
  int frames = 20;
  double noise = 0.0;
  int motion_y = 1;
  int motion_x = 1;
  std::uint64_t seed = 0;
  // Frames whose features are replaced by unit-variance noise (masks kept).
  std::vector<int> corrupt_frames;

  // Throws Error(kConfig) when the sequence cannot be built.
  void validate() const;
};

struct SynthSequence {
  std::vector<FeatureMap> features;
  std::vector<LabelMask> masks;
};

SynthSequence gen_sequence(const SynthConfig& config);

// Counter-based standard normal sample; identical for identical arguments.
double synth_normal(std::uint64_t seed, std::uint64_t frame, std::uint64_t pixel,
                    std::uint64_t channel);

nlohmann::json synth_config_to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const nlohmann::json& doc);

// Writes features/, masks/, manifest.json and synth.json under `dir`.
// Returns the manifest path.
std::filesystem::path write_synth_dataset(const std::filesystem::path& dir,
                                          const SynthConfig& config,
                                          const SynthSequence& sequence);

}  // namespace maskflow

#endif  // MASKFLOW_SYNTH_HPP_
