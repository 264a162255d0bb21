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

#ifndef MASKFLOW_TOOLS_CLI_HPP_
#define MASKFLOW_TOOLS_CLI_HPP_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "maskflow/metrics.hpp"
#include "maskflow/propagation.hpp"
#include "maskflow/tensor_store.hpp"

namespace maskflow::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;     // bad flags or configuration
inline constexpr int kExitData = 2;      // io, format or dimension problems
inline constexpr int kExitInternal = 3;

// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct TrackedVideo {
  std::vector<std::filesystem::path> frame_names;  // file names for frames 2..N
  std::vector<LabelMask> masks;
  std::vector<double> seconds;
};

// Tracks one manifest video, reading features lazily frame by frame.
TrackedVideo track_manifest_video(const VideoEntry& video, const LabelMask& first_mask,
                                  const TrackerConfig& config);

// Scores predictions for frames 2..N against the video's ground truth masks.
VideoScores score_manifest_video(const VideoEntry& video, const std::vector<LabelMask>& predictions,
                                 const MetricOptions& options);

}  // namespace maskflow::cli

#endif  // MASKFLOW_TOOLS_CLI_HPP_
