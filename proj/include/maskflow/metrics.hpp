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

// Segmentation quality metrics. Per-class values are std::nullopt for
// classes that take no part in the frame (empty union for J and pixel F,
// no boundary on either side for boundary F); such classes are left out of
// every mean.

#ifndef MASKFLOW_METRICS_HPP_
#define MASKFLOW_METRICS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "maskflow/types.hpp"

namespace maskflow {

using PerClass = std::vector<std::optional<double>>;

PerClass jaccard_per_class(const LabelMask& pred, const LabelMask& gt, int num_classes);

// F1 = 2 TP / (2 TP + FP + FN) per class.
PerClass pixel_f_score(const LabelMask& pred, const LabelMask& gt, int num_classes);

// Contour F-measure. A pixel of class c is on the boundary of c when one of
// its 4-neighbours inside the image has another label. Boundary pixels match
// when within Chebyshev distance `tolerance` of the other side's boundary.
PerClass boundary_f_score(const LabelMask& pred, const LabelMask& gt, int num_classes,
                          int tolerance);

double pixel_accuracy(const LabelMask& pred, const LabelMask& gt);

// Mean over the classes that have a value; nullopt when none do.
std::optional<double> mean_present(const PerClass& values);

enum class FVariant { kPixel, kBoundary };

struct MetricOptions {
  FVariant f_variant = FVariant::kPixel;
  int boundary_tolerance = 1;
};

struct FrameScore {
  std::string name;
  // Position in the video; frame 0 is the given first frame and is never scored.
  int frame_index = 0;
  PerClass jaccard;
  PerClass f;
  double accuracy = 0.0;
  std::vector<int> present_classes;  // classes occurring in the ground truth

  std::optional<double> mean_jaccard() const { return mean_present(jaccard); }
  std::optional<double> mean_f() const { return mean_present(f); }
};

FrameScore score_frame(const LabelMask& pred, const LabelMask& gt, int num_classes,
                       const MetricOptions& options = {});

struct VideoScores {
  std::string id;
  std::vector<FrameScore> frames;
};

struct MetricMeans {
  std::optional<double> jaccard;
  std::optional<double> f;
  std::optional<double> accuracy;
};

struct VideoSummary {
  std::string id;
  MetricMeans means;
  std::size_t frames = 0;  // scored frames
  std::vector<FrameScore> frame_scores;
};

struct EvalReport {
  MetricMeans dataset;
  std::vector<VideoSummary> videos;
  std::size_t frames = 0;
  std::vector<std::string> warnings;
};

// Per video: mean over frames with frame_index > 0. Dataset: unweighted mean
// over videos. Videos with nothing to score are dropped with a warning.
EvalReport aggregate(const std::vector<VideoScores>& videos);

nlohmann::json report_to_json(const EvalReport& report);
// One row per scored frame: video,frame,J,F,P_acc.
std::string report_to_csv(const EvalReport& report);

}  // namespace maskflow

#endif  // MASKFLOW_METRICS_HPP_
