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

#ifndef MASKFLOW_FEATURE_ANALYSIS_HPP_
#define MASKFLOW_FEATURE_ANALYSIS_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "maskflow/metrics.hpp"
#include "maskflow/types.hpp"

namespace maskflow {

struct PcaBasis {
  Eigen::VectorXd mean;        // C
  Eigen::MatrixXd directions;  // k x C, orthonormal rows, strongest first
  std::vector<double> explained_variance;  // fraction of total variance per row

  int channels() const noexcept { return static_cast<int>(mean.size()); }
  int components() const noexcept { return static_cast<int>(directions.rows()); }
};

// Principal directions of the pixel-feature covariance over all pixels of all
// grids jointly. Each direction is signed so that its largest-magnitude
// coordinate is positive. Zero-variance input yields all-zero fractions.
PcaBasis fit_pca(std::span<const FeatureMap> grids, int components = 3);

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<float> values;  // H x W x 3, each in [0, 1]
};

// Projects onto the first three directions and min-max scales each channel
// over the image; a channel with no spread renders as 0.
RgbImage render_pca_rgb(const FeatureMap& grid, const PcaBasis& basis);

// Binary PPM (P6, maxval 255).
std::vector<std::uint8_t> encode_ppm(const RgbImage& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// Per class: mean cosine similarity of the class-mean feature vector between
// consecutive frames. Pairs where the class is missing from either frame are
// skipped; a class with no usable pair is nullopt.
PerClass temporal_consistency_score(std::span<const FeatureMap> grids,
                                    std::span<const LabelMask> masks);

}  // namespace maskflow

#endif  // MASKFLOW_FEATURE_ANALYSIS_HPP_
