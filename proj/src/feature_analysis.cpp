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

#include "maskflow/feature_analysis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

#include "maskflow/error.hpp"
#include "maskflow/tensor_store.hpp"

namespace maskflow {

namespace {

constexpr Eigen::Index kChunkRows = 4096;

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrixF> as_matrix(const FeatureMap& grid) {
  return {grid.values().data(), static_cast<Eigen::Index>(grid.pixel_count()), grid.channels()};
}

}  // namespace

PcaBasis fit_pca(std::span<const FeatureMap> grids, int components) {
  if (grids.empty()) fail(ErrorCategory::kDimension, "fit_pca needs at least one feature map");
  const int channels = grids.front().channels();
  std::size_t total_pixels = 0;
  for (const auto& g : grids) {
    if (g.channels() != channels) {
      fail(ErrorCategory::kDimension, "fit_pca: channel count differs between frames");
    }
    total_pixels += g.pixel_count();
  }
  if (components < 1 || components > channels ||
      total_pixels < static_cast<std::size_t>(components)) {
    fail(ErrorCategory::kDimension, "fit_pca: need C >= k and at least k pixels (k = " +
                                        std::to_string(components) + ")");
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(channels);
  for (const auto& g : grids) mean += as_matrix(g).cast<double>().colwise().sum().transpose();
  mean /= static_cast<double>(total_pixels);

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(channels, channels);
  for (const auto& g : grids) {
    const auto m = as_matrix(g);
    for (Eigen::Index r0 = 0; r0 < m.rows(); r0 += kChunkRows) {
      const Eigen::Index n = std::min(kChunkRows, m.rows() - r0);
      const Eigen::MatrixXd centered =
          m.middleRows(r0, n).cast<double>().rowwise() - mean.transpose();
      scatter.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    }
  }
  const Eigen::MatrixXd covariance =
      Eigen::MatrixXd(scatter.selfadjointView<Eigen::Lower>()) / static_cast<double>(total_pixels);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success) {
    fail(ErrorCategory::kInternal, "covariance eigendecomposition did not converge");
  }
  const double trace = std::max(0.0, covariance.trace());

  PcaBasis basis;
  basis.mean = mean;
  basis.directions.resize(components, channels);
  for (int i = 0; i < components; ++i) {
    // Eigenvalues come back ascending.
    const Eigen::Index col = channels - 1 - i;
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    basis.directions.row(i) = v.transpose();
    const double lambda = std::max(0.0, solver.eigenvalues()(col));
    basis.explained_variance.push_back(trace > 0.0 ? lambda / trace : 0.0);
  }
  return basis;
}

RgbImage render_pca_rgb(const FeatureMap& grid, const PcaBasis& basis) {
  if (grid.channels() != basis.channels()) {
    fail(ErrorCategory::kDimension, "render_pca_rgb: feature channels " +
                                        std::to_string(grid.channels()) + " vs basis " +
                                        std::to_string(basis.channels()));
  }
  if (basis.components() < 3) fail(ErrorCategory::kDimension, "render needs three components");

  const Eigen::MatrixXd projected =
      (as_matrix(grid).cast<double>().rowwise() - basis.mean.transpose()) *
      basis.directions.topRows(3).transpose();

  RgbImage image;
  image.height = grid.height();
  image.width = grid.width();
  image.values.assign(grid.pixel_count() * 3, 0.0f);
  for (int ch = 0; ch < 3; ++ch) {
    const double lo = projected.col(ch).minCoeff();
    const double hi = projected.col(ch).maxCoeff();
    const double range = hi - lo;
    // Spread at rounding-noise level counts as none.
    const double scale = std::max({std::abs(lo), std::abs(hi), 1.0});
    if (!(range > 1e-9 * scale)) continue;
    for (Eigen::Index i = 0; i < projected.rows(); ++i) {
      const double v = (projected(i, ch) - lo) / range;
      image.values[static_cast<std::size_t>(i) * 3 + ch] =
          static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return image;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + image.values.size());
  for (float v : image.values) {
    const double scaled = std::round(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0);
    bytes.push_back(static_cast<std::uint8_t>(scaled));
  }
  return bytes;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  write_file_bytes(path, encode_ppm(image));
}

PerClass temporal_consistency_score(std::span<const FeatureMap> grids,
                                    std::span<const LabelMask> masks) {
  if (grids.size() != masks.size()) {
    fail(ErrorCategory::kDimension, "temporal_consistency_score: " + std::to_string(grids.size()) +
                                        " feature maps but " + std::to_string(masks.size()) +
                                        " masks");
  }
  if (grids.empty()) return {};
  const int k = masks.front().num_classes();
  const int channels = grids.front().channels();

  // means[f][c] is empty when class c does not occur in frame f.
  std::vector<std::vector<Eigen::VectorXd>> means(grids.size());
  for (std::size_t f = 0; f < grids.size(); ++f) {
    const auto& g = grids[f];
    const auto& m = masks[f];
    if (g.height() != m.height() || g.width() != m.width() || g.channels() != channels ||
        m.num_classes() != k) {
      fail(ErrorCategory::kDimension, "temporal_consistency_score: frame " + std::to_string(f) +
                                          " mask does not align with its features");
    }
    std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(k), Eigen::VectorXd::Zero(channels));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    const auto labels = m.labels();
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const auto px = g.pixel(p);
      sums[labels[p]] += Eigen::Map<const Eigen::VectorXf>(px.data(), channels).cast<double>();
      ++counts[labels[p]];
    }
    means[f].resize(static_cast<std::size_t>(k));
    for (std::size_t c = 0; c < sums.size(); ++c) {
      if (counts[c] > 0) means[f][c] = sums[c] / static_cast<double>(counts[c]);
    }
  }

  PerClass out(static_cast<std::size_t>(k));
  for (std::size_t c = 0; c < out.size(); ++c) {
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t f = 1; f < grids.size(); ++f) {
      const auto& a = means[f - 1][c];
      const auto& b = means[f][c];
      if (a.size() == 0 || b.size() == 0) continue;
      const double na = a.norm();
      const double nb = b.norm();
      if (na == 0.0 || nb == 0.0) continue;
      total += a.dot(b) / (na * nb);
      ++pairs;
    }
    if (pairs > 0) out[c] = total / static_cast<double>(pairs);
  }
  return out;
}

}  // namespace maskflow
