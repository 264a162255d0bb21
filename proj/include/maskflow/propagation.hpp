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

// Training-free mask propagation over dense per-frame features.
//
// Every frame's features are L2-normalised per pixel. A query pixel q attends
// to each reference pixel p of every frame held in the memory queue whose
// Chebyshev distance to q is at most floor(window / 2):
//
//   w(q, p) = exp((f_q . f_p - M_q) / tau) / sum_p' exp((f_q . f_p' - M_q) / tau)
//
// where M_q is the largest admitted dot product of q. The predicted class
// scores of q are sum_p w(q, p) * mask_p. Affinities are only ever held as
// per-query sparse lists; the dense (HW)^2 matrix is never formed.

#ifndef MASKFLOW_PROPAGATION_HPP_
#define MASKFLOW_PROPAGATION_HPP_

#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <vector>

#include "maskflow/types.hpp"

namespace maskflow {

enum class MemoryMode {
  kHardOneHot,  // predictions are stored as the one-hot of their argmax
  kSoft,        // predictions are stored as class scores
};

struct TrackerConfig {
  double tau = 0.2;
  // Full window edge in feature-grid pixels; the admitted radius is window / 2.
  int window = 50;
  int memory = 10;
  MemoryMode memory_mode = MemoryMode::kHardOneHot;
  bool anchor_first_frame = false;
  // Worker threads used inside one frame. Output does not depend on it.
  int threads = 1;

  // Throws Error(kConfig) on tau <= 0, window < 0, memory < 1 or threads < 1.
  void validate() const;
};

// Scales each pixel vector to unit L2 norm. Pixels with norm below 1e-12
// become the zero vector.
FeatureMap normalize_features(FeatureMap grid);

// Square neighbourhood predicate over a feature grid.
class SpatialWindow {
 public:
  struct Range {
    int begin = 0;  // inclusive
    int end = 0;    // exclusive
    int size() const noexcept { return end - begin; }
  };

  SpatialWindow(int height, int width, int window);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int radius() const noexcept { return radius_; }

  bool admits(int qy, int qx, int py, int px) const noexcept;
  Range rows(int qy) const noexcept;
  Range cols(int qx) const noexcept;
  int admitted_count(int qy, int qx) const noexcept { return rows(qy).size() * cols(qx).size(); }

 private:
  int height_;
  int width_;
  int radius_;
};

SpatialWindow build_spatial_mask(int height, int width, int window);

// Kernel-side copy of a reference frame's features.
struct PackedFeatures;

struct MemoryEntry {
  int frame_index = 0;
  FeatureMap features;  // normalised
  SoftMask mask;
  // Per-pixel labels when `mask` is exactly one-hot; empty otherwise.
  std::vector<Label> labels;
  // Built once on insert so each reference is repacked only when it enters
  // memory; null entries are packed on the fly.
  std::shared_ptr<const PackedFeatures> packed;
};

// Bounded FIFO of reference frames, oldest first.
class MemoryQueue {
 public:
  MemoryQueue(int capacity, MemoryMode mode, bool anchor_first_frame);
  explicit MemoryQueue(const TrackerConfig& config);

  // Stores a prediction. In hard mode the scores are replaced by the one-hot
  // of their per-pixel argmax before storing.
  void push(int frame_index, FeatureMap features, const SoftMask& scores);
  void push(int frame_index, FeatureMap features, const LabelMask& labels);
  // Stores a mask verbatim regardless of mode (used for the given first frame).
  void push_reference(int frame_index, FeatureMap features, SoftMask mask);

  int capacity() const noexcept { return capacity_; }
  MemoryMode mode() const noexcept { return mode_; }
  bool anchored() const noexcept { return anchor_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  int num_classes() const noexcept;
  const MemoryEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::deque<MemoryEntry>& entries() const noexcept { return entries_; }

 private:
  void insert(MemoryEntry entry);

  int capacity_;
  MemoryMode mode_;
  bool anchor_;
  bool has_anchor_entry_ = false;
  std::deque<MemoryEntry> entries_;
};

MemoryQueue update_memory(MemoryQueue queue, int frame_index, FeatureMap features,
                          const SoftMask& scores);

struct AffinityEntry {
  std::uint32_t slot;   // index into the memory queue
  std::uint32_t pixel;  // row-major reference pixel index
  float weight;
};

// Per-query sparse affinity rows (CSR). Row q lists its admitted references
// ordered by memory slot, then reference row, then reference column.
struct WindowedAffinity {
  int height = 0;
  int width = 0;
  std::size_t num_slots = 0;
  std::vector<std::size_t> offsets;  // height*width + 1
  std::vector<AffinityEntry> entries;

  std::span<const AffinityEntry> row(std::size_t query) const {
    return {entries.data() + offsets[query], offsets[query + 1] - offsets[query]};
  }
};

// `query` and every memory entry must be normalised and of equal shape.
WindowedAffinity compute_windowed_affinity(const FeatureMap& query, const MemoryQueue& refs,
                                           const TrackerConfig& config);

SoftMask propagate(const WindowedAffinity& affinity, const MemoryQueue& refs);

// Same values as propagate(compute_windowed_affinity(...)) bit for bit, but
// streams tile by tile without materialising the affinity.
SoftMask propagate_windowed(const FeatureMap& query, const MemoryQueue& refs,
                            const TrackerConfig& config);

// Per-pixel argmax; exact ties go to the lowest class index.
LabelMask argmax_labels(const SoftMask& scores);

// Area-weighted average pooling of the one-hot encoding of `full`.
SoftMask downsample_mask(const LabelMask& full, int height, int width);

// Bilinear resampling per class channel (half-pixel centres, edge clamped).
SoftMask upsample_soft_mask(const SoftMask& scores, int height, int width);

// Causal tracker: one call to step() per frame after the first.
class Tracker {
 public:
  struct Step {
    SoftMask grid_scores;  // at feature-grid resolution
    LabelMask labels;      // at first-mask resolution
  };

  Tracker(TrackerConfig config, const FeatureMap& first_features, const LabelMask& first_mask);

  Step step(const FeatureMap& features);

  const TrackerConfig& config() const noexcept { return config_; }
  const MemoryQueue& memory() const noexcept { return memory_; }
  int frames_seen() const noexcept { return next_frame_; }

 private:
  TrackerConfig config_;
  int grid_height_;
  int grid_width_;
  int grid_channels_;
  int full_height_;
  int full_width_;
  int num_classes_;
  int next_frame_ = 1;
  MemoryQueue memory_;
};

// Returns the masks of frames 2..N at the resolution of `first_mask`.
std::vector<LabelMask> track_video(std::span<const FeatureMap> features,
                                   const LabelMask& first_mask, const TrackerConfig& config);

}  // namespace maskflow

#endif  // MASKFLOW_PROPAGATION_HPP_
