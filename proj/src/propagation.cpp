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

#include "maskflow/propagation.hpp"

#include <Eigen/Core>
#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "maskflow/error.hpp"
#include "maskflow/parallel.hpp"

namespace maskflow {

namespace {

// Query tile shape. Narrow features make the GEMMs cheap and the per-tile
// logit buffer the bottleneck, so they get smaller tiles.
constexpr int kTileRows = 16;
constexpr int kTileCols = 12;
constexpr int kSmallTileRows = 8;
constexpr int kSmallTileChannels = 128;
// Softmax denominators add float partial sums of this many terms in double.
constexpr Eigen::Index kSumChunk = 256;

std::string shape_string(int h, int w, int c) {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

// Labels of `scores` when every pixel is exactly one-hot, empty otherwise.
std::vector<Label> one_hot_labels(const SoftMask& scores) {
  const int k = scores.num_classes();
  std::vector<Label> labels(scores.pixel_count());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = scores.pixel(i);
    int hot = -1;
    for (int c = 0; c < k; ++c) {
      if (row[c] == 1.0f) {
        if (hot >= 0) return {};
        hot = c;
      } else if (row[c] != 0.0f) {
        return {};
      }
    }
    if (hot < 0) return {};
    labels[i] = static_cast<Label>(hot);
  }
  return labels;
}

// Class scores are accumulated in kLanes interleaved partial sums per class
// (entry n of a row goes to lane n % kLanes) that are combined in a fixed
// order. Every lane sees the same sequence of additions however the entries
// are batched, so the streaming and materialised paths produce identical
// bits.
constexpr std::size_t kLanes = 16;
// Above this many classes the per-class block update costs more than it saves.
constexpr std::size_t kMaxBlockClasses = 64;

class ScoreAccumulator {
 public:
  explicit ScoreAccumulator(int num_classes)
      : k_(static_cast<std::size_t>(num_classes)), lanes_(kLanes * k_) {}

  void reset() {
    std::fill(lanes_.begin(), lanes_.end(), 0.0);
    n_ = 0;
  }

  // Entries whose reference mask is one-hot with the given labels.
  void add_labels(const Label* labels, const float* w, std::size_t len) {
    std::size_t j = 0;
    for (; j < len && (n_ + j) % kLanes != 0; ++j) add_one_hot(labels[j], w[j], n_ + j);
#if defined(__AVX512F__) && defined(__AVX512BW__) && defined(__AVX512VL__)
    for (; k_ <= kMaxBlockClasses && j + kLanes <= len; j += kLanes) {
      const __m512d lo = _mm512_cvtps_pd(_mm256_loadu_ps(w + j));
      const __m512d hi = _mm512_cvtps_pd(_mm256_loadu_ps(w + j + 8));
      const __m256i lab = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(labels + j));
      for (std::size_t c = 0; c < k_; ++c) {
        const __mmask16 hit = _mm256_cmpeq_epi16_mask(lab, _mm256_set1_epi16(static_cast<short>(c)));
        if (hit == 0) continue;
        double* lane = lanes_.data() + c * kLanes;
        const __m512d a = _mm512_loadu_pd(lane);
        const __m512d b = _mm512_loadu_pd(lane + 8);
        _mm512_storeu_pd(lane, _mm512_mask_add_pd(a, static_cast<__mmask8>(hit), a, lo));
        _mm512_storeu_pd(lane + 8, _mm512_mask_add_pd(b, static_cast<__mmask8>(hit >> 8), b, hi));
      }
    }
#endif
    for (; j < len; ++j) add_one_hot(labels[j], w[j], n_ + j);
    n_ += len;
  }

  void add_run(const MemoryEntry& ref, std::uint32_t pixel0, const float* w, std::size_t len) {
    if (!ref.labels.empty()) {
      add_labels(ref.labels.data() + pixel0, w, len);
      return;
    }
    for (std::size_t j = 0; j < len; ++j) {
      const auto m = ref.mask.pixel(pixel0 + j);
      const std::size_t l = (n_ + j) % kLanes;
      for (std::size_t c = 0; c < k_; ++c) {
        lanes_[c * kLanes + l] += static_cast<double>(w[j]) * static_cast<double>(m[c]);
      }
    }
    n_ += len;
  }

  void store(std::span<float> out) const {
    for (std::size_t c = 0; c < k_; ++c) {
      const double* lane = lanes_.data() + c * kLanes;
      double total = lane[0];
      for (std::size_t l = 1; l < kLanes; ++l) total += lane[l];
      out[c] = static_cast<float>(total);
    }
  }

 private:
  void add_one_hot(Label label, float w, std::size_t n) {
    lanes_[label * kLanes + n % kLanes] += static_cast<double>(w);
  }

  std::size_t k_;
  std::vector<double> lanes_;
  std::size_t n_ = 0;
};

void check_references(const FeatureMap& query, const MemoryQueue& refs) {
  if (refs.empty()) fail(ErrorCategory::kDimension, "no reference frames");
  const int k = refs[0].mask.num_classes();
  for (const auto& entry : refs.entries()) {
    if (!entry.features.same_shape(query)) {
      fail(ErrorCategory::kDimension,
           "reference features " +
               shape_string(entry.features.height(), entry.features.width(),
                            entry.features.channels()) +
               " do not match query " +
               shape_string(query.height(), query.width(), query.channels()));
    }
    if (entry.mask.num_classes() != k) {
      fail(ErrorCategory::kDimension, "class-count mismatch across memory entries");
    }
  }
}

struct Tile {
  int y0, y1, x0, x1;      // query pixels
  int ry0, ry1, rx0, rx1;  // union of their windows
};

std::vector<Tile> make_tiles(const SpatialWindow& window, int channels) {
  std::vector<Tile> tiles;
  const int h = window.height();
  const int w = window.width();
  const int r = window.radius();
  const int tile_rows = channels < kSmallTileChannels ? kSmallTileRows : kTileRows;
  for (int y0 = 0; y0 < h; y0 += tile_rows) {
    for (int x0 = 0; x0 < w; x0 += kTileCols) {
      Tile t{};
      t.y0 = y0;
      t.y1 = std::min(h, y0 + tile_rows);
      t.x0 = x0;
      t.x1 = std::min(w, x0 + kTileCols);
      t.ry0 = std::max(0, t.y0 - r);
      t.ry1 = std::min(h, t.y1 + r);
      t.rx0 = std::max(0, t.x0 - r);
      t.rx1 = std::min(w, t.x1 + r);
      tiles.push_back(t);
    }
  }
  return tiles;
}

using AlignedFloats = std::vector<float, Eigen::aligned_allocator<float>>;

// Width of the reference block one kernel call covers.
constexpr int kColBlock = 64;
// Queries sharing one pass over the reference block.
constexpr int kQueryBlock = 6;
// Channels per pass, so a reference block stays in L1 across query blocks.
constexpr int kChannelChunk = 256;
// Weight rows of a tile are padded on both sides so masked stores addressed
// relative to a row never leave the allocation.
constexpr std::size_t kRowPad = kColBlock;

// Stride of a packed grid row: room for a full block past the right edge.
std::size_t packed_stride(int width) {
  return static_cast<std::size_t>((width + kColBlock + 15) / 16 * 16);
}

}  // namespace

// Reference features laid out channel-major per grid row, so horizontally
// adjacent reference pixels load as one vector: element (y, k, x) lives at
// data[(y * channels + k) * stride + x].
struct PackedFeatures {
  std::size_t stride = 0;
  int channels = 0;
  AlignedFloats data;
};

namespace {

std::shared_ptr<const PackedFeatures> pack_features(const FeatureMap& features) {
  auto packed = std::make_shared<PackedFeatures>();
  const int h = features.height();
  const int w = features.width();
  const int c = features.channels();
  packed->channels = c;
  packed->stride = packed_stride(w);
  packed->data.assign(static_cast<std::size_t>(h) * c * packed->stride, 0.0f);
  const float* src = features.values().data();
  // Transposed in strips of 16 pixels so each output line is written once.
  for (int y = 0; y < h; ++y) {
    float* out = packed->data.data() + static_cast<std::size_t>(y) * c * packed->stride;
    for (int x0 = 0; x0 < w; x0 += 16) {
      const int n = std::min(16, w - x0);
      const float* px = src + (static_cast<std::size_t>(y) * w + x0) * c;
      for (int k = 0; k < c; ++k) {
        float* line = out + static_cast<std::size_t>(k) * packed->stride + x0;
        for (int x = 0; x < n; ++x) line[x] = px[static_cast<std::size_t>(x) * c + k];
      }
    }
  }
  return packed;
}

struct PackedReferences {
  std::size_t stride = 0;
  int channels = 0;
  std::vector<std::shared_ptr<const PackedFeatures>> slots;

  const float* row(std::size_t slot, int y) const {
    return slots[slot]->data.data() + static_cast<std::size_t>(y) * channels * stride;
  }
};

PackedReferences pack_references(std::span<const MemoryEntry* const> entries, int workers) {
  PackedReferences packed;
  if (entries.empty()) return packed;
  packed.channels = entries[0]->features.channels();
  packed.stride = packed_stride(entries[0]->features.width());
  packed.slots.resize(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t, std::size_t s) {
    packed.slots[s] = entries[s]->packed ? entries[s]->packed : pack_features(entries[s]->features);
  });
  return packed;
}

#if defined(__AVX512F__)
// Logits of kQueries queries against kColBlock adjacent reference pixels over
// channels [k0, k1), continuing the partial sums already in dst unless k0 is
// 0. Each logit is one fused multiply-add chain over the channels in order,
// so its bits do not depend on how queries, references or channels are
// blocked.
template <int kQueries, int kVecs>
void dot_block(const float* const* queries, const float* refs, std::size_t ref_stride, int k0,
               int k1, float* const* dst, const __mmask16 (*masks)[4], int v0) {
  __m512 acc[kQueries][kVecs];
#pragma GCC unroll 8
  for (int q = 0; q < kQueries; ++q) {
#pragma GCC unroll 4
    for (int v = 0; v < kVecs; ++v) {
      acc[q][v] = k0 == 0 ? _mm512_setzero_ps()
                          : _mm512_maskz_loadu_ps(masks[q][v0 + v], dst[q] + 16 * (v0 + v));
    }
  }
  refs += 16 * v0;
  for (int k = k0; k < k1; ++k) {
    const float* r = refs + static_cast<std::size_t>(k) * ref_stride;
    __m512 rv[kVecs];
#pragma GCC unroll 4
    for (int v = 0; v < kVecs; ++v) rv[v] = _mm512_loadu_ps(r + 16 * v);
#pragma GCC unroll 8
    for (int q = 0; q < kQueries; ++q) {
      const __m512 b = _mm512_set1_ps(queries[q][k]);
#pragma GCC unroll 4
      for (int v = 0; v < kVecs; ++v) acc[q][v] = _mm512_fmadd_ps(rv[v], b, acc[q][v]);
    }
  }
#pragma GCC unroll 8
  for (int q = 0; q < kQueries; ++q) {
#pragma GCC unroll 4
    for (int v = 0; v < kVecs; ++v) {
      const __mmask16 m = masks[q][v0 + v];
      if (m != 0) _mm512_mask_storeu_ps(dst[q] + 16 * (v0 + v), m, acc[q][v]);
    }
  }
}

using DotBlockFn = void (*)(const float* const*, const float*, std::size_t, int, int, float* const*,
                            const __mmask16 (*)[4], int);

template <int kQueries>
constexpr std::array<DotBlockFn, 4> dot_row = {dot_block<kQueries, 1>, dot_block<kQueries, 2>,
                                               dot_block<kQueries, 3>, dot_block<kQueries, 4>};

// Runs n queries over the vectors [v0, v1) of the block, the only ones any
// of their masks admit.
void dispatch_dot_block(int n, int v0, int v1, const float* const* queries, const float* refs,
                        std::size_t ref_stride, int k0, int k1, float* const* dst,
                        const __mmask16 (*masks)[4]) {
  static constexpr std::array<std::array<DotBlockFn, 4>, 6> table = {
      dot_row<1>, dot_row<2>, dot_row<3>, dot_row<4>, dot_row<5>, dot_row<6>};
  table[n - 1][v1 - v0 - 1](queries, refs, ref_stride, k0, k1, dst, masks, v0);
}
static_assert(kQueryBlock == 6 && kColBlock == 64);
#endif

// Computes normalised affinity rows one tile of query pixels at a time. The
// logits of every query land in its own contiguous row, ordered by slot, then
// window row, then column, which is the order the softmax and sinks use.
class TileKernel {
 public:
  TileKernel(const FeatureMap& query, std::span<const MemoryEntry* const> slots,
             const PackedReferences& packed, const SpatialWindow& window, double tau)
      : query_(query),
        slots_(slots),
        packed_(packed),
        window_(window),
        inv_tau_(static_cast<float>(1.0 / tau)) {}

  // For every query pixel of the tile calls sink.begin(q), then
  // sink.add_run(slot, first_pixel, weights, len) for each contiguous run of
  // admitted references in canonical order, then sink.end(q).
  template <class Sink>
  void run(const Tile& t, Sink& sink) {
    const int width = query_.width();
    const int channels = query_.channels();
    const int tile_w = t.x1 - t.x0;
    const int nq = (t.y1 - t.y0) * tile_w;
    const std::size_t nslots = slots_.size();

    // Row layout: starts aligned so the vectorised reductions below see the
    // same alignment whichever worker runs the tile.
    layout_.resize(static_cast<std::size_t>(nq));
    std::size_t total = kRowPad;
    for (int qi = 0; qi < nq; ++qi) {
      QueryRow& r = layout_[qi];
      r.y = t.y0 + qi / tile_w;
      r.x = t.x0 + qi % tile_w;
      r.rows = window_.rows(r.y);
      const auto cols = window_.cols(r.x);
      r.col0 = cols.begin;
      r.len = cols.size();
      r.count = nslots * static_cast<std::size_t>(r.rows.size()) * r.len;
      r.offset = total;
      total += (r.count + 15) / 16 * 16;
    }
    weights_.resize(total + kRowPad);

#if defined(__AVX512F__)
    const int radius = window_.radius();
    const int rw = t.rx1 - t.rx0;
    const float* queries[kQueryBlock];
    float* dst[kQueryBlock];
    __mmask16 masks[kQueryBlock][4];
    for (std::size_t s = 0; s < nslots; ++s) {
      for (int yy = t.ry0; yy < t.ry1; ++yy) {
        const int first = (std::max(t.y0, yy - radius) - t.y0) * tile_w;
        const int last = (std::min(t.y1, yy + radius + 1) - t.y0) * tile_w;
        const float* ref_row = packed_.row(s, yy) + t.rx0;
        for (int j0 = 0; j0 < rw; j0 += kColBlock) {
          for (int k0 = 0; k0 < channels; k0 += kChannelChunk) {
          const int k1 = std::min(channels, k0 + kChannelChunk);
          // Contiguous copy of the block, indexed from channel k0.
          block_.resize(static_cast<std::size_t>(kChannelChunk) * kColBlock);
          for (int k = k0; k < k1; ++k) {
            std::copy_n(ref_row + j0 + static_cast<std::size_t>(k) * packed_.stride, kColBlock,
                        block_.data() + static_cast<std::size_t>(k - k0) * kColBlock);
          }
          const float* block = block_.data() - static_cast<std::ptrdiff_t>(k0) * kColBlock;
          for (int q0 = first; q0 < last; q0 += kQueryBlock) {
            const int n = std::min(kQueryBlock, last - q0);
            int v0 = 4, v1 = 0;
            for (int b = 0; b < n; ++b) {
              const QueryRow& r = layout_[q0 + b];
              queries[b] = query_.pixel(r.y, r.x).data();
              // Block column j is reference column t.rx0 + j0 + j; the row
              // keeps columns [col0, col0 + len).
              const int shift = t.rx0 + j0 - r.col0;
              const std::size_t row_start =
                  r.offset + (s * static_cast<std::size_t>(r.rows.size()) +
                              static_cast<std::size_t>(yy - r.rows.begin)) * r.len;
              dst[b] = weights_.data() + row_start + shift;
              for (int v = 0; v < 4; ++v) {
                const int lo = std::clamp(-shift - 16 * v, 0, 16);
                const int hi = std::clamp(r.len - shift - 16 * v, 0, 16);
                masks[b][v] = hi > lo ? static_cast<__mmask16>(((1u << hi) - 1u) & ~((1u << lo) - 1u)) : 0;
                if (masks[b][v] != 0) {
                  v0 = std::min(v0, v);
                  v1 = std::max(v1, v + 1);
                }
              }
            }
            if (v1 > v0) dispatch_dot_block(n, v0, v1, queries, block, kColBlock, k0, k1, dst, masks);
          }
          }
        }
      }
    }
#else
    for (int qi = 0; qi < nq; ++qi) {
      const QueryRow& r = layout_[qi];
      const Eigen::Map<const Eigen::VectorXf> qv(query_.pixel(r.y, r.x).data(), channels);
      float* out = weights_.data() + r.offset;
      for (std::size_t s = 0; s < nslots; ++s) {
        const float* base = slots_[s]->features.values().data();
        for (int row = r.rows.begin; row < r.rows.end; ++row) {
          const Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> refs(
              base + (static_cast<std::size_t>(row) * width + r.col0) * channels, r.len, channels);
          Eigen::Map<Eigen::VectorXf>(out, r.len).noalias() = refs * qv;
          out += r.len;
        }
      }
    }
#endif

    for (int qi = 0; qi < nq; ++qi) {
      const QueryRow& r = layout_[qi];
      float* w = weights_.data() + r.offset;
      Eigen::Map<Eigen::ArrayXf, Eigen::AlignedMax> wv(w, static_cast<Eigen::Index>(r.count));
      const float max_logit = wv.maxCoeff();
      double sum = 0.0;
      for (Eigen::Index i0 = 0; i0 < wv.size(); i0 += kSumChunk) {
        auto chunk = wv.segment(i0, std::min(kSumChunk, wv.size() - i0));
        chunk = ((chunk - max_logit) * inv_tau_).exp();
        sum += static_cast<double>(chunk.sum());
      }
      wv *= static_cast<float>(1.0 / sum);

      const auto q_index = static_cast<std::size_t>(r.y) * width + r.x;
      sink.begin(q_index);
      for (std::size_t s = 0; s < nslots; ++s) {
        for (int row = r.rows.begin; row < r.rows.end; ++row) {
          const auto pixel0 = static_cast<std::uint32_t>(row * width + r.col0);
          sink.add_run(static_cast<std::uint32_t>(s), pixel0, w, static_cast<std::size_t>(r.len));
          w += r.len;
        }
      }
      sink.end(q_index);
    }
  }

 private:
  struct QueryRow {
    int y, x;
    SpatialWindow::Range rows;
    int col0, len;
    std::size_t count, offset;
  };

  const FeatureMap& query_;
  std::span<const MemoryEntry* const> slots_;
  const PackedReferences& packed_;
  const SpatialWindow& window_;
  float inv_tau_;
  std::vector<QueryRow> layout_;
  AlignedFloats weights_;
  AlignedFloats block_;
};

// Batches consecutive one-hot runs so their labels are accumulated in one
// pass per query.
class ScoreSink {
 public:
  ScoreSink(std::span<const MemoryEntry* const> slots, SoftMask& out)
      : slots_(slots), out_(out), acc_(out.num_classes()) {}

  void begin(std::size_t) {
    acc_.reset();
    pending_ = 0;
  }

  void add_run(std::uint32_t slot, std::uint32_t pixel0, const float* w, std::size_t len) {
    const MemoryEntry& ref = *slots_[slot];
    if (ref.labels.empty()) {
      flush();
      acc_.add_run(ref, pixel0, w, len);
      return;
    }
    if (pending_ > 0 && pending_w_ + pending_ != w) flush();
    if (pending_ == 0) pending_w_ = w;
    if (labels_.size() < pending_ + len) labels_.resize(pending_ + len);
    std::copy_n(ref.labels.data() + pixel0, len, labels_.data() + pending_);
    pending_ += len;
  }

  void end(std::size_t q) {
    flush();
    acc_.store(out_.pixel(q));
  }

 private:
  void flush() {
    if (pending_ == 0) return;
    acc_.add_labels(labels_.data(), pending_w_, pending_);
    pending_ = 0;
  }

  std::span<const MemoryEntry* const> slots_;
  SoftMask& out_;
  ScoreAccumulator acc_;
  std::vector<Label> labels_;
  const float* pending_w_ = nullptr;
  std::size_t pending_ = 0;
};

class EntrySink {
 public:
  explicit EntrySink(std::vector<std::vector<AffinityEntry>>& rows) : rows_(rows) {}

  void begin(std::size_t q) { current_ = &rows_[q]; }
  void add_run(std::uint32_t slot, std::uint32_t pixel0, const float* w, std::size_t len) {
    for (std::size_t j = 0; j < len; ++j) {
      current_->push_back({slot, pixel0 + static_cast<std::uint32_t>(j), w[j]});
    }
  }
  void end(std::size_t) {}

 private:
  std::vector<std::vector<AffinityEntry>>& rows_;
  std::vector<AffinityEntry>* current_ = nullptr;
};

std::vector<const MemoryEntry*> slot_pointers(const MemoryQueue& refs) {
  std::vector<const MemoryEntry*> slots;
  slots.reserve(refs.size());
  for (const auto& e : refs.entries()) slots.push_back(&e);
  return slots;
}

}  // namespace

void TrackerConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    fail(ErrorCategory::kConfig, "tau must be a positive finite number, got " + std::to_string(tau));
  }
  if (window < 0) {
    fail(ErrorCategory::kConfig, "window must be >= 0, got " + std::to_string(window));
  }
  if (memory < 1) {
    fail(ErrorCategory::kConfig, "memory must be >= 1, got " + std::to_string(memory));
  }
  if (threads < 1) {
    fail(ErrorCategory::kConfig, "threads must be >= 1, got " + std::to_string(threads));
  }
}

FeatureMap normalize_features(FeatureMap grid) {
  const auto channels = static_cast<std::size_t>(grid.channels());
  auto values = grid.values();
  for (std::size_t base = 0; base < values.size(); base += channels) {
    double norm_sq = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      norm_sq += static_cast<double>(values[base + c]) * static_cast<double>(values[base + c]);
    }
    const double norm = std::sqrt(norm_sq);
    for (std::size_t c = 0; c < channels; ++c) {
      values[base + c] =
          norm < 1e-12 ? 0.0f : static_cast<float>(static_cast<double>(values[base + c]) / norm);
    }
  }
  return grid;
}

// --- spatial window ---------------------------------------------------------

SpatialWindow::SpatialWindow(int height, int width, int window)
    : height_(height), width_(width), radius_(window / 2) {
  if (height < 1 || width < 1) {
    fail(ErrorCategory::kDimension, "spatial window needs a non-empty grid");
  }
  if (window < 0) fail(ErrorCategory::kConfig, "window must be >= 0");
}

bool SpatialWindow::admits(int qy, int qx, int py, int px) const noexcept {
  return std::abs(qy - py) <= radius_ && std::abs(qx - px) <= radius_;
}

SpatialWindow::Range SpatialWindow::rows(int qy) const noexcept {
  return {std::max(0, qy - radius_), std::min(height_, qy + radius_ + 1)};
}

SpatialWindow::Range SpatialWindow::cols(int qx) const noexcept {
  return {std::max(0, qx - radius_), std::min(width_, qx + radius_ + 1)};
}

SpatialWindow build_spatial_mask(int height, int width, int window) {
  return SpatialWindow(height, width, window);
}

// --- memory -----------------------------------------------------------------

MemoryQueue::MemoryQueue(int capacity, MemoryMode mode, bool anchor_first_frame)
    : capacity_(capacity), mode_(mode), anchor_(anchor_first_frame) {
  if (capacity < 1) fail(ErrorCategory::kConfig, "memory capacity must be >= 1");
}

MemoryQueue::MemoryQueue(const TrackerConfig& config)
    : MemoryQueue(config.memory, config.memory_mode, config.anchor_first_frame) {}

int MemoryQueue::num_classes() const noexcept {
  return entries_.empty() ? 0 : entries_.front().mask.num_classes();
}

void MemoryQueue::insert(MemoryEntry entry) {
  if (entry.mask.height() != entry.features.height() ||
      entry.mask.width() != entry.features.width()) {
    fail(ErrorCategory::kDimension, "memory mask does not match its feature grid");
  }
  if (!entries_.empty()) {
    const auto& head = entries_.front();
    if (!head.features.same_shape(entry.features)) {
      fail(ErrorCategory::kDimension, "memory features change shape");
    }
    if (head.mask.num_classes() != entry.mask.num_classes()) {
      fail(ErrorCategory::kDimension, "class-count mismatch across memory entries");
    }
    if (entry.frame_index <= entries_.back().frame_index) {
      fail(ErrorCategory::kInternal, "memory entries must arrive in frame order");
    }
  }
  if (!entry.packed) entry.packed = pack_features(entry.features);
  entries_.push_back(std::move(entry));
  if (anchor_ && !has_anchor_entry_) has_anchor_entry_ = true;
  while (entries_.size() > static_cast<std::size_t>(capacity_)) {
    if (has_anchor_entry_) {
      entries_.erase(entries_.begin() + 1);
    } else {
      entries_.pop_front();
    }
  }
}

void MemoryQueue::push(int frame_index, FeatureMap features, const SoftMask& scores) {
  MemoryEntry entry;
  entry.frame_index = frame_index;
  entry.features = std::move(features);
  if (mode_ == MemoryMode::kHardOneHot) {
    const auto labels = argmax_labels(scores);
    entry.mask = one_hot(labels);
    entry.labels.assign(labels.labels().begin(), labels.labels().end());
  } else {
    entry.mask = scores;
    entry.labels = one_hot_labels(scores);
  }
  insert(std::move(entry));
}

void MemoryQueue::push(int frame_index, FeatureMap features, const LabelMask& labels) {
  MemoryEntry entry;
  entry.frame_index = frame_index;
  entry.features = std::move(features);
  entry.mask = one_hot(labels);
  entry.labels.assign(labels.labels().begin(), labels.labels().end());
  insert(std::move(entry));
}

void MemoryQueue::push_reference(int frame_index, FeatureMap features, SoftMask mask) {
  MemoryEntry entry;
  entry.frame_index = frame_index;
  entry.features = std::move(features);
  entry.labels = one_hot_labels(mask);
  entry.mask = std::move(mask);
  insert(std::move(entry));
}

MemoryQueue update_memory(MemoryQueue queue, int frame_index, FeatureMap features,
                          const SoftMask& scores) {
  queue.push(frame_index, std::move(features), scores);
  return queue;
}

// --- affinity and propagation ----------------------------------------------

WindowedAffinity compute_windowed_affinity(const FeatureMap& query, const MemoryQueue& refs,
                                           const TrackerConfig& config) {
  config.validate();
  check_references(query, refs);
  const SpatialWindow window(query.height(), query.width(), config.window);
  const auto slots = slot_pointers(refs);
  const auto tiles = make_tiles(window, query.channels());

  std::vector<std::vector<AffinityEntry>> rows(query.pixel_count());
  const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(tiles.size())));
  const auto packed = pack_references(slots, workers);
  std::vector<TileKernel> kernels;
  std::vector<EntrySink> sinks;
  for (int w = 0; w < workers; ++w) {
    kernels.emplace_back(query, slots, packed, window, config.tau);
    sinks.emplace_back(rows);
  }
  parallel_for(tiles.size(), workers,
               [&](std::size_t worker, std::size_t i) { kernels[worker].run(tiles[i], sinks[worker]); });

  WindowedAffinity affinity;
  affinity.height = query.height();
  affinity.width = query.width();
  affinity.num_slots = refs.size();
  affinity.offsets.reserve(rows.size() + 1);
  affinity.offsets.push_back(0);
  std::size_t total = 0;
  for (const auto& r : rows) {
    total += r.size();
    affinity.offsets.push_back(total);
  }
  affinity.entries.reserve(total);
  for (auto& r : rows) {
    affinity.entries.insert(affinity.entries.end(), r.begin(), r.end());
    std::vector<AffinityEntry>().swap(r);
  }
  return affinity;
}

SoftMask propagate(const WindowedAffinity& affinity, const MemoryQueue& refs) {
  if (refs.empty()) fail(ErrorCategory::kDimension, "no reference frames");
  if (affinity.num_slots != refs.size()) {
    fail(ErrorCategory::kDimension, "affinity and memory refer to different reference sets");
  }
  const int k = refs[0].mask.num_classes();
  for (const auto& entry : refs.entries()) {
    if (entry.mask.num_classes() != k) {
      fail(ErrorCategory::kDimension, "class-count mismatch across memory entries");
    }
    if (entry.mask.height() != affinity.height || entry.mask.width() != affinity.width) {
      fail(ErrorCategory::kDimension, "memory mask does not match the affinity grid");
    }
  }
  const auto slots = slot_pointers(refs);
  SoftMask out(affinity.height, affinity.width, k);
  ScoreAccumulator acc(k);
  for (std::size_t q = 0; q + 1 < affinity.offsets.size(); ++q) {
    acc.reset();
    for (const auto& e : affinity.row(q)) {
      if (e.slot >= slots.size()) fail(ErrorCategory::kDimension, "affinity slot out of range");
      acc.add_run(*slots[e.slot], e.pixel, &e.weight, 1);
    }
    acc.store(out.pixel(q));
  }
  return out;
}

SoftMask propagate_windowed(const FeatureMap& query, const MemoryQueue& refs,
                            const TrackerConfig& config) {
  config.validate();
  check_references(query, refs);
  const SpatialWindow window(query.height(), query.width(), config.window);
  const auto slots = slot_pointers(refs);
  const auto tiles = make_tiles(window, query.channels());

  SoftMask out(query.height(), query.width(), refs.num_classes());
  const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(tiles.size())));
  const auto packed = pack_references(slots, workers);
  std::vector<TileKernel> kernels;
  std::vector<ScoreSink> sinks;
  for (int w = 0; w < workers; ++w) {
    kernels.emplace_back(query, slots, packed, window, config.tau);
    sinks.emplace_back(slots, out);
  }
  parallel_for(tiles.size(), workers,
               [&](std::size_t worker, std::size_t i) { kernels[worker].run(tiles[i], sinks[worker]); });
  return out;
}

LabelMask argmax_labels(const SoftMask& scores) {
  const int k = scores.num_classes();
  std::vector<Label> labels(scores.pixel_count());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = scores.pixel(i);
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (row[c] > row[best]) best = c;
    }
    labels[i] = static_cast<Label>(best);
  }
  return LabelMask(scores.height(), scores.width(), k, std::move(labels));
}

// --- resampling -------------------------------------------------------------

namespace {

struct Tap {
  int source;
  double weight;
};

// Overlap of destination cell i with source cells along one axis. Positions
// are measured in units of 1/dst so all overlaps are exact integers.
std::vector<std::vector<Tap>> pooling_taps(int src, int dst) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(dst));
  for (int i = 0; i < dst; ++i) {
    const long lo = static_cast<long>(i) * src;
    const long hi = static_cast<long>(i + 1) * src;
    for (long s = lo / dst; s * dst < hi; ++s) {
      const long overlap = std::min(hi, (s + 1) * dst) - std::max(lo, s * dst);
      if (overlap > 0) {
        taps[static_cast<std::size_t>(i)].push_back(
            {static_cast<int>(s), static_cast<double>(overlap) / static_cast<double>(src)});
      }
    }
  }
  return taps;
}

}  // namespace

SoftMask downsample_mask(const LabelMask& full, int height, int width) {
  if (height < 1 || width < 1 || full.height() < height || full.width() < width) {
    fail(ErrorCategory::kDimension,
         "cannot pool a " + std::to_string(full.height()) + "x" + std::to_string(full.width()) +
             " mask down to " + std::to_string(height) + "x" + std::to_string(width));
  }
  const int k = full.num_classes();
  const auto row_taps = pooling_taps(full.height(), height);
  const auto col_taps = pooling_taps(full.width(), width);
  SoftMask out(height, width, k);
  std::vector<double> acc(static_cast<std::size_t>(k));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const auto& ty : row_taps[static_cast<std::size_t>(y)]) {
        for (const auto& tx : col_taps[static_cast<std::size_t>(x)]) {
          acc[full.at(ty.source, tx.source)] += ty.weight * tx.weight;
        }
      }
      auto o = out.pixel(y, x);
      for (int c = 0; c < k; ++c) o[c] = static_cast<float>(acc[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

namespace {

struct Lerp {
  int lo;
  int hi;
  double t;
};

std::vector<Lerp> bilinear_taps(int src, int dst) {
  std::vector<Lerp> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (int i = 0; i < dst; ++i) {
    double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(lo + 1, src - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, pos - lo};
  }
  return taps;
}

}  // namespace

SoftMask upsample_soft_mask(const SoftMask& scores, int height, int width) {
  if (height < scores.height() || width < scores.width()) {
    fail(ErrorCategory::kDimension, "upsample target is smaller than the source grid");
  }
  if (height == scores.height() && width == scores.width()) return scores;
  const int k = scores.num_classes();
  const auto ys = bilinear_taps(scores.height(), height);
  const auto xs = bilinear_taps(scores.width(), width);
  SoftMask out(height, width, k);
  for (int y = 0; y < height; ++y) {
    const auto& ty = ys[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      const auto& tx = xs[static_cast<std::size_t>(x)];
      const auto a = scores.pixel(ty.lo, tx.lo);
      const auto b = scores.pixel(ty.lo, tx.hi);
      const auto c = scores.pixel(ty.hi, tx.lo);
      const auto d = scores.pixel(ty.hi, tx.hi);
      auto o = out.pixel(y, x);
      for (int ch = 0; ch < k; ++ch) {
        const double top = (1.0 - tx.t) * a[ch] + tx.t * b[ch];
        const double bottom = (1.0 - tx.t) * c[ch] + tx.t * d[ch];
        o[ch] = static_cast<float>((1.0 - ty.t) * top + ty.t * bottom);
      }
    }
  }
  return out;
}

// --- tracking ---------------------------------------------------------------

Tracker::Tracker(TrackerConfig config, const FeatureMap& first_features,
                 const LabelMask& first_mask)
    : config_(config),
      grid_height_(first_features.height()),
      grid_width_(first_features.width()),
      grid_channels_(first_features.channels()),
      full_height_(first_mask.height()),
      full_width_(first_mask.width()),
      num_classes_(first_mask.num_classes()),
      memory_((config.validate(), config)) {
  if (full_height_ < grid_height_ || full_width_ < grid_width_) {
    fail(ErrorCategory::kDimension,
         "first mask " + std::to_string(full_height_) + "x" + std::to_string(full_width_) +
             " is smaller than the feature grid " + std::to_string(grid_height_) + "x" +
             std::to_string(grid_width_));
  }
  memory_.push_reference(0, normalize_features(first_features),
                         downsample_mask(first_mask, grid_height_, grid_width_));
}

Tracker::Step Tracker::step(const FeatureMap& features) {
  if (features.height() != grid_height_ || features.width() != grid_width_ ||
      features.channels() != grid_channels_) {
    fail(ErrorCategory::kDimension,
         "frame " + std::to_string(next_frame_ + 1) + " features " +
             shape_string(features.height(), features.width(), features.channels()) +
             " differ from first frame " +
             shape_string(grid_height_, grid_width_, grid_channels_));
  }
  FeatureMap query = normalize_features(features);
  SoftMask scores = propagate_windowed(query, memory_, config_);
  LabelMask labels = argmax_labels(upsample_soft_mask(scores, full_height_, full_width_));
  memory_.push(next_frame_, std::move(query), scores);
  ++next_frame_;
  return {std::move(scores), std::move(labels)};
}

std::vector<LabelMask> track_video(std::span<const FeatureMap> features,
                                   const LabelMask& first_mask, const TrackerConfig& config) {
  config.validate();
  if (features.empty()) fail(ErrorCategory::kDimension, "track_video needs at least one frame");
  Tracker tracker(config, features.front(), first_mask);
  std::vector<LabelMask> out;
  out.reserve(features.size() - 1);
  for (std::size_t i = 1; i < features.size(); ++i) {
    out.push_back(tracker.step(features[i]).labels);
  }
  return out;
}

}  // namespace maskflow
