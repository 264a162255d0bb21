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

#ifndef MASKFLOW_TYPES_HPP_
#define MASKFLOW_TYPES_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace maskflow {

using Label = std::uint16_t;

// Dense per-frame feature grid, row-major with the channel index fastest.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int height, int width, int channels);
  FeatureMap(int height, int width, int channels, std::vector<float> values);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  std::span<float> pixel(int y, int x) {
    return {values_.data() + offset(y, x), static_cast<std::size_t>(channels_)};
  }
  std::span<const float> pixel(int y, int x) const {
    return {values_.data() + offset(y, x), static_cast<std::size_t>(channels_)};
  }
  std::span<const float> pixel(std::size_t index) const {
    return {values_.data() + index * static_cast<std::size_t>(channels_),
            static_cast<std::size_t>(channels_)};
  }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  bool same_shape(const FeatureMap& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t offset(int y, int x) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
           static_cast<std::size_t>(channels_);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> values_;
};

// Hard per-pixel class labels in [0, num_classes).
class LabelMask {
 public:
  LabelMask() = default;
  LabelMask(int height, int width, int num_classes, Label fill = 0);
  LabelMask(int height, int width, int num_classes, std::vector<Label> labels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t pixel_count() const noexcept { return labels_.size(); }

  Label at(int y, int x) const noexcept { return labels_[index(y, x)]; }
  Label& at(int y, int x) noexcept { return labels_[index(y, x)]; }

  std::span<Label> labels() noexcept { return labels_; }
  std::span<const Label> labels() const noexcept { return labels_; }

  bool same_shape(const LabelMask& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

 private:
  std::size_t index(int y, int x) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<Label> labels_;
};

// Per-pixel class scores, row-major with the class index fastest.
class SoftMask {
 public:
  SoftMask() = default;
  SoftMask(int height, int width, int num_classes);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  std::span<float> pixel(std::size_t index) {
    return {values_.data() + index * static_cast<std::size_t>(num_classes_),
            static_cast<std::size_t>(num_classes_)};
  }
  std::span<const float> pixel(std::size_t index) const {
    return {values_.data() + index * static_cast<std::size_t>(num_classes_),
            static_cast<std::size_t>(num_classes_)};
  }
  std::span<float> pixel(int y, int x) {
    return pixel(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(x));
  }
  std::span<const float> pixel(int y, int x) const {
    return pixel(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(x));
  }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  friend bool operator==(const SoftMask&, const SoftMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<float> values_;
};

// One-hot encoding of a label mask at its own resolution.
SoftMask one_hot(const LabelMask& mask);

}  // namespace maskflow

#endif  // MASKFLOW_TYPES_HPP_
