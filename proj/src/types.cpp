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

#include "maskflow/types.hpp"

#include <string>
#include <utility>

#include "maskflow/error.hpp"

namespace maskflow {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kIo:
      return "io";
    case ErrorCategory::kFormat:
      return "format";
    case ErrorCategory::kConfig:
      return "config";
    case ErrorCategory::kDimension:
      return "dimension";
    case ErrorCategory::kInternal:
      return "internal";
  }
  return "internal";
}

namespace {

void check_extent(int value, const char* what) {
  if (value < 1) {
    fail(ErrorCategory::kDimension, std::string(what) + " must be >= 1, got " + std::to_string(value));
  }
}

std::size_t volume(int a, int b, int c) {
  return static_cast<std::size_t>(a) * static_cast<std::size_t>(b) * static_cast<std::size_t>(c);
}

}  // namespace

FeatureMap::FeatureMap(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  check_extent(height, "feature height");
  check_extent(width, "feature width");
  check_extent(channels, "feature channels");
  values_.assign(volume(height, width, channels), 0.0f);
}

FeatureMap::FeatureMap(int height, int width, int channels, std::vector<float> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  check_extent(height, "feature height");
  check_extent(width, "feature width");
  check_extent(channels, "feature channels");
  if (values_.size() != volume(height, width, channels)) {
    fail(ErrorCategory::kDimension,
         "feature value count " + std::to_string(values_.size()) + " does not match " +
             std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels));
  }
}

LabelMask::LabelMask(int height, int width, int num_classes, Label fill)
    : height_(height), width_(width), num_classes_(num_classes) {
  check_extent(height, "mask height");
  check_extent(width, "mask width");
  check_extent(num_classes, "num_classes");
  if (fill >= num_classes) {
    fail(ErrorCategory::kFormat, "label out of range: " + std::to_string(fill));
  }
  labels_.assign(volume(height, width, 1), fill);
}

LabelMask::LabelMask(int height, int width, int num_classes, std::vector<Label> labels)
    : height_(height), width_(width), num_classes_(num_classes), labels_(std::move(labels)) {
  check_extent(height, "mask height");
  check_extent(width, "mask width");
  check_extent(num_classes, "num_classes");
  if (labels_.size() != volume(height, width, 1)) {
    fail(ErrorCategory::kDimension, "label count " + std::to_string(labels_.size()) +
                                        " does not match " + std::to_string(height) + "x" +
                                        std::to_string(width));
  }
  for (Label label : labels_) {
    if (label >= num_classes) {
      fail(ErrorCategory::kFormat, "label out of range: " + std::to_string(label) +
                                       " >= " + std::to_string(num_classes));
    }
  }
}

SoftMask::SoftMask(int height, int width, int num_classes)
    : height_(height), width_(width), num_classes_(num_classes) {
  check_extent(height, "mask height");
  check_extent(width, "mask width");
  check_extent(num_classes, "num_classes");
  values_.assign(volume(height, width, num_classes), 0.0f);
}

SoftMask one_hot(const LabelMask& mask) {
  SoftMask soft(mask.height(), mask.width(), mask.num_classes());
  const auto labels = mask.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    soft.pixel(i)[labels[i]] = 1.0f;
  }
  return soft;
}

}  // namespace maskflow
