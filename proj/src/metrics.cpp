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

#include "maskflow/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <sstream>

#include "maskflow/error.hpp"

namespace maskflow {

namespace {

void check_pair(const LabelMask& pred, const LabelMask& gt) {
  if (!pred.same_shape(gt)) {
    fail(ErrorCategory::kDimension,
         "prediction " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
             " does not match ground truth " + std::to_string(gt.height()) + "x" +
             std::to_string(gt.width()));
  }
}

struct Confusion {
  std::vector<std::int64_t> tp, fp, fn;
};

Confusion confusion(const LabelMask& pred, const LabelMask& gt, int num_classes) {
  check_pair(pred, gt);
  const auto k = static_cast<std::size_t>(num_classes);
  Confusion c{std::vector<std::int64_t>(k), std::vector<std::int64_t>(k),
              std::vector<std::int64_t>(k)};
  const auto p = pred.labels();
  const auto g = gt.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= k || g[i] >= k) {
      fail(ErrorCategory::kFormat, "label out of range for " + std::to_string(num_classes) +
                                       " classes");
    }
    if (p[i] == g[i]) {
      ++c.tp[p[i]];
    } else {
      ++c.fp[p[i]];
      ++c.fn[g[i]];
    }
  }
  return c;
}

// Boundary pixels of class c: pixels labelled c with a 4-neighbour of a
// different label. The image border is not a transition.
std::vector<std::uint8_t> class_boundary(const LabelMask& mask, Label c) {
  const int h = mask.height();
  const int w = mask.width();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x) != c) continue;
      const bool edge = (y > 0 && mask.at(y - 1, x) != c) || (y + 1 < h && mask.at(y + 1, x) != c) ||
                        (x > 0 && mask.at(y, x - 1) != c) || (x + 1 < w && mask.at(y, x + 1) != c);
      out[static_cast<std::size_t>(y) * w + x] = edge ? 1 : 0;
    }
  }
  return out;
}

// Summed-area table for O(1) box queries.
class BoxCounter {
 public:
  BoxCounter(const std::vector<std::uint8_t>& bits, int h, int w)
      : h_(h), w_(w), sums_(static_cast<std::size_t>(h + 1) * (w + 1), 0) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        at(y + 1, x + 1) = bits[static_cast<std::size_t>(y) * w + x] + at(y, x + 1) + at(y + 1, x) -
                           at(y, x);
      }
    }
  }

  bool any_within(int y, int x, int radius) const {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(h_, y + radius + 1);
    const int x0 = std::max(0, x - radius);
    const int x1 = std::min(w_, x + radius + 1);
    return get(y1, x1) - get(y0, x1) - get(y1, x0) + get(y0, x0) > 0;
  }

 private:
  std::int64_t& at(int y, int x) { return sums_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }
  std::int64_t get(int y, int x) const { return sums_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }

  int h_;
  int w_;
  std::vector<std::int64_t> sums_;
};

// Fraction of `from` boundary pixels lying within `tolerance` of `to`.
double matched_fraction(const std::vector<std::uint8_t>& from, const BoxCounter& to, int h, int w,
                        int tolerance, std::int64_t& count) {
  std::int64_t total = 0;
  std::int64_t hit = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!from[static_cast<std::size_t>(y) * w + x]) continue;
      ++total;
      if (to.any_within(y, x, tolerance)) ++hit;
    }
  }
  count = total;
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json per_class_json(const PerClass& values) {
  auto out = nlohmann::json::array();
  for (const auto& v : values) out.push_back(optional_json(v));
  return out;
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::string csv_value(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

}  // namespace

PerClass jaccard_per_class(const LabelMask& pred, const LabelMask& gt, int num_classes) {
  const auto c = confusion(pred, gt, num_classes);
  PerClass out(static_cast<std::size_t>(num_classes));
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto uni = c.tp[k] + c.fp[k] + c.fn[k];
    if (uni > 0) out[k] = static_cast<double>(c.tp[k]) / static_cast<double>(uni);
  }
  return out;
}

PerClass pixel_f_score(const LabelMask& pred, const LabelMask& gt, int num_classes) {
  const auto c = confusion(pred, gt, num_classes);
  PerClass out(static_cast<std::size_t>(num_classes));
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto denom = 2 * c.tp[k] + c.fp[k] + c.fn[k];
    if (denom > 0) out[k] = 2.0 * static_cast<double>(c.tp[k]) / static_cast<double>(denom);
  }
  return out;
}

PerClass boundary_f_score(const LabelMask& pred, const LabelMask& gt, int num_classes,
                          int tolerance) {
  check_pair(pred, gt);
  if (tolerance < 0) fail(ErrorCategory::kConfig, "boundary tolerance must be >= 0");
  const int h = gt.height();
  const int w = gt.width();
  PerClass out(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) {
    const auto bp = class_boundary(pred, static_cast<Label>(k));
    const auto bg = class_boundary(gt, static_cast<Label>(k));
    const BoxCounter pred_box(bp, h, w);
    const BoxCounter gt_box(bg, h, w);
    std::int64_t np = 0;
    std::int64_t ng = 0;
    const double precision = matched_fraction(bp, gt_box, h, w, tolerance, np);
    const double recall = matched_fraction(bg, pred_box, h, w, tolerance, ng);
    if (np == 0 && ng == 0) continue;
    const double f = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    out[static_cast<std::size_t>(k)] = f;
  }
  return out;
}

double pixel_accuracy(const LabelMask& pred, const LabelMask& gt) {
  check_pair(pred, gt);
  const auto p = pred.labels();
  const auto g = gt.labels();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == g[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(p.size());
}

std::optional<double> mean_present(const PerClass& values) {
  std::vector<double> present;
  for (const auto& v : values) {
    if (v) present.push_back(*v);
  }
  return mean_of(present);
}

FrameScore score_frame(const LabelMask& pred, const LabelMask& gt, int num_classes,
                       const MetricOptions& options) {
  FrameScore score;
  score.jaccard = jaccard_per_class(pred, gt, num_classes);
  score.f = options.f_variant == FVariant::kPixel
                ? pixel_f_score(pred, gt, num_classes)
                : boundary_f_score(pred, gt, num_classes, options.boundary_tolerance);
  score.accuracy = pixel_accuracy(pred, gt);
  std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
  for (Label l : gt.labels()) seen[l] = true;
  for (int k = 0; k < num_classes; ++k) {
    if (seen[static_cast<std::size_t>(k)]) score.present_classes.push_back(k);
  }
  return score;
}

EvalReport aggregate(const std::vector<VideoScores>& videos) {
  EvalReport report;
  std::vector<double> js, fs, accs;
  for (const auto& video : videos) {
    VideoSummary summary;
    summary.id = video.id;
    std::vector<double> vj, vf, va;
    for (const auto& frame : video.frames) {
      if (frame.frame_index == 0) continue;
      summary.frame_scores.push_back(frame);
      if (auto j = frame.mean_jaccard()) vj.push_back(*j);
      if (auto f = frame.mean_f()) vf.push_back(*f);
      va.push_back(frame.accuracy);
    }
    summary.frames = va.size();
    if (summary.frames == 0) {
      report.warnings.push_back("video '" + video.id + "' has no frames after the first; skipped");
      continue;
    }
    summary.means = {mean_of(vj), mean_of(vf), mean_of(va)};
    if (summary.means.jaccard) js.push_back(*summary.means.jaccard);
    if (summary.means.f) fs.push_back(*summary.means.f);
    accs.push_back(*summary.means.accuracy);
    report.frames += summary.frames;
    report.videos.push_back(std::move(summary));
  }
  if (report.videos.empty()) fail(ErrorCategory::kDimension, "nothing to evaluate");
  report.dataset = {mean_of(js), mean_of(fs), mean_of(accs)};
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json doc;
  doc["dataset"] = {{"J_m", optional_json(report.dataset.jaccard)},
                    {"F_m", optional_json(report.dataset.f)},
                    {"P_acc", optional_json(report.dataset.accuracy)},
                    {"videos", report.videos.size()},
                    {"frames", report.frames}};
  doc["videos"] = nlohmann::json::array();
  for (const auto& v : report.videos) {
    auto frames = nlohmann::json::array();
    for (const auto& f : v.frame_scores) {
      frames.push_back({{"name", f.name},
                        {"index", f.frame_index},
                        {"J", optional_json(f.mean_jaccard())},
                        {"F", optional_json(f.mean_f())},
                        {"P_acc", f.accuracy},
                        {"present_classes", f.present_classes},
                        {"per_class_J", per_class_json(f.jaccard)},
                        {"per_class_F", per_class_json(f.f)}});
    }
    doc["videos"].push_back({{"id", v.id},
                             {"J_m", optional_json(v.means.jaccard)},
                             {"F_m", optional_json(v.means.f)},
                             {"P_acc", optional_json(v.means.accuracy)},
                             {"frames", std::move(frames)}});
  }
  doc["warnings"] = report.warnings;
  return doc;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "video,frame,J,F,P_acc\n";
  for (const auto& v : report.videos) {
    for (const auto& f : v.frame_scores) {
      os << v.id << ',' << f.name << ',' << csv_value(f.mean_jaccard()) << ','
         << csv_value(f.mean_f()) << ',' << csv_value(f.accuracy) << '\n';
    }
  }
  return os.str();
}

}  // namespace maskflow
