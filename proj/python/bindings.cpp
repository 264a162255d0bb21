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

// Python bindings. Feature maps cross as float32 (H, W, C) arrays and masks
// as uint16 (H, W) arrays; the class count travels separately.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <string>
#include <vector>

#include "maskflow/error.hpp"
#include "maskflow/metrics.hpp"
#include "maskflow/propagation.hpp"
#include "maskflow/synth.hpp"
#include "maskflow/tensor_store.hpp"
#include "maskflow/version.hpp"

namespace py = pybind11;

namespace maskflow {
namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<Label, py::array::c_style | py::array::forcecast>;

FeatureMap to_feature_map(const FloatArray& a) {
  if (a.ndim() != 3) fail(ErrorCategory::kDimension, "feature map must be a (H, W, C) array");
  std::vector<float> values(a.data(), a.data() + a.size());
  return FeatureMap(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                    static_cast<int>(a.shape(2)), std::move(values));
}

FloatArray from_feature_map(const FeatureMap& g) {
  FloatArray out({g.height(), g.width(), g.channels()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

LabelMask to_mask(const LabelArray& a, int num_classes) {
  if (a.ndim() != 2) fail(ErrorCategory::kDimension, "mask must be a (H, W) array");
  std::vector<Label> labels(a.data(), a.data() + a.size());
  return LabelMask(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), num_classes,
                   std::move(labels));
}

LabelArray from_mask(const LabelMask& m) {
  LabelArray out({m.height(), m.width()});
  std::copy(m.labels().begin(), m.labels().end(), out.mutable_data());
  return out;
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return {reinterpret_cast<const char*>(v.data()), v.size()};
}

std::span<const std::uint8_t> as_span(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

MemoryMode parse_mode(const std::string& mode) {
  if (mode == "hard") return MemoryMode::kHardOneHot;
  if (mode == "soft") return MemoryMode::kSoft;
  fail(ErrorCategory::kConfig, "memory_mode must be 'hard' or 'soft', got '" + mode + "'");
}

py::object optional_path(const std::optional<std::filesystem::path>& p) {
  return p ? py::object(py::str(p->string())) : py::object(py::none());
}

py::dict manifest_to_dict(const DatasetManifest& m) {
  py::list palette;
  for (const auto& p : m.palette) {
    palette.append(py::dict(py::arg("id") = p.id, py::arg("name") = p.name,
                            py::arg("color") = py::make_tuple(p.color[0], p.color[1], p.color[2])));
  }
  py::list videos;
  for (const auto& v : m.videos) {
    py::list frames;
    for (const auto& f : v.frames) {
      frames.append(py::dict(py::arg("index") = f.index, py::arg("image") = optional_path(f.image),
                             py::arg("features") = f.features.string(),
                             py::arg("mask") = optional_path(f.mask)));
    }
    videos.append(py::dict(py::arg("id") = v.id, py::arg("frames") = frames));
  }
  return py::dict(py::arg("dataset") = m.name, py::arg("palette") = palette,
                  py::arg("videos") = videos);
}

py::object maybe(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::list per_class(const PerClass& values) {
  py::list out;
  for (const auto& v : values) out.append(maybe(v));
  return out;
}

}  // namespace
}  // namespace maskflow

PYBIND11_MODULE(_maskflow, m) {
  using namespace maskflow;
  m.doc() = "Windowed-affinity mask propagation over per-frame feature maps.";
  m.attr("__version__") = kVersion;

  // Kept alive for the interpreter's lifetime; `category` holds the C++
  // error category name ("io", "format", ...).
  static py::handle error_type = py::exception<Error>(m, "MaskflowError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = error_type(e.what());
      instance.attr("category") = std::string(category_name(e.category()));
      PyErr_SetObject(error_type.ptr(), instance.ptr());
    }
  });

  // --- tensor store --------------------------------------------------------
  m.def("read_feature_map", [](const std::filesystem::path& p) { return from_feature_map(read_feature_map(p)); },
        py::arg("path"));
  m.def("write_feature_map",
        [](const std::filesystem::path& p, const FloatArray& a) { write_feature_map(p, to_feature_map(a)); },
        py::arg("path"), py::arg("features"));
  m.def("encode_feature_map", [](const FloatArray& a) { return to_bytes(encode_feature_map(to_feature_map(a))); },
        py::arg("features"));
  m.def("decode_feature_map",
        [](const py::bytes& b) { return from_feature_map(decode_feature_map(as_span(std::string_view(b)))); },
        py::arg("data"));

  m.def("read_mask",
        [](const std::filesystem::path& p) {
          const auto mask = read_mask(p);
          return py::make_tuple(from_mask(mask), mask.num_classes());
        },
        py::arg("path"), "Returns (labels, num_classes).");
  m.def("write_mask",
        [](const std::filesystem::path& p, const LabelArray& a, int num_classes) {
          write_mask(p, to_mask(a, num_classes));
        },
        py::arg("path"), py::arg("labels"), py::arg("num_classes"));
  m.def("encode_mask",
        [](const LabelArray& a, int num_classes) { return to_bytes(encode_mask(to_mask(a, num_classes))); },
        py::arg("labels"), py::arg("num_classes"));
  m.def("decode_mask",
        [](const py::bytes& b) {
          const auto mask = decode_mask(as_span(std::string_view(b)));
          return py::make_tuple(from_mask(mask), mask.num_classes());
        },
        py::arg("data"));

  m.def("load_manifest", [](const std::filesystem::path& p) { return manifest_to_dict(load_manifest(p)); },
        py::arg("path"), "Validated manifest as a dict; paths are resolved.");

  // --- tracking ------------------------------------------------------------
  py::class_<TrackerConfig>(m, "TrackerConfig")
      .def(py::init([](double tau, int window, int memory, const std::string& memory_mode,
                       bool anchor_first_frame, int threads) {
             TrackerConfig c;
             c.tau = tau;
             c.window = window;
             c.memory = memory;
             c.memory_mode = parse_mode(memory_mode);
             c.anchor_first_frame = anchor_first_frame;
             c.threads = threads;
             c.validate();
             return c;
           }),
           py::arg("tau") = 0.2, py::arg("window") = 50, py::arg("memory") = 10,
           py::arg("memory_mode") = "hard", py::arg("anchor_first_frame") = false,
           py::arg("threads") = 1)
      .def_readwrite("tau", &TrackerConfig::tau)
      .def_readwrite("window", &TrackerConfig::window)
      .def_readwrite("memory", &TrackerConfig::memory)
      .def_property(
          "memory_mode",
          [](const TrackerConfig& c) { return c.memory_mode == MemoryMode::kSoft ? "soft" : "hard"; },
          [](TrackerConfig& c, const std::string& mode) { c.memory_mode = parse_mode(mode); })
      .def_readwrite("anchor_first_frame", &TrackerConfig::anchor_first_frame)
      .def_readwrite("threads", &TrackerConfig::threads);

  py::class_<Tracker>(m, "Tracker")
      .def(py::init([](const TrackerConfig& config, const FloatArray& first_features,
                       const LabelArray& first_mask, int num_classes) {
             return Tracker(config, to_feature_map(first_features), to_mask(first_mask, num_classes));
           }),
           py::arg("config"), py::arg("first_features"), py::arg("first_mask"), py::arg("num_classes"))
      .def(
          "step",
          [](Tracker& t, const FloatArray& features) {
            const auto grid = to_feature_map(features);
            LabelMask labels;
            {
              py::gil_scoped_release release;
              labels = t.step(grid).labels;
            }
            return from_mask(labels);
          },
          py::arg("features"), "Tracks one frame; returns labels at first-mask resolution.")
      .def_property_readonly("frames_seen", &Tracker::frames_seen);

  m.def(
      "track_video",
      [](const std::vector<FloatArray>& features, const LabelArray& first_mask, int num_classes,
         const TrackerConfig& config) {
        std::vector<FeatureMap> grids;
        grids.reserve(features.size());
        for (const auto& f : features) grids.push_back(to_feature_map(f));
        const auto mask = to_mask(first_mask, num_classes);
        std::vector<LabelMask> out;
        {
          py::gil_scoped_release release;
          out = track_video(grids, mask, config);
        }
        py::list result;
        for (const auto& o : out) result.append(from_mask(o));
        return result;
      },
      py::arg("features"), py::arg("first_mask"), py::arg("num_classes"),
      py::arg("config") = TrackerConfig{}, "Masks of frames 2..N.");

  m.def("normalize_features",
        [](const FloatArray& a) { return from_feature_map(normalize_features(to_feature_map(a))); },
        py::arg("features"));

  // --- metrics -------------------------------------------------------------
  m.def(
      "score_frame",
      [](const LabelArray& pred, const LabelArray& gt, int num_classes, const std::string& f_variant,
         int boundary_tolerance) {
        MetricOptions options;
        if (f_variant == "boundary") {
          options.f_variant = FVariant::kBoundary;
        } else if (f_variant != "pixel") {
          fail(ErrorCategory::kConfig, "f_variant must be 'pixel' or 'boundary'");
        }
        options.boundary_tolerance = boundary_tolerance;
        const auto s = score_frame(to_mask(pred, num_classes), to_mask(gt, num_classes), num_classes, options);
        return py::dict(py::arg("jaccard") = per_class(s.jaccard), py::arg("f") = per_class(s.f),
                        py::arg("accuracy") = s.accuracy, py::arg("mean_jaccard") = maybe(s.mean_jaccard()),
                        py::arg("mean_f") = maybe(s.mean_f()));
      },
      py::arg("pred"), py::arg("gt"), py::arg("num_classes"), py::arg("f_variant") = "pixel",
      py::arg("boundary_tolerance") = 1);

  // --- synthetic data ------------------------------------------------------
  m.def(
      "gen_sequence",
      [](int height, int width, int channels, int num_classes, int frames, double noise, int motion_y,
         int motion_x, std::uint64_t seed, std::vector<int> corrupt_frames) {
        SynthConfig c;
        c.height = height;
        c.width = width;
        c.channels = channels;
        c.num_classes = num_classes;
        c.frames = frames;
        c.noise = noise;
        c.motion_y = motion_y;
        c.motion_x = motion_x;
        c.seed = seed;
        c.corrupt_frames = std::move(corrupt_frames);
        const auto seq = gen_sequence(c);
        py::list features, masks;
        for (const auto& f : seq.features) features.append(from_feature_map(f));
        for (const auto& mk : seq.masks) masks.append(from_mask(mk));
        return py::make_tuple(features, masks);
      },
      py::arg("height") = 64, py::arg("width") = 64, py::arg("channels") = 16, py::arg("num_classes") = 4,
      py::arg("frames") = 20, py::arg("noise") = 0.0, py::arg("motion_y") = 1, py::arg("motion_x") = 1,
      py::arg("seed") = 0, py::arg("corrupt_frames") = std::vector<int>{},
      "Returns (features, masks), one entry per frame.");
}
