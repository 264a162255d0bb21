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

#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "maskflow/error.hpp"
#include "maskflow/feature_analysis.hpp"
#include "maskflow/parallel.hpp"
#include "maskflow/synth.hpp"
#include "maskflow/version.hpp"

namespace maskflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCategory::kInternal, "sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string file_digest(const fs::path& path) {
  return "sha256:" + sha256_hex(read_file_bytes(path));
}

std::string fixed(const std::optional<double>& v, int digits = 6) {
  if (!v) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, *v);
  return buf;
}

// One line of <dir>/runs.jsonl per successful command.
struct RunRecord {
  std::string command;
  json config = json::object();
  std::optional<std::string> manifest_digest;
  std::vector<double> frame_seconds;
  std::vector<std::string> outputs;

  void append_to(const fs::path& dir) const {
    const json line = {{"command", command},
                       {"config", config},
                       {"manifest_digest", manifest_digest ? json(*manifest_digest) : json(nullptr)},
                       {"frame_seconds", frame_seconds},
                       {"outputs", outputs},
                       {"version", kVersion}};
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream out(dir / "runs.jsonl", std::ios::app);
    if (!out) fail(ErrorCategory::kIo, "cannot append to " + (dir / "runs.jsonl").string());
    out << line.dump() << "\n";
  }
};

int resolve_threads(int flag) {
  const char* env = std::getenv("MASKFLOW_THREADS");
  if (env == nullptr || *env == '\0') return flag;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 4096) {
    fail(ErrorCategory::kConfig, std::string("MASKFLOW_THREADS must be a positive integer, got '") + env + "'");
  }
  return static_cast<int>(v);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCategory::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

json tracker_json(const TrackerConfig& c) {
  return {{"tau", c.tau},
          {"window", c.window},
          {"memory", c.memory},
          {"memory_mode", c.memory_mode == MemoryMode::kSoft ? "soft" : "hard"},
          {"anchor_first", c.anchor_first_frame},
          {"threads", c.threads}};
}

// Flags shared by track and ablate.
struct TrackFlags {
  TrackerConfig config;
  std::string memory_mode = "hard";
  std::string manifest;
  std::string video;
  int threads = 1;

  void add_to(CLI::App* app) {
    app->add_option("--manifest", manifest, "Dataset manifest (JSON)")->required();
    app->add_option("--video", video, "Video id (default: every video in the manifest)");
    app->add_option("--tau", config.tau, "Softmax temperature")->capture_default_str();
    app->add_option("--window", config.window, "Window edge n in feature-grid pixels; radius n/2")
        ->capture_default_str();
    app->add_option("--memory", config.memory, "Memory queue capacity")->capture_default_str();
    app->add_option("--memory-mode", memory_mode, "How predictions enter the memory")
        ->check(CLI::IsMember({"hard", "soft"}))
        ->capture_default_str();
    app->add_flag("--anchor-first", config.anchor_first_frame,
                  "Keep the first frame in memory for the whole video");
    app->add_option("--threads", threads, "Worker threads (MASKFLOW_THREADS overrides)")
        ->capture_default_str();
  }

  void resolve() {
    config.memory_mode = memory_mode == "soft" ? MemoryMode::kSoft : MemoryMode::kHardOneHot;
    config.threads = resolve_threads(threads);
    config.validate();
  }
};

std::vector<const VideoEntry*> select_videos(const DatasetManifest& manifest, const std::string& id) {
  std::vector<const VideoEntry*> out;
  if (!id.empty()) {
    out.push_back(&manifest.video(id));
    return out;
  }
  for (const auto& v : manifest.videos) out.push_back(&v);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return out;
}

LabelMask first_mask_of(const VideoEntry& video) {
  if (video.frames.empty()) fail(ErrorCategory::kFormat, "video '" + video.id + "' has no frames");
  if (!video.frames.front().mask) {
    fail(ErrorCategory::kFormat, "video '" + video.id + "' has no mask for its first frame; pass --first-mask");
  }
  return read_mask(*video.frames.front().mask);
}

// Tracks every selected video; one video per worker when there are several.
std::vector<TrackedVideo> track_all(const std::vector<const VideoEntry*>& videos,
                                    const std::optional<LabelMask>& first_mask,
                                    const TrackerConfig& config) {
  std::vector<TrackedVideo> results(videos.size());
  TrackerConfig per_video = config;
  if (videos.size() > 1) per_video.threads = 1;
  const int outer = videos.size() > 1 ? config.threads : 1;
  parallel_for(videos.size(), outer, [&](std::size_t, std::size_t i) {
    const LabelMask mask = first_mask ? *first_mask : first_mask_of(*videos[i]);
    results[i] = track_manifest_video(*videos[i], mask, per_video);
  });
  return results;
}

MetricOptions metric_options(const std::string& variant, int tolerance) {
  MetricOptions o;
  o.f_variant = variant == "boundary" ? FVariant::kBoundary : FVariant::kPixel;
  o.boundary_tolerance = tolerance;
  if (tolerance < 0) fail(ErrorCategory::kConfig, "--boundary-tol must be >= 0");
  return o;
}

std::string summary_line(const EvalReport& r) {
  return "J_m=" + fixed(r.dataset.jaccard, 5) + " F_m=" + fixed(r.dataset.f, 5) +
         " P_acc=" + fixed(r.dataset.accuracy, 5);
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) fail(ErrorCategory::kIo, "cannot create " + path.parent_path().string() + ": " + ec.message());
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---- track ---------------------------------------------------------------

struct TrackCommand {
  TrackFlags flags;
  std::string first_mask;
  std::string out;

  void add_to(CLI::App* app) {
    flags.add_to(app);
    app->add_option("--first-mask", first_mask,
                    "Mask of the first frame (default: the manifest's first-frame mask)");
    app->add_option("--out", out, "Output directory")->required();
  }

  int run(std::ostream& os) {
    flags.resolve();
    const DatasetManifest manifest = load_manifest(flags.manifest);
    const auto videos = select_videos(manifest, flags.video);
    if (videos.empty()) fail(ErrorCategory::kFormat, "manifest lists no videos");
    std::optional<LabelMask> given;
    if (!first_mask.empty()) {
      if (videos.size() != 1) fail(ErrorCategory::kConfig, "--first-mask needs --video when the manifest has several videos");
      given = read_mask(first_mask);
    }
    const auto results = track_all(videos, given, flags.config);

    RunRecord record;
    record.command = "track";
    record.config = tracker_json(flags.config);
    record.config["manifest"] = flags.manifest;
    record.config["video"] = flags.video.empty() ? json(nullptr) : json(flags.video);
    record.config["first_mask"] = first_mask.empty() ? json(nullptr) : json(first_mask);
    record.manifest_digest = file_digest(flags.manifest);
    std::size_t written = 0;
    for (std::size_t v = 0; v < videos.size(); ++v) {
      const fs::path dir = videos.size() == 1 ? fs::path(out) : fs::path(out) / videos[v]->id;
      ensure_dir(dir);
      const auto& r = results[v];
      for (std::size_t i = 0; i < r.masks.size(); ++i) {
        const fs::path p = dir / r.frame_names[i];
        write_mask(p, r.masks[i]);
        record.outputs.push_back(p.string());
        ++written;
      }
      record.frame_seconds.insert(record.frame_seconds.end(), r.seconds.begin(), r.seconds.end());
    }
    record.append_to(out);
    os << "tracked " << videos.size() << " video(s), wrote " << written << " mask(s) to " << out << "\n";
    return kExitOk;
  }
};

// ---- eval ----------------------------------------------------------------

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) fail(ErrorCategory::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<fs::path> list_subdirs(const fs::path& dir) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

// Pairs prediction files with ground truth by file name. The ground truth may
// hold one extra leading file, the given first frame.
VideoScores score_directory(const std::string& id, const fs::path& pred_dir, const fs::path& gt_dir,
                            const MetricOptions& options) {
  const auto pred = list_files(pred_dir, ".lmsk");
  const auto gt = list_files(gt_dir, ".lmsk");
  std::map<std::string, std::size_t> gt_pos;
  for (std::size_t i = 0; i < gt.size(); ++i) gt_pos[gt[i].filename().string()] = i;

  bool counts_ok = pred.size() == gt.size() || pred.size() + 1 == gt.size();
  for (const auto& p : pred) counts_ok = counts_ok && gt_pos.count(p.filename().string()) > 0;
  if (counts_ok && pred.size() + 1 == gt.size()) {
    counts_ok = std::none_of(pred.begin(), pred.end(),
                             [&](const fs::path& p) { return p.filename() == gt.front().filename(); });
  }
  if (!counts_ok || pred.empty()) {
    fail(ErrorCategory::kDimension, "frame-count mismatch in video '" + id + "': " +
                                        std::to_string(pred.size()) + " predicted vs " +
                                        std::to_string(gt.size()) + " ground-truth masks (" +
                                        pred_dir.string() + " vs " + gt_dir.string() + ")");
  }

  VideoScores scores;
  scores.id = id;
  for (const auto& p : pred) {
    const std::size_t index = gt_pos.at(p.filename().string());
    const LabelMask pm = read_mask(p);
    const LabelMask gm = read_mask(gt[index]);
    const int k = std::max(pm.num_classes(), gm.num_classes());
    FrameScore s = score_frame(pm, gm, k, options);
    s.name = p.filename().string();
    s.frame_index = static_cast<int>(index);
    scores.frames.push_back(std::move(s));
  }
  return scores;
}

struct EvalCommand {
  std::string pred;
  std::string gt;
  std::string variant = "pixel";
  int tolerance = 1;
  std::string report;
  std::string csv;

  void add_to(CLI::App* app) {
    app->add_option("--pred", pred, "Directory of predicted masks")->required();
    app->add_option("--gt", gt, "Directory of ground-truth masks")->required();
    app->add_option("--f-variant", variant, "F-measure flavour")
        ->check(CLI::IsMember({"pixel", "boundary"}))
        ->capture_default_str();
    app->add_option("--boundary-tol", tolerance, "Boundary match tolerance in pixels")
        ->capture_default_str();
    app->add_option("--report", report, "Write the JSON report here");
    app->add_option("--csv", csv, "Write per-frame scores as CSV here");
  }

  int run(std::ostream& os, std::ostream& es) {
    const MetricOptions options = metric_options(variant, tolerance);
    const fs::path pred_dir(pred);
    const fs::path gt_dir(gt);
    std::vector<VideoScores> videos;
    if (!list_files(pred_dir, ".lmsk").empty()) {
      videos.push_back(score_directory(pred_dir.filename().string(), pred_dir, gt_dir, options));
    } else {
      for (const auto& sub : list_subdirs(pred_dir)) {
        const std::string id = sub.filename().string();
        if (!fs::is_directory(gt_dir / id)) {
          fail(ErrorCategory::kDimension, "video '" + id + "' has no ground-truth directory");
        }
        videos.push_back(score_directory(id, sub, gt_dir / id, options));
      }
      if (videos.empty()) fail(ErrorCategory::kDimension, "no predicted masks under " + pred);
    }
    const EvalReport result = aggregate(videos);
    for (const auto& w : result.warnings) es << "warning: " << w << "\n";

    RunRecord record;
    record.command = "eval";
    record.config = {{"pred", pred},
                     {"gt", gt},
                     {"f_variant", variant},
                     {"boundary_tol", tolerance}};
    if (!report.empty()) {
      write_text(report, report_to_json(result).dump(2) + "\n");
      record.outputs.push_back(report);
    }
    if (!csv.empty()) {
      write_text(csv, report_to_csv(result));
      record.outputs.push_back(csv);
    }
    const fs::path record_dir = report.empty() ? pred_dir : fs::absolute(report).parent_path();
    record.append_to(record_dir);
    os << summary_line(result) << "\n";
    return kExitOk;
  }
};

// ---- viz-pca -------------------------------------------------------------

struct VizCommand {
  std::string features;
  std::string out;

  void add_to(CLI::App* app) {
    app->add_option("--features", features, "A feature file or a directory of them")->required();
    app->add_option("--out", out, "Output directory for PPM images")->required();
  }

  int run(std::ostream& os) {
    std::vector<fs::path> files;
    if (fs::is_directory(features)) {
      files = list_files(features, ".fmap");
    } else if (fs::exists(features)) {
      files.push_back(features);
    } else {
      fail(ErrorCategory::kIo, "no such file or directory: " + features);
    }
    if (files.empty()) fail(ErrorCategory::kIo, "no .fmap files in " + features);
    std::vector<FeatureMap> grids;
    grids.reserve(files.size());
    for (const auto& f : files) grids.push_back(read_feature_map(f));

    // One basis for all frames keeps colours comparable across the video.
    const PcaBasis basis = fit_pca(grids, std::min(3, grids.front().channels()));
    ensure_dir(out);
    RunRecord record;
    record.command = "viz-pca";
    record.config = {{"features", features}, {"explained_variance", basis.explained_variance}};
    for (std::size_t i = 0; i < grids.size(); ++i) {
      const auto t0 = Clock::now();
      RgbImage image;
      if (basis.components() >= 3) {
        image = render_pca_rgb(grids[i], basis);
      } else {
        image.height = grids[i].height();
        image.width = grids[i].width();
        image.values.assign(grids[i].pixel_count() * 3, 0.0f);
      }
      const fs::path p = fs::path(out) / (files[i].stem().string() + ".ppm");
      write_ppm(p, image);
      record.frame_seconds.push_back(seconds_since(t0));
      record.outputs.push_back(p.string());
    }
    record.append_to(out);
    os << "wrote " << grids.size() << " image(s) to " << out << "\n";
    return kExitOk;
  }
};

// ---- synth ---------------------------------------------------------------

struct SynthCommand {
  SynthConfig config;
  std::vector<int> motion{1, 1};
  std::string out;

  void add_to(CLI::App* app) {
    // --h is a grid extent here, so help is long-form only.
    app->set_help_flag("--help", "Print this help message and exit");
    app->add_option("--h", config.height, "Grid height")->capture_default_str();
    app->add_option("--w", config.width, "Grid width")->capture_default_str();
    app->add_option("--c", config.channels, "Feature channels")->capture_default_str();
    app->add_option("--classes", config.num_classes, "Classes including background")
        ->capture_default_str();
    app->add_option("--frames", config.frames, "Number of frames")->capture_default_str();
    app->add_option("--noise", config.noise, "Feature noise standard deviation")
        ->capture_default_str();
    app->add_option("--motion", motion, "Per-frame shift as dy,dx")
        ->expected(2)
        ->delimiter(',')
        ->capture_default_str();
    app->add_option("--seed", config.seed, "Noise seed")->capture_default_str();
    app->add_option("--corrupt-frames", config.corrupt_frames,
                    "Frames whose features are replaced by noise")
        ->delimiter(',');
    app->add_option("--out", out, "Output directory")->required();
  }

  int run(std::ostream& os) {
    config.motion_y = motion.at(0);
    config.motion_x = motion.at(1);
    config.validate();
    const auto t0 = Clock::now();
    const SynthSequence seq = gen_sequence(config);
    const fs::path manifest = write_synth_dataset(out, config, seq);
    RunRecord record;
    record.command = "synth";
    record.config = synth_config_to_json(config);
    record.manifest_digest = file_digest(manifest);
    record.frame_seconds.push_back(seconds_since(t0));
    record.outputs = {manifest.string(), (fs::path(out) / "synth.json").string()};
    record.append_to(out);
    os << manifest.string() << "\n";
    return kExitOk;
  }
};

// ---- ablate --------------------------------------------------------------

struct AblateCommand {
  TrackFlags flags;
  std::string param;
  std::string values;
  std::string out;
  std::string variant = "pixel";
  int tolerance = 1;

  void add_to(CLI::App* app) {
    flags.add_to(app);
    app->add_option("--param", param, "Swept parameter: tau, window or memory")->required();
    app->add_option("--values", values, "Comma-separated values")->required();
    app->add_option("--out", out, "Output directory for ablation.csv")->required();
    app->add_option("--f-variant", variant, "F-measure flavour")
        ->check(CLI::IsMember({"pixel", "boundary"}))
        ->capture_default_str();
    app->add_option("--boundary-tol", tolerance, "Boundary match tolerance in pixels")
        ->capture_default_str();
  }

  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (!item.empty()) parts.push_back(item);
    }
    return parts;
  }

  TrackerConfig config_for(const std::string& token) const {
    TrackerConfig c = flags.config;
    try {
      std::size_t used = 0;
      if (param == "tau") {
        c.tau = std::stod(token, &used);
      } else if (param == "window") {
        c.window = std::stoi(token, &used);
      } else {
        c.memory = std::stoi(token, &used);
      }
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::logic_error&) {
      fail(ErrorCategory::kConfig, "bad value '" + token + "' for --param " + param);
    }
    c.validate();
    return c;
  }

  int run(std::ostream& os) {
    if (param != "tau" && param != "window" && param != "memory") {
      fail(ErrorCategory::kConfig, "unknown parameter '" + param +
                                       "' (expected tau, window or memory; timestep and decoder "
                                       "level sweeps need re-extracted features)");
    }
    const auto tokens = split(values);
    if (tokens.empty()) fail(ErrorCategory::kConfig, "--values is empty");
    flags.resolve();
    const MetricOptions options = metric_options(variant, tolerance);
    std::vector<TrackerConfig> configs;
    for (const auto& t : tokens) configs.push_back(config_for(t));

    const DatasetManifest manifest = load_manifest(flags.manifest);
    const auto videos = select_videos(manifest, flags.video);
    if (videos.empty()) fail(ErrorCategory::kFormat, "manifest lists no videos");

    RunRecord record;
    record.command = "ablate";
    record.config = tracker_json(flags.config);
    record.config["param"] = param;
    record.config["values"] = tokens;
    record.config["manifest"] = flags.manifest;
    record.config["f_variant"] = variant;
    record.config["boundary_tol"] = tolerance;
    record.manifest_digest = file_digest(flags.manifest);

    std::string table = "value,J_m,F_m,P_acc\n";
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const auto tracked = track_all(videos, std::nullopt, configs[i]);
      std::vector<VideoScores> scores;
      for (std::size_t v = 0; v < videos.size(); ++v) {
        record.frame_seconds.insert(record.frame_seconds.end(), tracked[v].seconds.begin(),
                                    tracked[v].seconds.end());
        scores.push_back(score_manifest_video(*videos[v], tracked[v].masks, options));
      }
      const EvalReport r = aggregate(scores);
      table += tokens[i] + "," + fixed(r.dataset.jaccard) + "," + fixed(r.dataset.f) + "," +
               fixed(r.dataset.accuracy) + "\n";
    }
    ensure_dir(out);
    const fs::path csv = fs::path(out) / "ablation.csv";
    write_text(csv, table);
    record.outputs.push_back(csv.string());
    record.append_to(out);
    os << table;
    return kExitOk;
  }
};

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kConfig:
      return kExitUsage;
    case ErrorCategory::kIo:
    case ErrorCategory::kFormat:
    case ErrorCategory::kDimension:
      return kExitData;
    case ErrorCategory::kInternal:
      break;
  }
  return kExitInternal;
}

void report_error(std::ostream& err, const std::string& category, const std::string& message) {
  err << json{{"error", {{"category", category}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

TrackedVideo track_manifest_video(const VideoEntry& video, const LabelMask& first_mask,
                                  const TrackerConfig& config) {
  if (video.frames.empty()) fail(ErrorCategory::kFormat, "video '" + video.id + "' has no frames");
  TrackedVideo out;
  Tracker tracker(config, read_feature_map(video.frames.front().features), first_mask);
  for (std::size_t i = 1; i < video.frames.size(); ++i) {
    const auto& frame = video.frames[i];
    const auto t0 = Clock::now();
    auto step = tracker.step(read_feature_map(frame.features));
    out.seconds.push_back(seconds_since(t0));
    // Name predictions after the ground truth when there is one so that
    // eval can pair them by file name.
    out.frame_names.push_back(frame.mask ? frame.mask->filename()
                                         : frame.features.stem().concat(".lmsk"));
    out.masks.push_back(std::move(step.labels));
  }
  return out;
}

VideoScores score_manifest_video(const VideoEntry& video, const std::vector<LabelMask>& predictions,
                                 const MetricOptions& options) {
  if (predictions.size() + 1 != video.frames.size()) {
    fail(ErrorCategory::kDimension, "video '" + video.id + "': " + std::to_string(predictions.size()) +
                                        " predictions for " + std::to_string(video.frames.size()) +
                                        " frames");
  }
  VideoScores scores;
  scores.id = video.id;
  for (std::size_t i = 1; i < video.frames.size(); ++i) {
    const auto& frame = video.frames[i];
    if (!frame.mask) continue;
    const LabelMask gt = read_mask(*frame.mask);
    const LabelMask& pred = predictions[i - 1];
    FrameScore s = score_frame(pred, gt, std::max(gt.num_classes(), pred.num_classes()), options);
    s.name = frame.mask->filename().string();
    s.frame_index = static_cast<int>(i);
    scores.frames.push_back(std::move(s));
  }
  return scores;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"maskflow: training-free mask tracking over dense per-frame features"};
  app.name(args.empty() ? "maskflow" : fs::path(args.front()).filename().string());
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrackCommand track;
  EvalCommand eval;
  VizCommand viz;
  SynthCommand synth;
  AblateCommand ablate;
  auto* track_app = app.add_subcommand("track", "Propagate the first-frame mask through a video");
  auto* eval_app = app.add_subcommand("eval", "Score predicted masks against ground truth");
  auto* viz_app = app.add_subcommand("viz-pca", "Render the top three principal components as RGB");
  auto* synth_app = app.add_subcommand("synth", "Write a synthetic dataset with exact ground truth");
  auto* ablate_app = app.add_subcommand(
      "ablate",
      "Sweep tau, window or memory and tabulate scores. Timestep and decoder level are fixed at "
      "extraction time; sweep them by re-extracting features.");
  track.add_to(track_app);
  eval.add_to(eval_app);
  viz.add_to(viz_app);
  synth.add_to(synth_app);
  ablate.add_to(ablate_app);

  std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"maskflow"} : args;
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help arrives as CallForHelp from the subcommand.
    report_error(err, "config", e.what());
    return kExitUsage;
  }

  try {
    if (track_app->parsed()) return track.run(out);
    if (eval_app->parsed()) return eval.run(out, err);
    if (viz_app->parsed()) return viz.run(out);
    if (synth_app->parsed()) return synth.run(out);
    if (ablate_app->parsed()) return ablate.run(out);
  } catch (const Error& e) {
    report_error(err, std::string(category_name(e.category())), e.what());
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    report_error(err, "io", e.what());
    return kExitData;
  } catch (const std::bad_alloc&) {
    report_error(err, "internal", "out of memory");
    return kExitInternal;
  } catch (const std::exception& e) {
    report_error(err, "internal", e.what());
    return kExitInternal;
  }
  report_error(err, "internal", "no command ran");
  return kExitInternal;
}

}  // namespace maskflow::cli
