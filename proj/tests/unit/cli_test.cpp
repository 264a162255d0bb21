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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "maskflow/feature_analysis.hpp"
#include "maskflow/tensor_store.hpp"
#include "test_support.hpp"

namespace maskflow {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::fixture;
using testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

// Runs the CLI in process; `args` excludes the program name.
Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "maskflow");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> records(const fs::path& dir) {
  std::vector<json> out;
  std::ifstream in(dir / "runs.jsonl");
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

std::string error_category(const std::string& err) {
  return json::parse(err)["error"]["category"].get<std::string>();
}

// Writes a small synthetic dataset and returns its manifest path.
fs::path synth(const TempDir& tmp, const std::string& name, std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"synth", "--h", "24", "--w", "24", "--c", "8", "--classes",
                                   "3", "--frames", "6", "--out", (tmp / name).string()};
  args.insert(args.end(), extra.begin(), extra.end());
  const auto r = run(args);
  EXPECT_EQ(r.code, 0) << r.err;
  return tmp / name / "manifest.json";
}

TEST(Cli, HelpAndVersion) {
  auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("track"), std::string::npos);
  EXPECT_NE(r.out.find("ablate"), std::string::npos);
  r = run({"synth", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--h"), std::string::npos);
  r = run({"ablate", "--help"});
  EXPECT_NE(r.out.find("re-extract"), std::string::npos);
  r = run({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_FALSE(r.out.empty());
}

TEST(Cli, UsageErrors) {
  auto r = run({});
  EXPECT_EQ(r.code, cli::kExitUsage);
  r = run({"frobnicate"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  r = run({"track", "--manifest", "x.json"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_EQ(error_category(r.err), "config");
}

TEST(Cli, TrackSynthMatchesGroundTruth) {
  TempDir tmp;
  const auto manifest = synth(tmp, "d");
  auto r = run({"track", "--manifest", manifest.string(), "--out", (tmp / "pred").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int f = 1; f < 6; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.lmsk", f);
    EXPECT_EQ(read_mask(tmp / "pred" / name), read_mask(tmp / "d" / "masks" / name));
  }
  EXPECT_FALSE(fs::exists(tmp / "pred" / "frame_00000.lmsk"));

  const auto recs = records(tmp / "pred");
  ASSERT_EQ(recs.size(), 1u);
  const auto& rec = recs[0];
  EXPECT_EQ(rec["command"], "track");
  EXPECT_EQ(rec["config"]["tau"], 0.2);
  EXPECT_EQ(rec["config"]["window"], 50);
  EXPECT_EQ(rec["config"]["memory"], 10);
  EXPECT_EQ(rec["config"]["memory_mode"], "hard");
  EXPECT_EQ(rec["frame_seconds"].size(), 5u);
  EXPECT_EQ(rec["outputs"].size(), 5u);
  EXPECT_EQ(rec["manifest_digest"].get<std::string>().rfind("sha256:", 0), 0u);
  EXPECT_EQ(rec["manifest_digest"].get<std::string>().size(), 7u + 64u);

  r = run({"eval", "--pred", (tmp / "pred").string(), "--gt", (tmp / "d" / "masks").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "J_m=1.00000 F_m=1.00000 P_acc=1.00000\n");
}

TEST(Cli, TrackIsReproducibleAndAppends) {
  TempDir tmp;
  const auto manifest = synth(tmp, "d", {"--noise", "0.3", "--seed", "5"});
  for (const char* dir : {"a", "b"}) {
    const auto r = run({"track", "--manifest", manifest.string(), "--out", (tmp / dir).string(),
                        "--memory", "3", "--memory-mode", "soft", "--anchor-first"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const auto& e : fs::directory_iterator(tmp / "a")) {
    if (e.path().extension() != ".lmsk") continue;
    EXPECT_EQ(read_file_bytes(e.path()), read_file_bytes(tmp / "b" / e.path().filename()));
  }
  run({"track", "--manifest", manifest.string(), "--out", (tmp / "a").string()});
  EXPECT_EQ(records(tmp / "a").size(), 2u);
}

TEST(Cli, TrackErrors) {
  TempDir tmp;
  const auto manifest = synth(tmp, "d");
  auto r = run({"track", "--manifest", manifest.string(), "--out", (tmp / "p").string(), "--tau",
                "0"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_EQ(error_category(r.err), "config");
  EXPECT_FALSE(fs::exists(tmp / "p"));

  r = run({"track", "--manifest", (tmp / "missing.json").string(), "--out", (tmp / "p").string()});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_EQ(error_category(r.err), "io");

  // A first mask at a resolution smaller than the feature grid.
  write_mask(tmp / "small.lmsk", LabelMask(4, 4, 3));
  r = run({"track", "--manifest", manifest.string(), "--first-mask", (tmp / "small.lmsk").string(),
           "--out", (tmp / "p").string()});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_EQ(error_category(r.err), "dimension");

  r = run({"track", "--manifest", manifest.string(), "--video", "nope", "--out",
           (tmp / "p").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
}

TEST(Cli, TrackMemoryOneAndThreadsEnv) {
  TempDir tmp;
  const auto manifest = synth(tmp, "d");
  ASSERT_EQ(::setenv("MASKFLOW_THREADS", "3", 1), 0);
  auto r = run({"track", "--manifest", manifest.string(), "--memory", "1", "--out",
                (tmp / "a").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(records(tmp / "a")[0]["config"]["threads"], 3);
  ASSERT_EQ(::setenv("MASKFLOW_THREADS", "zero", 1), 0);
  r = run({"track", "--manifest", manifest.string(), "--out", (tmp / "b").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  ::unsetenv("MASKFLOW_THREADS");
  r = run({"track", "--manifest", manifest.string(), "--memory", "1", "--out",
           (tmp / "c").string()});
  ASSERT_EQ(r.code, 0);
  for (const auto& e : fs::directory_iterator(tmp / "a")) {
    if (e.path().extension() != ".lmsk") continue;
    EXPECT_EQ(read_file_bytes(e.path()), read_file_bytes(tmp / "c" / e.path().filename()));
  }
}

TEST(Cli, TrackMinimalManifestWithoutLaterMasks) {
  TempDir tmp;
  const auto r = run({"track", "--manifest", fixture("dataset_min/manifest.json").string(), "--out",
                      (tmp / "p").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(tmp / "p" / "f1.lmsk"));
  EXPECT_TRUE(fs::exists(tmp / "p" / "f2.lmsk"));
  // Identical frames: the first mask carries over.
  EXPECT_EQ(read_mask(tmp / "p" / "f2.lmsk").labels()[1], 1);
}

TEST(Cli, EvalHandFixture) {
  TempDir tmp;
  const auto report = tmp / "r" / "report.json";
  const auto r = run({"eval", "--pred", fixture("eval_2x2/pred").string(), "--gt",
                      fixture("eval_2x2/gt").string(), "--report", report.string(), "--csv",
                      (tmp / "r" / "frames.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "J_m=0.58333 F_m=0.73333 P_acc=0.75000\n");
  const auto doc = json::parse(read_file_bytes(report));
  EXPECT_NEAR(doc["dataset"]["J_m"].get<double>(), 7.0 / 12.0, 1e-12);
  EXPECT_EQ(doc["dataset"]["P_acc"].get<double>(), 0.75);
  EXPECT_EQ(doc["dataset"]["frames"], 1);
  EXPECT_EQ(doc["videos"][0]["frames"][0]["index"], 1);
  EXPECT_TRUE(fs::exists(tmp / "r" / "frames.csv"));
  ASSERT_EQ(records(tmp / "r").size(), 1u);
  EXPECT_TRUE(records(tmp / "r")[0]["manifest_digest"].is_null());
}

TEST(Cli, EvalBoundaryVariant) {
  TempDir tmp;
  const auto pred = fixture("boundary_8x8/pred").string();
  const auto gt = fixture("boundary_8x8/gt").string();
  auto rep = [&](const char* tol) {
    return run({"eval", "--pred", pred, "--gt", gt, "--f-variant", "boundary", "--boundary-tol",
                tol, "--report", (tmp / "r.json").string()});
  };
  auto r = rep("1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("F_m=1.00000"), std::string::npos);
  r = rep("0");
  EXPECT_NE(r.out.find("F_m=0.00000"), std::string::npos);
  r = rep("-1");
  EXPECT_EQ(r.code, cli::kExitUsage);

  // Identical masks under the boundary variant.
  r = run({"eval", "--pred", gt, "--gt", gt, "--f-variant", "boundary", "--report",
           (tmp / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "J_m=1.00000 F_m=1.00000 P_acc=1.00000\n");
}

TEST(Cli, EvalFrameCountMismatch) {
  TempDir tmp;
  fs::create_directories(tmp / "pred");
  write_mask(tmp / "pred" / "frame_00001.lmsk", LabelMask(2, 2, 2));
  write_mask(tmp / "pred" / "frame_00007.lmsk", LabelMask(2, 2, 2));
  const auto r = run({"eval", "--pred", (tmp / "pred").string(), "--gt",
                      fixture("eval_2x2/gt").string()});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_EQ(error_category(r.err), "dimension");
  EXPECT_NE(r.err.find("frame-count mismatch"), std::string::npos);
  EXPECT_FALSE(fs::exists(tmp / "pred" / "runs.jsonl"));
}

TEST(Cli, EvalPerVideoSubdirectories) {
  TempDir tmp;
  const auto m1 = synth(tmp, "d1");
  const auto m2 = synth(tmp, "d2", {"--motion", "0,1"});
  for (const char* id : {"d1", "d2"}) {
    const auto r = run({"track", "--manifest", (tmp / id / "manifest.json").string(), "--out",
                        (tmp / "pred" / id).string()});
    ASSERT_EQ(r.code, 0) << r.err;
    fs::create_directories(tmp / "gt");
    fs::copy(tmp / id / "masks", tmp / "gt" / id);
  }
  const auto r = run({"eval", "--pred", (tmp / "pred").string(), "--gt", (tmp / "gt").string(),
                      "--report", (tmp / "report.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(read_file_bytes(tmp / "report.json"));
  EXPECT_EQ(doc["videos"].size(), 2u);
  EXPECT_EQ(doc["dataset"]["frames"], 10);
}

TEST(Cli, AblateMemoryRows) {
  TempDir tmp;
  const auto manifest = synth(tmp, "d");
  const auto r = run({"ablate", "--param", "memory", "--values", "1,5,10,20", "--manifest",
                      manifest.string(), "--out", (tmp / "ab").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_file_bytes(tmp / "ab" / "ablation.csv");
  const std::string text(csv.begin(), csv.end());
  EXPECT_EQ(text, r.out);
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "value,J_m,F_m,P_acc");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_NE(line.find(",1.000000,1.000000,1.000000"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(records(tmp / "ab")[0]["command"], "ablate");
}

double ablation_j(const std::string& table, int row) {
  std::istringstream lines(table);
  std::string line;
  for (int i = 0; i <= row; ++i) std::getline(lines, line);
  std::getline(lines, line);
  const auto a = line.find(',');
  return std::stod(line.substr(a + 1, line.find(',', a + 1) - a - 1));
}

TEST(Cli, AblateWindowZeroLosesMotion) {
  TempDir tmp;
  const auto manifest = synth(tmp, "d", {"--motion", "2,2"});
  const auto r = run({"ablate", "--param", "window", "--values", "0,50", "--manifest",
                      manifest.string(), "--out", (tmp / "ab").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(ablation_j(r.out, 0), ablation_j(r.out, 1));
}

TEST(Cli, AblateErrors) {
  TempDir tmp;
  const auto manifest = synth(tmp, "d");
  auto r = run({"ablate", "--param", "timestep", "--values", "1", "--manifest", manifest.string(),
                "--out", (tmp / "ab").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  r = run({"ablate", "--param", "tau", "--values", " , ", "--manifest", manifest.string(), "--out",
           (tmp / "ab").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  r = run({"ablate", "--param", "tau", "--values", "0.1,abc", "--manifest", manifest.string(),
           "--out", (tmp / "ab").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  r = run({"ablate", "--param", "tau", "--values", "0.1,-1", "--manifest", manifest.string(),
           "--out", (tmp / "ab").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
}

TEST(Cli, VizConstantIsBlack) {
  TempDir tmp;
  FeatureMap g(3, 5, 4);
  std::fill(g.values().begin(), g.values().end(), 2.0f);
  write_feature_map(tmp / "c.fmap", g);
  const auto r = run({"viz-pca", "--features", (tmp / "c.fmap").string(), "--out",
                      (tmp / "img").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ppm = read_file_bytes(tmp / "img" / "c.ppm");
  const std::string header = "P6\n5 3\n255\n";
  ASSERT_EQ(ppm.size(), header.size() + 45);
  for (std::size_t i = header.size(); i < ppm.size(); ++i) EXPECT_EQ(ppm[i], 0);
}

TEST(Cli, VizDirectoryIsReproducible) {
  TempDir tmp;
  synth(tmp, "d", {"--noise", "0.2"});
  for (const char* out : {"a", "b"}) {
    const auto r = run({"viz-pca", "--features", (tmp / "d" / "features").string(), "--out",
                        (tmp / out).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  int images = 0;
  for (const auto& e : fs::directory_iterator(tmp / "a")) {
    if (e.path().extension() != ".ppm") continue;
    ++images;
    EXPECT_EQ(read_file_bytes(e.path()), read_file_bytes(tmp / "b" / e.path().filename()));
  }
  EXPECT_EQ(images, 6);
  const auto r = run({"viz-pca", "--features", fixture("bad_magic.fmap").string(), "--out",
                      (tmp / "x").string()});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_EQ(error_category(r.err), "format");
}

TEST(Cli, SynthIsReproducible) {
  TempDir tmp;
  synth(tmp, "a", {"--noise", "0.1", "--seed", "9", "--corrupt-frames", "2"});
  synth(tmp, "b", {"--noise", "0.1", "--seed", "9", "--corrupt-frames", "2"});
  for (const auto& e : fs::recursive_directory_iterator(tmp / "a")) {
    if (!e.is_regular_file() || e.path().filename() == "runs.jsonl") continue;
    const auto rel = fs::relative(e.path(), tmp / "a");
    EXPECT_EQ(read_file_bytes(e.path()), read_file_bytes(tmp / "b" / rel)) << rel;
  }
  const auto sidecar = json::parse(read_file_bytes(tmp / "a" / "synth.json"));
  EXPECT_EQ(sidecar["corrupt_frames"], json::array({2}));
  const auto r = run({"synth", "--classes", "40", "--out", (tmp / "bad").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_EQ(run({"synth", "--motion", "1", "--out", (tmp / "bad").string()}).code,
            cli::kExitUsage);
}

// The real binary, for exit codes and stderr as seen by a shell.
int shell(const std::string& args, std::string* err_out = nullptr) {
  TempDir tmp;
  const std::string cmd =
      std::string(MASKFLOW_CLI_PATH) + " " + args + " >/dev/null 2>" + (tmp / "err").string();
  const int status = std::system(cmd.c_str());
  if (err_out) {
    const auto bytes = read_file_bytes(tmp / "err");
    err_out->assign(bytes.begin(), bytes.end());
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliBinary, ExitCodes) {
  TempDir tmp;
  EXPECT_EQ(shell("--help"), 0);
  EXPECT_EQ(shell("bogus"), 1);
  std::string err;
  EXPECT_EQ(shell("track --manifest " + (tmp / "none.json").string() + " --out " +
                      (tmp / "o").string(),
                  &err),
            2);
  EXPECT_EQ(error_category(err), "io");
  EXPECT_EQ(shell("synth --h 8 --w 8 --c 4 --classes 2 --frames 3 --out " + (tmp / "s").string()),
            0);
  EXPECT_EQ(shell("track --manifest " + (tmp / "s" / "manifest.json").string() +
                  " --tau 0 --out " + (tmp / "o").string()),
            1);
}

}  // namespace
}  // namespace maskflow
