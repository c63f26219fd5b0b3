// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end checks of the command-line binary: each case shells out to the
// built executable and inspects exit codes and produced files.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string binary_path() {
  std::error_code ec;
  const fs::path self = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    const fs::path cand = self.parent_path() / "erupt";
    if (fs::exists(cand)) return cand.string();
  }
  return "./erupt";
}

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = binary_path() + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  RunResult r;
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p))
    r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TmpDir {
  fs::path path;
  explicit TmpDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string operator/(const std::string& sub) const {
    return (path / sub).string();
  }
};

std::string read_file(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// Relative path -> file bytes for every regular file under root.
std::map<std::string, std::string> tree_bytes(const std::string& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out[fs::relative(e.path(), root).string()] = read_file(e.path().string());
  return out;
}

void write_micro_config(const std::string& path) {
  std::ofstream f(path);
  f << R"({
  "model": {"d": 32, "heads": 2, "image_size": 16, "patch": 8,
            "extractor_blocks": 1, "scene_blocks": 2,
            "decoder_d": 32, "decoder_heads": 2, "decoder_blocks": 2},
  "train": {"epochs": 2, "batch_scenes": 2, "targets_per_scene": 2,
            "lr": 0.001, "warmup_steps": 2, "checkpoint_every": 1}
})";
}

std::string micro_dataset(const TmpDir& tmp, const std::string& name) {
  const std::string dir = tmp / name;
  const RunResult r = run("generate --kind toy --out " + dir +
                          " --scenes 3 --image-size 16 --views 4 --inputs 2"
                          " --seed 11");
  REQUIRE(r.code == 0);
  return dir;
}

}  // namespace

TEST_CASE("generate is byte-identical under a fixed seed") {
  TmpDir tmp("erupt_cli_gen");
  for (const char* name : {"a", "b"}) {
    const RunResult r = run("generate --kind toy --out " + (tmp / name) +
                            " --scenes 2 --image-size 16 --views 3"
                            " --inputs 2 --seed 7");
    CHECK(r.code == 0);
  }
  CHECK(tree_bytes(tmp / "a") == tree_bytes(tmp / "b"));
}

TEST_CASE("msvs generation yields five inputs and five targets per scene") {
  TmpDir tmp("erupt_cli_msvs");
  CHECK(run("generate --kind msvs-fixtures --out " + (tmp / "fix") +
            " --sequences 2 --length 6 --pano-height 128 --seed 3")
            .code == 0);
  CHECK(run("generate --kind msvs --panoramas " + (tmp / "fix") + " --out " +
            (tmp / "data") + " --scenes 2 --image-size 32 --seed 5")
            .code == 0);
  for (const char* scene : {"scene_00000", "scene_00001"}) {
    const auto j = nlohmann::json::parse(
        read_file(tmp / ("data/scenes/" + std::string(scene) + "/poses.json")));
    CHECK(j.at("inputs").size() == 5);
    CHECK(j.at("targets").size() == 5);
  }
}

TEST_CASE("usage errors exit with code 2") {
  TmpDir tmp("erupt_cli_usage");
  CHECK(run("generate --kind toy --out " + (tmp / "d") + " --seed not_a_number")
            .code == 2);
  CHECK(run("train --data " + (tmp / "missing")).code == 2);
  CHECK(run("train").code == 2);
  CHECK(run("nonsense").code == 2);
  // Unknown config key is a config error, also 2.
  std::ofstream(tmp / "bad.json") << R"({"train": {"epochz": 1}})";
  const RunResult r =
      run("train --data " + (tmp / "missing") + " --config " + (tmp / "bad.json"));
  CHECK(r.code == 2);
}

TEST_CASE("failed generation leaves no partial dataset behind") {
  TmpDir tmp("erupt_cli_partial");
  const RunResult r = run("generate --kind msvs --panoramas " +
                          (tmp / "no_fixtures") + " --out " + (tmp / "data"));
  CHECK(r.code != 0);
  CHECK(!fs::exists(tmp / "data"));
  CHECK(!fs::exists(tmp / "data.partial"));
}

TEST_CASE("train writes logs and a checkpoint, and resume is bit-exact") {
  TmpDir tmp("erupt_cli_train");
  const std::string data = micro_dataset(tmp, "data");
  write_micro_config(tmp / "micro.json");

  // One uninterrupted 2-epoch run.
  RunResult full = run("train --data " + data + " --config " +
                       (tmp / "micro.json") + " --out " + (tmp / "full") +
                       " --holdout 1");
  CHECK(full.code == 0);
  CHECK(fs::exists(tmp / "full/train_log.csv"));
  CHECK(fs::exists(tmp / "full/eval_log.csv"));
  CHECK(fs::exists(tmp / "full/checkpoint/state.json"));

  // The same schedule paused after epoch 1, then resumed to completion.
  CHECK(run("train --data " + data + " --config " + (tmp / "micro.json") +
            " --out " + (tmp / "split") + " --holdout 1 --stop-after 1")
            .code == 0);
  CHECK(run("train --data " + data + " --config " + (tmp / "micro.json") +
            " --out " + (tmp / "split") + " --holdout 1 --resume " +
            (tmp / "split/checkpoint"))
            .code == 0);

  CHECK(tree_bytes(tmp / "full/checkpoint/params") ==
        tree_bytes(tmp / "split/checkpoint/params"));
}

TEST_CASE("render emits numbered frames deterministically") {
  TmpDir tmp("erupt_cli_render");
  const std::string data = micro_dataset(tmp, "data");
  write_micro_config(tmp / "micro.json");
  REQUIRE(run("train --data " + data + " --config " + (tmp / "micro.json") +
              " --out " + (tmp / "run"))
              .code == 0);
  const std::string ckpt = tmp / "run/checkpoint";
  const std::string scene = data + "/scenes/scene_00000";

  for (const char* dir : {"f1", "f2"}) {
    const RunResult r = run("render --checkpoint " + ckpt + " --scene " +
                            scene + " --out " + (tmp / dir) + " --orbit 3");
    CHECK(r.code == 0);
  }
  for (const char* frame : {"frame_000.png", "frame_001.png", "frame_002.png"})
    CHECK(read_file(tmp / ("f1/" + std::string(frame))) ==
          read_file(tmp / ("f2/" + std::string(frame))));
  CHECK(!fs::exists(tmp / "f1/frame_003.png"));

  // A JSON pose file renders too; a malformed one is a usage error.
  std::ofstream(tmp / "pose.json") << R"({"position": [0, 3, 5]})";
  CHECK(run("render --checkpoint " + ckpt + " --scene " + scene + " --out " +
            (tmp / "f3") + " --poses " + (tmp / "pose.json"))
            .code == 0);
  CHECK(fs::exists(tmp / "f3/frame_000.png"));
  std::ofstream(tmp / "broken.json") << "{ not json";
  const RunResult bad =
      run("render --checkpoint " + ckpt + " --scene " + scene + " --out " +
          (tmp / "f4") + " --poses " + (tmp / "broken.json"));
  CHECK(bad.code == 2);
  CHECK(bad.out.find("line") != std::string::npos);
}

TEST_CASE("eval aggregate row is the mean of the scene rows") {
  TmpDir tmp("erupt_cli_eval");
  const std::string data = micro_dataset(tmp, "data");
  write_micro_config(tmp / "micro.json");
  REQUIRE(run("train --data " + data + " --config " + (tmp / "micro.json") +
              " --out " + (tmp / "run"))
              .code == 0);
  const RunResult r = run("eval --checkpoint " + (tmp / "run/checkpoint") +
                          " --data " + data + " --out " + (tmp / "eval.csv"));
  CHECK(r.code == 0);

  std::ifstream f(tmp / "eval.csv");
  std::string line;
  std::getline(f, line);
  CHECK(line == "scene,psnr,ssim,baseline_psnr");
  double sum[3] = {}, mean[3] = {};
  int rows = 0;
  while (std::getline(f, line)) {
    std::istringstream is(line);
    std::string name, a, b, c;
    std::getline(is, name, ',');
    std::getline(is, a, ',');
    std::getline(is, b, ',');
    std::getline(is, c, ',');
    if (name == "mean") {
      mean[0] = std::stod(a), mean[1] = std::stod(b), mean[2] = std::stod(c);
    } else {
      sum[0] += std::stod(a), sum[1] += std::stod(b), sum[2] += std::stod(c);
      ++rows;
    }
  }
  REQUIRE(rows == 3);
  for (int i = 0; i < 3; ++i)
    CHECK(mean[i] == doctest::Approx(sum[i] / rows).epsilon(1e-9));
}

TEST_CASE("bench emits the documented csv schema for both decoders") {
  TmpDir tmp("erupt_cli_bench");
  const RunResult r =
      run("bench --trials 1 --out " + (tmp / "bench.csv"));
  CHECK(r.code == 0);

  std::ifstream f(tmp / "bench.csv");
  std::string line;
  int preamble = 0;
  while (std::getline(f, line) && line.rfind("# ", 0) == 0) ++preamble;
  CHECK(preamble >= 1);
  CHECK(line ==
        "op,decoder,resolution,n_inputs,queries,scene_encode_ms,median_ms,"
        "p10_ms,p90_ms,fwd_ms,fwd_bwd_ms,fps,peak_bytes,outcome");

  // decoder kind -> set of resolutions seen
  std::map<std::string, std::vector<std::string>> seen;
  while (std::getline(f, line)) {
    std::istringstream is(line);
    std::string op, decoder, res;
    std::getline(is, op, ',');
    std::getline(is, decoder, ',');
    std::getline(is, res, ',');
    if (op == "decode") seen[decoder].push_back(res);
  }
  const std::vector<std::string> want{"64", "128"};
  CHECK(seen["patch"] == want);
  CHECK(seen["pixel"] == want);
}
