// Copyright 2026 the objx authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "objx/config.hpp"
#include "objx/datagen.hpp"
#include "objx/errors.hpp"
#include "objx/model.hpp"
#include "objx/prodio.hpp"
#include "test_util.hpp"

using namespace objx;
namespace fs = std::filesystem;

namespace {

std::string objx_bin() {
  const char* bin = std::getenv("OBJX_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "OBJX_BIN must point at the CLI binary");
  return bin;
}

int run_cli(const std::string& args) {
  const std::string cmd = objx_bin() + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

bool trees_identical(const fs::path& a, const fs::path& b) {
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    if (!fs::exists(b / rel)) return false;
    std::ifstream fa(entry.path(), std::ios::binary);
    std::ifstream fb(b / rel, std::ios::binary);
    std::string da((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string db((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    if (da != db) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config defaults round-trip losslessly and reject unknown keys") {
  config::RunConfig def;
  const std::string text = config::emit_config(def);
  auto parsed = config::parse_config_text(text);
  CHECK(config::emit_config(parsed) == text);
  CHECK(parsed.lr == 2e-4);
  CHECK(parsed.batch == 8);
  CHECK(parsed.weights.recon_layout.at("7.1") == 1.5);
  CHECK(parsed.resolved_steps() == 200);
  parsed.mode = train::Mode::kUnsupervisedFit;
  CHECK(parsed.resolved_steps() == 500);

  CHECK_THROWS_AS(config::parse_config_text("{\"nope\": 1}"), DataError);
  CHECK_THROWS_AS(config::parse_config_text("{\"model\": {\"layers\": 2}}"), DataError);
  CHECK_THROWS_AS(config::parse_config_text("not json"), DataError);
}

TEST_CASE("synth is byte-deterministic under a fixed seed") {
  const auto root = fs::temp_directory_path() / "objx_cli_synth";
  fs::remove_all(root);
  const std::string common =
      " --count 1 --n-objects 1 --seed 7 --waypoints 2 --kinds tone";
  REQUIRE(run_cli("synth --out " + (root / "a").string() + common) == 0);
  REQUIRE(run_cli("synth --out " + (root / "b").string() + common) == 0);
  CHECK(trees_identical(root / "a", root / "b"));
  CHECK(fs::exists(root / "a" / "run_config.json"));
  CHECK(fs::exists(root / "a" / "manifest.json"));
  fs::remove_all(root);
}

TEST_CASE("extract with an untrained seeded checkpoint emits a valid production") {
  const auto root = fs::temp_directory_path() / "objx_cli_extract";
  fs::remove_all(root);
  fs::create_directories(root);

  // One synthetic excerpt for input.
  datagen::SceneSpec spec;
  spec.seed = 5;
  datagen::make_eval_set(spec, 1, (root / "ds").string());

  // Untrained (seeded) checkpoint.
  model::MaskNetConfig net;
  net.base_channels = 4;
  net.depth = 2;
  net.seed = 5;
  model::save_checkpoint((root / "ckpt.objx").string(), model::init_params(net), net);

  const std::string mix = (root / "ds" / "excerpt_0000" / "mix_51.wav").string();
  REQUIRE(run_cli("extract --mix " + mix + " --checkpoint " +
                  (root / "ckpt.objx").string() + " --out " +
                  (root / "prod").string()) == 0);

  CHECK(fs::exists(root / "prod" / "obj_0.wav"));
  CHECK(fs::exists(root / "prod" / "obj_0.csv"));
  CHECK(fs::exists(root / "prod" / "bed.wav"));
  CHECK(fs::exists(root / "prod" / "run_config.json"));
  auto traj = datagen::read_trajectory_csv((root / "prod" / "obj_0.csv").string());
  CHECK(traj.frames() == dsp::kFrames);
  auto prod = io::read_production((root / "prod").string());
  CHECK(prod.objects.size() == 1);
  CHECK(prod.bed.channels() == 6);
  fs::remove_all(root);
}

TEST_CASE("cli exit codes: usage 2, data 3, divergence 4") {
  CHECK(run_cli("synth") == 2);               // missing --out
  CHECK(run_cli("bogus-subcommand") == 2);
  CHECK(run_cli("eval --dataset /nonexistent --out /tmp/objx_ev") == 3);

  // A checkpoint full of NaNs trips the divergence guard.
  const auto root = fs::temp_directory_path() / "objx_cli_div";
  fs::remove_all(root);
  fs::create_directories(root);
  datagen::SceneSpec spec;
  spec.seed = 6;
  datagen::make_eval_set(spec, 1, (root / "ds").string());
  model::MaskNetConfig net;
  net.base_channels = 2;
  net.depth = 1;
  auto params = model::init_params(net);
  for (auto& t : params.values)
    for (auto& v : t.v) v = std::nan("");
  model::save_checkpoint((root / "nan.objx").string(), params, net);
  CHECK(run_cli("extract --mix " + (root / "ds" / "excerpt_0000" / "mix_51.wav").string() +
                " --checkpoint " + (root / "nan.objx").string() + " --out " +
                (root / "prod").string()) == 4);
  fs::remove_all(root);
}

TEST_CASE("eval on ground-truth copies reports strictly positive SI-SDRi") {
  const auto root = fs::temp_directory_path() / "objx_cli_eval";
  fs::remove_all(root);
  datagen::SceneSpec spec;
  spec.seed = 8;
  datagen::make_eval_set(spec, 1, (root / "ds").string());
  fs::create_directories(root / "gt" / "excerpt_0000");
  for (const auto& f : {"obj_0.wav", "bed.wav"})
    fs::copy_file(root / "ds" / "excerpt_0000" / f, root / "gt" / "excerpt_0000" / f);

  REQUIRE(run_cli("eval --dataset " + (root / "ds").string() + " --method " +
                  (root / "gt").string() + " --label gt --no-ibm --out " +
                  (root / "rep").string()) == 0);
  std::ifstream f(root / "rep" / "report.csv");
  REQUIRE(f.good());
  std::string line;
  std::getline(f, line);
  CHECK(line == "excerpt,method,slot,si_sdr_db,baseline_db,si_sdri_db,permutation");
  bool saw_gt = false;
  while (std::getline(f, line)) {
    if (line.find(",gt,") == std::string::npos) continue;
    saw_gt = true;
    const auto pos = line.rfind(',');
    const auto pos2 = line.rfind(',', pos - 1);
    const double sdri = std::stod(line.substr(pos2 + 1, pos - pos2 - 1));
    CHECK(sdri > 0.0);
  }
  CHECK(saw_gt);
  CHECK(fs::exists(root / "rep" / "boxplot_objects.csv"));
  CHECK(fs::exists(root / "rep" / "boxplot_bed.csv"));
  fs::remove_all(root);
}
