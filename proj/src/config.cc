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

#include "objx/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "objx/errors.hpp"

namespace objx::config {

namespace {

using nlohmann::ordered_json;

void check_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw DataError("config: unknown key '" + key + "' in " + where);
}

template <class T>
void get_if(const ordered_json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

int RunConfig::resolved_steps() const {
  if (steps >= 0) return steps;
  switch (mode) {
    case train::Mode::kSupervised: return 200;
    case train::Mode::kUnsupervisedFit: return 500;
    case train::Mode::kFinetune: return 200;
  }
  return 200;
}

model::EncodeOptions RunConfig::encode_options() const {
  model::EncodeOptions e;
  e.depan.smooth = depan_smooth;
  e.depan.alpha = depan_alpha;
  return e;
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig t;
  t.mode = mode;
  t.lr = lr;
  t.batch = mode == train::Mode::kSupervised ? batch : 1;
  t.steps = resolved_steps();
  t.seed = seed;
  t.grad_clip = grad_clip;
  t.checkpoint_every = checkpoint_every;
  t.weights = weights;
  t.net = net;
  t.scene = scene;
  t.encode = encode_options();
  return t;
}

RunConfig parse_config_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: parse error: ") + e.what());
  }
  RunConfig c;
  check_keys(j, {"seed", "jobs", "model", "loss", "train", "scene", "depan"},
             "root");
  get_if(j, "seed", c.seed);
  get_if(j, "jobs", c.jobs);

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, {"n_objects", "base_channels", "depth"}, "model");
    get_if(m, "n_objects", c.net.n_objects);
    get_if(m, "base_channels", c.net.base_channels);
    get_if(m, "depth", c.net.depth);
  }
  c.net.seed = c.seed;

  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    check_keys(l, {"recon_layout_weights", "reg_weights", "thresholds"}, "loss");
    if (l.contains("recon_layout_weights")) {
      std::map<std::string, double> lw;
      for (const auto& [k, v] : l.at("recon_layout_weights").items())
        lw[k] = v.get<double>();
      c.weights.recon_layout = std::move(lw);
    }
    if (l.contains("reg_weights")) {
      const auto& r = l.at("reg_weights");
      check_keys(r,
                 {"bed_content", "speaker_proximity", "slow_motion",
                  "acceleration", "object_proximity", "traj_correlation",
                  "content_correlation"},
                 "loss.reg_weights");
      get_if(r, "bed_content", c.weights.bed_content);
      get_if(r, "speaker_proximity", c.weights.speaker_proximity);
      get_if(r, "slow_motion", c.weights.slow_motion);
      get_if(r, "acceleration", c.weights.acceleration);
      get_if(r, "object_proximity", c.weights.object_proximity);
      get_if(r, "traj_correlation", c.weights.traj_correlation);
      get_if(r, "content_correlation", c.weights.content_correlation);
    }
    if (l.contains("thresholds")) {
      const auto& t = l.at("thresholds");
      check_keys(t, {"speaker_sigma", "v_min", "a_max", "object_sigma"},
                 "loss.thresholds");
      get_if(t, "speaker_sigma", c.weights.speaker_sigma);
      get_if(t, "v_min", c.weights.v_min);
      get_if(t, "a_max", c.weights.a_max);
      get_if(t, "object_sigma", c.weights.object_sigma);
    }
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, {"mode", "lr", "batch", "steps", "grad_clip", "checkpoint_every"},
               "train");
    if (t.contains("mode")) c.mode = train::mode_from_name(t.at("mode").get<std::string>());
    get_if(t, "lr", c.lr);
    get_if(t, "batch", c.batch);
    get_if(t, "steps", c.steps);
    get_if(t, "grad_clip", c.grad_clip);
    get_if(t, "checkpoint_every", c.checkpoint_every);
  }

  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    check_keys(s,
               {"n_objects", "kinds", "waypoints", "object_rms", "bed_gain_db",
                "corpus_dir"},
               "scene");
    get_if(s, "n_objects", c.scene.n_objects);
    if (s.contains("kinds")) {
      c.scene.kinds.clear();
      for (const auto& k : s.at("kinds"))
        c.scene.kinds.push_back(datagen::kind_from_name(k.get<std::string>()));
    }
    get_if(s, "waypoints", c.scene.traj.waypoints);
    get_if(s, "object_rms", c.scene.level.object_rms);
    get_if(s, "bed_gain_db", c.scene.level.bed_gain_db);
    get_if(s, "corpus_dir", c.scene.corpus_dir);
  }
  c.scene.seed = c.seed;

  if (j.contains("depan")) {
    const auto& d = j.at("depan");
    check_keys(d, {"smooth", "alpha"}, "depan");
    get_if(d, "smooth", c.depan_smooth);
    get_if(d, "alpha", c.depan_alpha);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string emit_config(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["model"] = {{"n_objects", c.net.n_objects},
                {"base_channels", c.net.base_channels},
                {"depth", c.net.depth}};
  ordered_json lw = ordered_json::object();
  for (const auto& [k, v] : c.weights.recon_layout) lw[k] = v;
  j["loss"] = {{"recon_layout_weights", lw},
               {"reg_weights",
                {{"bed_content", c.weights.bed_content},
                 {"speaker_proximity", c.weights.speaker_proximity},
                 {"slow_motion", c.weights.slow_motion},
                 {"acceleration", c.weights.acceleration},
                 {"object_proximity", c.weights.object_proximity},
                 {"traj_correlation", c.weights.traj_correlation},
                 {"content_correlation", c.weights.content_correlation}}},
               {"thresholds",
                {{"speaker_sigma", c.weights.speaker_sigma},
                 {"v_min", c.weights.v_min},
                 {"a_max", c.weights.a_max},
                 {"object_sigma", c.weights.object_sigma}}}};
  j["train"] = {{"mode", train::mode_name(c.mode)},
                {"lr", c.lr},
                {"batch", c.batch},
                {"steps", c.steps},
                {"grad_clip", c.grad_clip},
                {"checkpoint_every", c.checkpoint_every}};
  std::vector<std::string> kinds;
  for (auto k : c.scene.kinds) kinds.push_back(datagen::kind_name(k));
  j["scene"] = {{"n_objects", c.scene.n_objects},
                {"kinds", kinds},
                {"waypoints", c.scene.traj.waypoints},
                {"object_rms", c.scene.level.object_rms},
                {"bed_gain_db", c.scene.level.bed_gain_db},
                {"corpus_dir", c.scene.corpus_dir}};
  j["depan"] = {{"smooth", c.depan_smooth}, {"alpha", c.depan_alpha}};
  return j.dump(2) + "\n";
}

void write_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write config: " + path);
  f << emit_config(cfg);
}

}  // namespace objx::config
