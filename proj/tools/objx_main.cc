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

// objx: audio object extraction from 5.1 mixes around a differentiable
// renderer. Subcommands cover dataset synthesis, rendering, the three
// training configurations, inference, evaluation and plot-data dumps.
// Exit codes: 0 ok, 2 usage, 3 data error, 4 divergence.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "objx/config.hpp"
#include "objx/datagen.hpp"
#include "objx/errors.hpp"
#include "objx/eval.hpp"
#include "objx/prodio.hpp"
#include "objx/threading.hpp"
#include "objx/training.hpp"
#include "objx/wav.hpp"

namespace {

namespace fs = std::filesystem;
using objx::config::RunConfig;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON run configuration");
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "RNG seed (overrides config)");
  cmd->add_option("--jobs", args.jobs, "worker threads (default 1)");
}

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = objx::config::load_config(args.config_path);
  if (args.seed) {
    cfg.seed = *args.seed;
    cfg.net.seed = *args.seed;
    cfg.scene.seed = *args.seed;
  }
  if (args.jobs) cfg.jobs = *args.jobs;
  objx::threads::set(cfg.jobs);
  return cfg;
}

// Every run leaves its fully-resolved configuration next to its outputs.
void echo_config(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  objx::config::write_config((fs::path(out_dir) / "run_config.json").string(), cfg);
}

void write_melgram_csv(const std::string& path, const objx::Tensor& power,
                       int channel) {
  const int T = power.dim(1), B = power.dim(2);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw objx::DataError("cannot write " + path);
  char buf[32];
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      if (b) f << ",";
      std::snprintf(buf, sizeof buf, "%.6g",
                    power[(static_cast<int64_t>(channel) * T + t) * B + b]);
      f << buf;
    }
    f << "\n";
  }
}

std::string layout_suffix(const std::string& name) {
  std::string s = name;
  s.erase(std::remove(s.begin(), s.end(), '.'), s.end());
  return s;  // "5.1" -> "51"
}

int run(int argc, char** argv) {
  CLI::App app{"audio object extraction from 5.1 mixes"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic evaluation set");
  CommonArgs synth_args;
  add_common(synth, synth_args);
  int synth_count = 50;
  std::optional<int> synth_objects;
  std::optional<double> synth_bed_db;
  std::optional<int> synth_waypoints;
  std::vector<std::string> synth_kinds;
  synth->add_option("--count", synth_count, "number of excerpts (default 50)");
  synth->add_option("--n-objects", synth_objects, "objects per excerpt (1 or 3)");
  synth->add_option("--bed-db", synth_bed_db, "bed level relative to objects");
  synth->add_option("--waypoints", synth_waypoints, "trajectory waypoints (1 = static)");
  synth->add_option("--kinds", synth_kinds, "source kinds (tone chirp noise pulse corpus)");

  auto* render = app.add_subcommand("render", "render a production to speaker layouts");
  CommonArgs render_args;
  add_common(render, render_args);
  std::string render_production;
  std::string render_layout = "all";
  render->add_option("--production", render_production, "production directory")->required();
  render->add_option("--layout", render_layout, "2.0|5.1|7.1|9.1|all");

  auto* train_cmd = app.add_subcommand("train", "supervised training on synthetic scenes");
  CommonArgs train_args;
  add_common(train_cmd, train_args);
  std::optional<int> train_steps;
  train_cmd->add_option("--steps", train_steps, "optimizer steps");

  auto* fit = app.add_subcommand("fit", "unsupervised fit of one 5.1 excerpt");
  CommonArgs fit_args;
  add_common(fit, fit_args);
  std::string fit_mix;
  std::optional<int> fit_steps;
  fit->add_option("--mix", fit_mix, "input 5.1 wav")->required();
  fit->add_option("--steps", fit_steps, "optimizer steps");

  auto* finetune = app.add_subcommand("finetune", "fine-tune a checkpoint on one excerpt");
  CommonArgs ft_args;
  add_common(finetune, ft_args);
  std::string ft_mix, ft_checkpoint;
  std::optional<int> ft_steps;
  finetune->add_option("--mix", ft_mix, "input 5.1 wav")->required();
  finetune->add_option("--checkpoint", ft_checkpoint, "pre-trained checkpoint")->required();
  finetune->add_option("--steps", ft_steps, "optimizer steps");

  auto* extract = app.add_subcommand("extract", "encoder-only inference");
  CommonArgs ex_args;
  add_common(extract, ex_args);
  std::string ex_mix, ex_checkpoint;
  extract->add_option("--mix", ex_mix, "input 5.1 wav")->required();
  extract->add_option("--checkpoint", ex_checkpoint, "model checkpoint")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a method against a dataset");
  CommonArgs ev_args;
  add_common(eval_cmd, ev_args);
  std::string ev_dataset, ev_method, ev_label = "method";
  bool ev_no_ibm = false;
  eval_cmd->add_option("--dataset", ev_dataset, "dataset directory")->required();
  eval_cmd->add_option("--method", ev_method, "method outputs directory");
  eval_cmd->add_option("--label", ev_label, "method label in the report");
  eval_cmd->add_flag("--no-ibm", ev_no_ibm, "skip the IBM oracles");

  auto* plot = app.add_subcommand("plotdata", "dump spectrogram/trajectory CSVs");
  CommonArgs pl_args;
  add_common(plot, pl_args);
  std::string pl_mix, pl_production, pl_truth;
  plot->add_option("--mix", pl_mix, "input 5.1 wav")->required();
  plot->add_option("--production", pl_production, "extracted production directory");
  plot->add_option("--truth", pl_truth, "ground-truth excerpt directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (synth->parsed()) {
    RunConfig cfg = resolve_config(synth_args);
    if (synth_objects) cfg.scene.n_objects = *synth_objects;
    if (synth_bed_db) cfg.scene.level.bed_gain_db = *synth_bed_db;
    if (synth_waypoints) cfg.scene.traj.waypoints = *synth_waypoints;
    if (!synth_kinds.empty()) {
      cfg.scene.kinds.clear();
      for (const auto& k : synth_kinds)
        cfg.scene.kinds.push_back(objx::datagen::kind_from_name(k));
    }
    echo_config(cfg, synth_args.out_dir);
    objx::datagen::make_eval_set(cfg.scene, synth_count, synth_args.out_dir, cfg.jobs);
    std::printf("wrote %d excerpts to %s\n", synth_count, synth_args.out_dir.c_str());
    return 0;
  }

  if (render->parsed()) {
    RunConfig cfg = resolve_config(render_args);
    echo_config(cfg, render_args.out_dir);
    const auto prod = objx::io::read_production(render_production);
    std::vector<std::string> layouts;
    if (render_layout == "all")
      layouts = objx::spatial::SpeakerLayout::names();
    else
      layouts = {render_layout};
    for (const auto& name : layouts) {
      const auto& layout = objx::spatial::SpeakerLayout::get(name);
      auto wav = objx::dsp::istft(objx::spatial::render(prod, layout));
      const std::string file = "render_" + layout_suffix(name) + ".wav";
      objx::io::write_wav((fs::path(render_args.out_dir) / file).string(), wav);
      std::printf("rendered %s\n", file.c_str());
    }
    return 0;
  }

  if (train_cmd->parsed()) {
    RunConfig cfg = resolve_config(train_args);
    cfg.mode = objx::train::Mode::kSupervised;
    if (train_steps) cfg.steps = *train_steps;
    echo_config(cfg, train_args.out_dir);
    auto tcfg = cfg.train_config();
    tcfg.out_dir = train_args.out_dir;
    objx::train::train_supervised(tcfg, [](const objx::train::StepLog& s) {
      if (s.step % 10 == 0)
        std::printf("step %d total %.6f\n", s.step, s.loss.total);
    });
    std::printf("final checkpoint: %s\n",
                (fs::path(train_args.out_dir) / "checkpoint.objx").string().c_str());
    return 0;
  }

  auto run_fit_like = [&](const CommonArgs& args, const std::string& mix_path,
                          const std::string& checkpoint, std::optional<int> steps,
                          objx::train::Mode mode) {
    RunConfig cfg = resolve_config(args);
    cfg.mode = mode;
    if (steps) cfg.steps = *steps;
    echo_config(cfg, args.out_dir);
    auto tcfg = cfg.train_config();
    tcfg.out_dir = args.out_dir;
    tcfg.init_checkpoint = checkpoint;
    const auto mix = objx::io::read_wav(mix_path);
    auto log = [](const objx::train::StepLog& s) {
      if (s.step % 25 == 0)
        std::printf("step %d total %.6f\n", s.step, s.loss.total);
    };
    objx::train::TrainResult res =
        mode == objx::train::Mode::kUnsupervisedFit
            ? objx::train::train_unsupervised_fit(tcfg, mix, log)
            : objx::train::train_finetune(tcfg, mix, log);
    objx::io::write_production(args.out_dir, res.production);
    std::printf("production written to %s\n", args.out_dir.c_str());
    return 0;
  };

  if (fit->parsed())
    return run_fit_like(fit_args, fit_mix, "", fit_steps,
                        objx::train::Mode::kUnsupervisedFit);
  if (finetune->parsed())
    return run_fit_like(ft_args, ft_mix, ft_checkpoint, ft_steps,
                        objx::train::Mode::kFinetune);

  if (extract->parsed()) {
    RunConfig cfg = resolve_config(ex_args);
    objx::model::MaskNetConfig file_cfg;
    auto params = objx::model::load_checkpoint(ex_checkpoint, &file_cfg);
    file_cfg.seed = cfg.seed;
    cfg.net = file_cfg;
    echo_config(cfg, ex_args.out_dir);
    const auto mix = objx::io::read_wav(ex_mix);
    auto prod = objx::model::encode(params, file_cfg, mix, cfg.encode_options());
    objx::io::write_production(ex_args.out_dir, prod);
    std::printf("production written to %s\n", ex_args.out_dir.c_str());
    return 0;
  }

  if (eval_cmd->parsed()) {
    RunConfig cfg = resolve_config(ev_args);
    echo_config(cfg, ev_args.out_dir);
    objx::eval::EvalOptions opts;
    opts.method_dir = ev_method;
    opts.method_label = ev_label;
    opts.include_ibm = !ev_no_ibm;
    opts.jobs = cfg.jobs;
    auto report = objx::eval::evaluate(ev_dataset, opts);
    objx::eval::write_report_csv((fs::path(ev_args.out_dir) / "report.csv").string(),
                                 report);
    objx::eval::write_boxplot_csv(
        (fs::path(ev_args.out_dir) / "boxplot_objects.csv").string(),
        report.object_summary);
    objx::eval::write_boxplot_csv(
        (fs::path(ev_args.out_dir) / "boxplot_bed.csv").string(),
        report.bed_summary);
    for (const auto& w : report.warnings)
      std::fprintf(stderr, "warning: %s\n", w.c_str());
    for (const auto& [m, s] : report.object_summary)
      std::printf("objects %-12s median SI-SDRi %+8.3f dB (n=%d)\n", m.c_str(),
                  s.median, s.count);
    for (const auto& [m, s] : report.bed_summary)
      std::printf("bed     %-12s median SI-SDRi %+8.3f dB (n=%d)\n", m.c_str(),
                  s.median, s.count);
    return 0;
  }

  if (plot->parsed()) {
    RunConfig cfg = resolve_config(pl_args);
    echo_config(cfg, pl_args.out_dir);
    const auto fb = objx::dsp::build_mel_filterbank();
    const auto mix = objx::io::read_wav(pl_mix);
    const auto mix_stft = objx::dsp::stft(mix);
    const auto mel = objx::dsp::to_melgram(mix_stft, fb);
    const char* names[6] = {"L", "R", "C", "LFE", "Ls", "Rs"};
    for (int c : {0, 1, 2, 4, 5})
      write_melgram_csv((fs::path(pl_args.out_dir) /
                         ("input_mel_" + std::string(names[c]) + ".csv")).string(),
                        mel.power, c);
    auto dump_production = [&](const std::string& dir, const std::string& prefix) {
      const auto prod = objx::io::read_production(dir);
      for (size_t o = 0; o < prod.objects.size(); ++o) {
        const auto& obj = prod.objects[o];
        const auto m = objx::dsp::to_melgram(obj.stft, fb);
        write_melgram_csv((fs::path(pl_args.out_dir) /
                           (prefix + "obj_" + std::to_string(o) + "_mel.csv")).string(),
                          m.power, 0);
        objx::datagen::write_trajectory_csv(
            (fs::path(pl_args.out_dir) /
             (prefix + "obj_" + std::to_string(o) + "_traj.csv")).string(),
            obj.traj);
      }
      const auto bm = objx::dsp::to_melgram(prod.bed, fb);
      for (int c : {0, 1, 2, 4, 5})
        write_melgram_csv((fs::path(pl_args.out_dir) /
                           (prefix + "bed_mel_" + std::string(names[c]) + ".csv")).string(),
                          bm.power, c);
    };
    if (!pl_production.empty()) dump_production(pl_production, "est_");
    if (!pl_truth.empty()) dump_production(pl_truth, "ref_");
    std::printf("plot data written to %s\n", pl_args.out_dir.c_str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const objx::UsageError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  } catch (const objx::DivergenceError& e) {
    std::fprintf(stderr, "error: divergence: %s\n", e.what());
    return 4;
  } catch (const objx::Error& e) {
    std::fprintf(stderr, "error: data: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
}
