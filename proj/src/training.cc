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

#include "objx/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "objx/errors.hpp"
#include "objx/rng.hpp"

namespace objx::train {

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kSupervised: return "supervised";
    case Mode::kUnsupervisedFit: return "unsupervised_fit";
    case Mode::kFinetune: return "finetune";
  }
  return "?";
}

Mode mode_from_name(const std::string& name) {
  if (name == "supervised") return Mode::kSupervised;
  if (name == "unsupervised_fit") return Mode::kUnsupervisedFit;
  if (name == "finetune") return Mode::kFinetune;
  throw DataError("unknown training mode: " + name);
}

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ValidationError("train: lr must be > 0");
  if (batch < 1) throw ValidationError("train: batch must be >= 1");
  if (steps < 0) throw ValidationError("train: steps must be >= 0");
  net.validate();
  weights.validate(mode == Mode::kSupervised);
  if (mode == Mode::kFinetune && init_checkpoint.empty())
    throw ValidationError("finetune requires a pre-trained checkpoint");
}

AdamState AdamState::init(const model::ParamStore& params) {
  AdamState s;
  for (const auto& t : params.values) {
    s.m.push_back(Tensor(t.shape));
    s.v.push_back(Tensor(t.shape));
  }
  return s;
}

void clip_gradients(model::ParamStore& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& g : params.grads)
    for (double v : g.v) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (auto& g : params.grads)
    for (double& v : g.v) v *= s;
}

void adam_step(model::ParamStore& params, AdamState& state, double lr) {
  for (const auto& g : params.grads)
    if (!g.finite())
      throw DivergenceError("adam: non-finite gradient");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (size_t i = 0; i < params.values.size(); ++i) {
    Tensor& p = params.values[i];
    const Tensor& g = params.grads[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (int64_t j = 0; j < p.numel(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      p[j] -= lr * mh / (std::sqrt(vh) + state.eps);
    }
  }
}

namespace {

namespace fs = std::filesystem;

void maybe_checkpoint(const TrainConfig& cfg, const model::ParamStore& params,
                      int step, bool final) {
  if (cfg.out_dir.empty()) return;
  fs::create_directories(cfg.out_dir);
  if (final) {
    model::save_checkpoint((fs::path(cfg.out_dir) / "checkpoint.objx").string(),
                           params, cfg.net);
    return;
  }
  if (cfg.checkpoint_every > 0 && step > 0 && step % cfg.checkpoint_every == 0) {
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_%06d.objx", step);
    model::save_checkpoint((fs::path(cfg.out_dir) / name).string(), params, cfg.net);
  }
}

// One excerpt's forward+backward; gradients accumulate into params.grads.
loss::LossBreakdown accumulate_gradients(
    const TrainConfig& cfg, model::ParamStore& params,
    const dsp::StftTensor& mix_stft, const dsp::MelFilterbank& fb,
    const std::map<std::string, dsp::StftTensor>* refs) {
  ad::Tape tp;
  std::vector<ad::VarId> leaves;
  leaves.reserve(params.values.size());
  for (const auto& t : params.values) leaves.push_back(tp.leaf(t));
  model::EncodeGraph g =
      model::build_encode_graph(tp, leaves, cfg.net, mix_stft, fb, cfg.encode);
  loss::LossGraph lg = refs
      ? loss::supervised_loss_graph(tp, g, *refs, cfg.weights)
      : loss::unsupervised_loss_graph(tp, g, mix_stft, cfg.weights);
  const double total = tp.val(lg.total)[0];
  if (!std::isfinite(total)) throw DivergenceError("training: non-finite loss");
  tp.backward(lg.total);
  for (size_t i = 0; i < leaves.size(); ++i) {
    const Tensor& gl = tp.grad(leaves[i]);
    Tensor& dst = params.grads[i];
    for (int64_t j = 0; j < dst.numel(); ++j) dst[j] += gl[j];
  }
  return lg.values(tp);
}

void scale_gradients(model::ParamStore& params, double s) {
  for (auto& g : params.grads)
    for (double& v : g.v) v *= s;
}

void add_breakdown(loss::LossBreakdown& acc, const loss::LossBreakdown& b,
                   double w) {
  acc.total += w * b.total;
  for (const auto& [k, v] : b.recon) acc.recon[k] += w * v;
  for (const auto& [k, v] : b.reg) acc.reg[k] += w * v;
}

TrainResult run_fit_like(const TrainConfig& cfg, const dsp::Waveform& mix51,
                         model::ParamStore params, const StepCallback& on_step) {
  const dsp::StftTensor mix_stft = dsp::stft(mix51);
  const dsp::MelFilterbank fb = dsp::build_mel_filterbank();
  AdamState adam = AdamState::init(params);
  TrainResult res;
  model::ParamStore last_good = params;
  for (int step = 0; step < cfg.steps; ++step) {
    params.zero_grads();
    loss::LossBreakdown b;
    try {
      b = accumulate_gradients(cfg, params, mix_stft, fb, nullptr);
      clip_gradients(params, cfg.grad_clip);
      adam_step(params, adam, cfg.lr);
    } catch (const DivergenceError&) {
      if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        model::save_checkpoint(
            (fs::path(cfg.out_dir) / "checkpoint_last_good.objx").string(),
            last_good, cfg.net);
        write_loss_log((fs::path(cfg.out_dir) / "loss_log.csv").string(), res.log);
      }
      throw;
    }
    last_good = params;
    res.log.push_back(StepLog{step, b});
    if (on_step) on_step(res.log.back());
    maybe_checkpoint(cfg, params, step, false);
  }
  maybe_checkpoint(cfg, params, cfg.steps, true);
  if (!cfg.out_dir.empty())
    write_loss_log((fs::path(cfg.out_dir) / "loss_log.csv").string(), res.log);

  res.production = model::encode(params, cfg.net, mix51, cfg.encode);
  res.params = std::move(params);
  return res;
}

}  // namespace

TrainResult train_supervised(const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (cfg.mode != Mode::kSupervised)
    throw ValidationError("train_supervised: wrong mode");
  model::ParamStore params = model::init_params(cfg.net);
  const dsp::MelFilterbank fb = dsp::build_mel_filterbank();
  AdamState adam = AdamState::init(params);
  TrainResult res;
  model::ParamStore last_good = params;

  for (int step = 0; step < cfg.steps; ++step) {
    params.zero_grads();
    loss::LossBreakdown mean_b;
    try {
      for (int item = 0; item < cfg.batch; ++item) {
        datagen::SceneSpec spec = cfg.scene;
        spec.n_objects = cfg.net.n_objects;
        spec.seed = Rng::mix(cfg.seed, static_cast<uint64_t>(step) * 0x10000ULL +
                                           static_cast<uint64_t>(item));
        datagen::Scene sc = datagen::assemble_scene(spec);
        // The encoder consumes the played-back 5.1 mix; references stay in
        // the render domain.
        const dsp::Waveform mix_wav = dsp::istft(sc.renders.at("5.1"));
        const dsp::StftTensor mix_stft = dsp::stft(mix_wav);
        loss::LossBreakdown b =
            accumulate_gradients(cfg, params, mix_stft, fb, &sc.renders);
        add_breakdown(mean_b, b, 1.0 / cfg.batch);
      }
      scale_gradients(params, 1.0 / cfg.batch);
      clip_gradients(params, cfg.grad_clip);
      adam_step(params, adam, cfg.lr);
    } catch (const DivergenceError&) {
      if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        model::save_checkpoint(
            (fs::path(cfg.out_dir) / "checkpoint_last_good.objx").string(),
            last_good, cfg.net);
        write_loss_log((fs::path(cfg.out_dir) / "loss_log.csv").string(), res.log);
      }
      throw;
    }
    last_good = params;
    res.log.push_back(StepLog{step, mean_b});
    if (on_step) on_step(res.log.back());
    maybe_checkpoint(cfg, params, step, false);
  }
  maybe_checkpoint(cfg, params, cfg.steps, true);
  if (!cfg.out_dir.empty())
    write_loss_log((fs::path(cfg.out_dir) / "loss_log.csv").string(), res.log);
  res.params = std::move(params);
  return res;
}

TrainResult train_unsupervised_fit(const TrainConfig& cfg,
                                   const dsp::Waveform& mix51,
                                   const StepCallback& on_step) {
  cfg.validate();
  if (cfg.mode != Mode::kUnsupervisedFit)
    throw ValidationError("train_unsupervised_fit: wrong mode");
  return run_fit_like(cfg, mix51, model::init_params(cfg.net), on_step);
}

TrainResult train_finetune(const TrainConfig& cfg, const dsp::Waveform& mix51,
                           const StepCallback& on_step) {
  cfg.validate();
  if (cfg.mode != Mode::kFinetune)
    throw ValidationError("train_finetune: wrong mode");
  model::ParamStore params = model::load_checkpoint_for(cfg.init_checkpoint, cfg.net);
  return run_fit_like(cfg, mix51, std::move(params), on_step);
}

void write_loss_log(const std::string& path, const std::vector<StepLog>& log) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write loss log: " + path);
  f << "step,total,recon_20,recon_51,recon_71,recon_91";
  for (const auto& t : loss::LossWeights::term_names()) f << "," << t;
  f << "\n";
  char buf[64];
  auto cell = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.9g", v);
    f << buf;
  };
  for (const auto& row : log) {
    f << row.step;
    cell(row.loss.total);
    for (const auto& l : {"2.0", "5.1", "7.1", "9.1"})
      cell(row.loss.recon.count(l) ? row.loss.recon.at(l) : 0.0);
    for (const auto& t : loss::LossWeights::term_names())
      cell(row.loss.reg.count(t) ? row.loss.reg.at(t) : 0.0);
    f << "\n";
  }
}

}  // namespace objx::train
