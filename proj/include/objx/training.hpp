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

#ifndef OBJX_TRAINING_HPP
#define OBJX_TRAINING_HPP

#include <functional>
#include <string>
#include <vector>

#include "objx/datagen.hpp"
#include "objx/losses.hpp"
#include "objx/model.hpp"

namespace objx::train {

enum class Mode { kSupervised, kUnsupervisedFit, kFinetune };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct TrainConfig {
  Mode mode = Mode::kSupervised;
  double lr = 2e-4;
  int batch = 8;   // 1 for unsupervised fit
  int steps = 200;
  uint64_t seed = 0;
  double grad_clip = 5.0;  // global norm, applied before Adam
  int checkpoint_every = 100;

  loss::LossWeights weights;
  model::MaskNetConfig net;
  datagen::SceneSpec scene;  // on-the-fly supervised data
  model::EncodeOptions encode;

  std::string out_dir;          // checkpoints + loss log; empty = no files
  std::string init_checkpoint;  // finetune start

  void validate() const;
};

struct AdamState {
  std::vector<Tensor> m, v;
  int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(const model::ParamStore& params);
};

// Bias-corrected Adam over params.grads. Throws DivergenceError on
// non-finite gradients.
void adam_step(model::ParamStore& params, AdamState& state, double lr);

// Scales all gradients so the global norm is at most max_norm.
void clip_gradients(model::ParamStore& params, double max_norm);

struct StepLog {
  int step = 0;
  loss::LossBreakdown loss;
};

struct TrainResult {
  model::ParamStore params;
  std::vector<StepLog> log;
  spatial::ObjectProduction production;  // fit/finetune output
};

using StepCallback = std::function<void(const StepLog&)>;

TrainResult train_supervised(const TrainConfig& cfg,
                             const StepCallback& on_step = nullptr);
TrainResult train_unsupervised_fit(const TrainConfig& cfg,
                                   const dsp::Waveform& mix51,
                                   const StepCallback& on_step = nullptr);
TrainResult train_finetune(const TrainConfig& cfg, const dsp::Waveform& mix51,
                           const StepCallback& on_step = nullptr);

// step,total,recon per layout,each term; one row per optimizer step.
void write_loss_log(const std::string& path, const std::vector<StepLog>& log);

}  // namespace objx::train

#endif  // OBJX_TRAINING_HPP
