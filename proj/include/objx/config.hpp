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

#ifndef OBJX_CONFIG_HPP
#define OBJX_CONFIG_HPP

#include <string>

#include "objx/training.hpp"

namespace objx::config {

// The one structured-text run configuration: every hyperparameter with its
// documented default. Unknown keys are rejected; parse -> emit -> parse is
// lossless.
struct RunConfig {
  uint64_t seed = 0;
  int jobs = 1;
  model::MaskNetConfig net;
  loss::LossWeights weights;
  train::Mode mode = train::Mode::kSupervised;
  double lr = 2e-4;
  int batch = 8;
  int steps = -1;  // -1: per-mode default (supervised 200, fit 500, finetune 200)
  double grad_clip = 5.0;
  int checkpoint_every = 100;
  datagen::SceneSpec scene;
  bool depan_smooth = true;
  double depan_alpha = 0.2;

  int resolved_steps() const;
  train::TrainConfig train_config() const;
  model::EncodeOptions encode_options() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string emit_config(const RunConfig& cfg);
void write_config(const std::string& path, const RunConfig& cfg);

}  // namespace objx::config

#endif  // OBJX_CONFIG_HPP
