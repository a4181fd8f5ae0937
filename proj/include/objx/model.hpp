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

#ifndef OBJX_MODEL_HPP
#define OBJX_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "objx/autodiff.hpp"
#include "objx/dsp.hpp"
#include "objx/spatial.hpp"

namespace objx::model {

struct MaskNetConfig {
  int n_objects = 1;       // 1..3
  int base_channels = 16;
  int depth = 4;
  uint64_t seed = 0;

  void validate() const;
};

// Mel-domain masks for the n objects and the bed over the 5 positional
// channels: values in [0,1], shape [5][frames][bands] each.
struct MaskSet {
  std::vector<Tensor> object_masks;
  Tensor bed_mask;
};

// Named parameter tensors with gradient slots of identical shapes.
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Tensor> values;
  std::vector<Tensor> grads;

  int size() const { return static_cast<int>(values.size()); }
  int64_t total_count() const;
  void zero_grads();
  int index_of(const std::string& name) const;  // -1 if absent
};

// He-style uniform fan-in init, biases zero; the final layer is fully
// zeroed so initial masks are exactly 0.5.
ParamStore init_params(const MaskNetConfig& cfg);

// U-Net mask estimator on the tape: input [5][T][B] log-compressed mel
// power -> [(n+1)*5][T][B] sigmoid mask planes.
ad::VarId masknet_forward_tape(ad::Tape& tp, const std::vector<ad::VarId>& params,
                               const MaskNetConfig& cfg, ad::VarId input);

// Plain forward (no gradients).
MaskSet masknet_forward(const ParamStore& params, const MaskNetConfig& cfg,
                        const Tensor& logmel);

struct EncodeOptions {
  spatial::DepanOptions depan;  // smoothing defaults ON in the pipeline
  EncodeOptions() { depan.smooth = true; }
};

// Differentiable encoder graph: mix STFT (constant) + network params
// (leaves) -> per-object masked tracks/trajectories and masked bed.
struct EncodeGraph {
  ad::VarId mask_planes = ad::kNoVar;           // [(n+1)*5][T][B]
  std::vector<ad::VarId> obj_mono_re, obj_mono_im;  // [T][F], de-trimmed
  std::vector<ad::VarId> traj_x, traj_y;            // [T]
  ad::VarId bed_re = ad::kNoVar, bed_im = ad::kNoVar;  // [5][T][F] positional
  Tensor bed_lfe_re, bed_lfe_im;                // constant LFE passthrough
  Tensor mix_positional_mean_mag;               // scalar helper for losses
};

EncodeGraph build_encode_graph(ad::Tape& tp, const std::vector<ad::VarId>& params,
                               const MaskNetConfig& cfg,
                               const dsp::StftTensor& mix,
                               const dsp::MelFilterbank& fb,
                               const EncodeOptions& opts);

// Network input from a 6-channel mix STFT: log(1 + mel power) of the 5
// positional channels.
Tensor encoder_input(const dsp::StftTensor& mix, const dsp::MelFilterbank& fb);

// Full inference path (Fig-style encoder only): 5.1 waveform in,
// production out.
spatial::ObjectProduction encode(const ParamStore& params, const MaskNetConfig& cfg,
                                 const dsp::Waveform& mix,
                                 const EncodeOptions& opts = {});

// Extraction with externally supplied masks (oracle and IBM paths).
// Linear masks: per source, [5][T][F] over the positional channels.
spatial::ObjectProduction extract_from_linear_masks(
    const dsp::StftTensor& mix, const std::vector<Tensor>& object_masks_linear,
    const Tensor* bed_mask_linear, const EncodeOptions& opts);
spatial::ObjectProduction extract_from_mel_masks(const dsp::StftTensor& mix,
                                                 const MaskSet& masks,
                                                 const dsp::MelFilterbank& fb,
                                                 const EncodeOptions& opts);

// Versioned binary checkpoint: named shapes + raw little-endian f64 data.
// Layout documented in the README.
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const MaskNetConfig& cfg);
ParamStore load_checkpoint(const std::string& path, MaskNetConfig* cfg_out);
// Throws DataError if the checkpoint does not match cfg's shapes.
ParamStore load_checkpoint_for(const std::string& path, const MaskNetConfig& cfg);

}  // namespace objx::model

#endif  // OBJX_MODEL_HPP
