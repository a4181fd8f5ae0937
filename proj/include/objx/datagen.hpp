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

#ifndef OBJX_DATAGEN_HPP
#define OBJX_DATAGEN_HPP

#include <map>
#include <string>
#include <vector>

#include "objx/dsp.hpp"
#include "objx/spatial.hpp"

namespace objx::datagen {

enum class SourceKind { kTone, kChirp, kNoiseBurst, kPulseTrain, kCorpus };

std::string kind_name(SourceKind k);
SourceKind kind_from_name(const std::string& name);

struct TrajectorySpec {
  int waypoints = 4;  // 1 = static
};

struct LevelPolicy {
  double object_rms = 0.1;
  double bed_gain_db = 0.0;  // bed aggregate level relative to the objects
};

struct SceneSpec {
  int n_objects = 1;
  uint64_t seed = 0;
  std::vector<SourceKind> kinds = {SourceKind::kTone, SourceKind::kChirp,
                                   SourceKind::kNoiseBurst,
                                   SourceKind::kPulseTrain};
  TrajectorySpec traj;
  LevelPolicy level;
  std::string corpus_dir;  // required for SourceKind::kCorpus
};

// K uniform waypoints in [0.05,0.95]^2, natural cubic spline over the
// frames, clamped to the unit square. Deterministic per seed.
spatial::Trajectory gen_trajectory(const TrajectorySpec& spec, uint64_t seed,
                                   int frames = dsp::kFrames);

// Mono source, RMS-normalized to 0.1 full scale. Deterministic per seed.
std::vector<double> gen_source(SourceKind kind, uint64_t seed,
                               int64_t length = dsp::kExcerptSamples,
                               const std::string& corpus_dir = {});

// 6-channel bed: decorrelated pink noise on the positional channels plus a
// low-passed (<120 Hz) LFE, every channel at channel_rms.
dsp::Waveform gen_bed(uint64_t seed, double channel_rms = 0.1,
                      int64_t length = dsp::kExcerptSamples);

struct Scene {
  spatial::ObjectProduction truth;  // object STFTs + trajectories + bed STFT
  std::vector<std::vector<double>> object_waves;
  dsp::Waveform bed_wave;  // 6 channels
  std::map<std::string, dsp::StftTensor> renders;  // per layout
  std::vector<SourceKind> kinds;
  double object_rms = 0.1;
  double bed_rms = 0.1;
};

// Equal-RMS scene assembly plus reference renders for every layout.
Scene assemble_scene(const SceneSpec& spec);

// Writes excerpt_#### directories (mix WAVs per layout, per-object WAV +
// trajectory CSV, bed WAV) and a manifest at the root.
void make_eval_set(const SceneSpec& spec, int n_excerpts,
                   const std::string& out_dir, int jobs = 1);

// Trajectory CSV: header frame,x,y; 6-decimal fixed point.
void write_trajectory_csv(const std::string& path, const spatial::Trajectory& t);
spatial::Trajectory read_trajectory_csv(const std::string& path);

}  // namespace objx::datagen

#endif  // OBJX_DATAGEN_HPP
