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

#ifndef OBJX_SPATIAL_HPP
#define OBJX_SPATIAL_HPP

#include <string>
#include <vector>

#include "objx/autodiff.hpp"
#include "objx/dsp.hpp"

namespace objx::spatial {

// Planar position in the unit square: x left->right, y front->back.
struct Position {
  double x = 0.5;
  double y = 0.5;
};

struct Trajectory {
  std::vector<Position> p;
  int frames() const { return static_cast<int>(p.size()); }
};

// Per-frame speaker gains over a layout's positional channels (LFE excluded).
// Invariant: sum of squares == trim(y)^2.
struct GainVector {
  std::vector<double> g;
};

struct Speaker {
  std::string label;
  double x = 0.0;
  int channel = -1;     // index into the full channel list
  int positional = -1;  // index into the positional channel list
};

struct SpeakerRow {
  double y = 0.0;
  std::vector<Speaker> speakers;  // x strictly increasing
};

// Named speaker sets with their panning-row structure. Channel order is
// fixed per layout; 5.1 is L, R, C, LFE, Ls, Rs.
class SpeakerLayout {
 public:
  static const SpeakerLayout& get(const std::string& name);
  static const std::vector<std::string>& names();  // 2.0, 5.1, 7.1, 9.1

  const std::string& name() const { return name_; }
  const std::vector<SpeakerRow>& rows() const { return rows_; }
  const std::vector<std::string>& channel_names() const { return channels_; }
  int num_channels() const { return static_cast<int>(channels_.size()); }
  int num_positional() const { return num_channels() - (lfe_index_ >= 0 ? 1 : 0); }
  int lfe_index() const { return lfe_index_; }
  bool has_lfe() const { return lfe_index_ >= 0; }
  // Positional channel index -> full channel index.
  int full_channel(int positional) const { return pos_to_full_[static_cast<size_t>(positional)]; }
  const std::vector<Position>& speaker_positions() const { return positions_; }

  SpeakerLayout(std::string name, std::vector<std::string> channels,
                int lfe_index, std::vector<SpeakerRow> rows);

 private:
  std::string name_;
  std::vector<std::string> channels_;
  int lfe_index_ = -1;
  std::vector<SpeakerRow> rows_;
  std::vector<int> pos_to_full_;
  std::vector<Position> positions_;  // positional order
};

// An object-based production: n mono tracks with trajectories plus a 5.1
// bed (6 channels, incl. LFE). The encoder's latent/output format.
struct ObjectTrack {
  dsp::StftTensor stft;  // 1 channel
  Trajectory traj;
};

struct ObjectProduction {
  std::vector<ObjectTrack> objects;
  dsp::StftTensor bed;  // 6 channels, 5.1 order
};

struct DepanOptions {
  bool smooth = false;   // EMA on estimates; kept off for round-trip tests
  double alpha = 0.2;    // EMA new-sample weight
  double eps = 1e-12;    // inside square roots / denominators
  double silence_eps = 1e-9;  // frames below this hold the previous estimate
};

// Object level reduction toward the back: 0 dB at y=0, -3 dB at y=1,
// linear in dB.
double trim(double y);
constexpr double kTrimLogSlope = -0.34538776394910684;  // -3/20 * ln 10

// Dual-balance constant-power panning with trim.
GainVector pan_gains(Position p, const SpeakerLayout& layout);

// Gains plus analytic partials, positional order. Any of dgdx/dgdy may be
// null. Core routine shared by the plain and tape paths.
void pan_gains_detail(const SpeakerLayout& layout, double x, double y,
                      bool with_trim, double* g, double* dgdx, double* dgdy);

// Decoder of the production: per-frame gains over objects plus the bed
// fold; LFE carries only the bed LFE.
dsp::StftTensor render(const ObjectProduction& prod, const SpeakerLayout& layout);

dsp::StftTensor render_single_object(const dsp::StftTensor& mono,
                                     const Trajectory& traj,
                                     const SpeakerLayout& layout);

// Position estimation from 5.1 channel energies (LFE ignored).
Trajectory depan(const dsp::StftTensor& obj51, const DepanOptions& opts = {});

// Per-frame division by trim(y); inverse of the renderer's trimming.
dsp::StftTensor detrim(const dsp::StftTensor& mono, const Trajectory& traj);
dsp::StftTensor apply_trim(const dsp::StftTensor& mono, const Trajectory& traj);

// Least-squares projection onto the trim-free gain vector, then de-trim.
// Exact recovery for clean single-object renders.
dsp::StftTensor extract_mono(const dsp::StftTensor& obj51, const Trajectory& traj);

// Fold of the 5 positional 5.1 bed channels into a target layout's
// positional channels: weights[target_positional][source_positional].
std::vector<std::vector<double>> bed_fold_weights(const SpeakerLayout& layout);

// ---- tape ops ----

// x, y: [T] -> gains [P][T].
ad::VarId pan_gains_op(ad::Tape& tp, ad::VarId x, ad::VarId y,
                       const SpeakerLayout& layout, bool with_trim);

// energies [5][T] (positional 5.1 order L,R,C,Ls,Rs) -> [2][T] (x; y).
ad::VarId depan_op(ad::Tape& tp, ad::VarId energies, const DepanOptions& opts);

// y row [T] -> trim gains [T].
ad::VarId trim_row_op(ad::Tape& tp, ad::VarId y);

// Shared forward core; rec, when non-null, captures branch decisions for
// the adjoint. Energies laid out e[c*T + t], positional order L,R,C,Ls,Rs.
struct DepanRecord {
  std::vector<uint8_t> branch;  // 0 hold, 1 pair LC, 2 pair CR, 3 centroid
  std::vector<double> raw_x, raw_y;
};
void depan_core(const double* e, int T, const DepanOptions& opts, double* x,
                double* y, DepanRecord* rec);

}  // namespace objx::spatial

#endif  // OBJX_SPATIAL_HPP
