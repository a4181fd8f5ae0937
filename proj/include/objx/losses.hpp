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

#ifndef OBJX_LOSSES_HPP
#define OBJX_LOSSES_HPP

#include <map>
#include <string>

#include "objx/autodiff.hpp"
#include "objx/model.hpp"
#include "objx/spatial.hpp"

namespace objx::loss {

// Relative magnitudes of each term against a unit-scale reconstruction
// loss; the heaviest penalties sit on bed content and acceleration.
struct LossWeights {
  std::map<std::string, double> recon_layout = {
      {"2.0", 0.5}, {"5.1", 1.0}, {"7.1", 1.5}, {"9.1", 1.5}};

  double bed_content = 0.5;
  double speaker_proximity = 0.05;
  double slow_motion = 0.02;
  double acceleration = 0.5;
  double object_proximity = 0.02;
  double traj_correlation = 0.01;
  double content_correlation = 0.05;

  // Term thresholds, sized so clean synthetic trajectories sit in the
  // near-zero-penalty region.
  double speaker_sigma = 0.1;
  double v_min = 0.002;            // units/frame
  double a_max = 0.01;             // units/frame^2
  double object_sigma = 0.1;

  void validate(bool supervised) const;
  double reg_weight(const std::string& term) const;
  static const std::vector<std::string>& term_names();
};

struct LossBreakdown {
  double total = 0.0;
  std::map<std::string, double> recon;  // raw per-layout loss
  std::map<std::string, double> reg;    // raw per-term value
  // total == sum_l w_l recon_l / sum_l w_l + sum_t w_t reg_t.
  double recombine(const LossWeights& w) const;
};

// Magnitude-domain L1: mean over channel, frame, freq of ||pred|-|ref||.
double recon_loss(const dsp::StftTensor& pred, const dsp::StftTensor& ref);

// ---- graph builders (training path) ----

struct LossGraph {
  ad::VarId total = ad::kNoVar;
  std::map<std::string, ad::VarId> recon;
  std::map<std::string, ad::VarId> reg;
  LossBreakdown values(const ad::Tape& tp) const;
};

LossGraph supervised_loss_graph(ad::Tape& tp, const model::EncodeGraph& g,
                                const std::map<std::string, dsp::StftTensor>& refs,
                                const LossWeights& w);
LossGraph unsupervised_loss_graph(ad::Tape& tp, const model::EncodeGraph& g,
                                  const dsp::StftTensor& mix51,
                                  const LossWeights& w);

// Constant-production graph: the same loss graph evaluated on a plain
// production (used by the plain entry points below and by tests).
model::EncodeGraph production_graph(ad::Tape& tp,
                                    const spatial::ObjectProduction& prod,
                                    const dsp::StftTensor* mix51);

// ---- plain evaluations ----

LossBreakdown supervised_loss(const spatial::ObjectProduction& prod,
                              const std::map<std::string, dsp::StftTensor>& refs,
                              const LossWeights& w);
LossBreakdown unsupervised_loss(const spatial::ObjectProduction& prod,
                                const dsp::StftTensor& mix51,
                                const LossWeights& w);

// Regularization terms (i)-(vii); normalized to [0,1] where possible.
double reg_bed_content(const spatial::ObjectProduction& prod,
                       const dsp::StftTensor& mix51);
double reg_speaker_proximity(const spatial::ObjectProduction& prod,
                             double sigma = 0.1);
double reg_slow_motion(const spatial::ObjectProduction& prod,
                       double v_min = 0.002);
double reg_acceleration(const spatial::ObjectProduction& prod,
                        double a_max = 0.01);
double reg_object_proximity(const spatial::ObjectProduction& prod,
                            double sigma = 0.1);
double reg_traj_correlation(const spatial::ObjectProduction& prod);
double reg_content_correlation(const spatial::ObjectProduction& prod);

}  // namespace objx::loss

#endif  // OBJX_LOSSES_HPP
