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

#ifndef OBJX_EVAL_HPP
#define OBJX_EVAL_HPP

#include <array>
#include <map>
#include <string>
#include <vector>

#include "objx/dsp.hpp"
#include "objx/spatial.hpp"

namespace objx::eval {

constexpr double kSiSdrCapDb = 100.0;

// Scale-invariant signal-to-distortion ratio in dB, capped at +/-100.
double si_sdr(const std::vector<double>& est, const std::vector<double>& ref);

// Naive mono downmix (L+R+C+Ls+Rs)/5; LFE excluded.
std::vector<double> baseline_mono(const dsp::Waveform& mix51);

// (2L+C)/3, (2R+C)/3, (Ls+Rs)/2 in that order.
std::array<std::vector<double>, 3> baseline_three(const dsp::Waveform& mix51);

// Bypass of the input 5.1 directly to the bed channels.
dsp::Waveform baseline_bed(const dsp::Waveform& mix51);

// Ideal binary masks from the ground truth: per object/channel/bin, 1 iff
// the object dominates the rest of the mix; optionally decided on mel-band
// energies and broadcast back. Bed = complement, so objects + bed
// partition the mix.
spatial::ObjectProduction ibm_extract(const dsp::StftTensor& mix,
                                      const spatial::ObjectProduction& truth,
                                      bool mel_grouped);

struct PermResult {
  std::vector<int> perm;        // est index assigned to each reference slot
  std::vector<double> si_sdr;   // per reference slot
};

// Exhaustive search (n <= 3): max median, ties by max mean, then first in
// lexicographic order. score[i][j] = si_sdr(est_i, ref_j).
PermResult best_permutation_from_matrix(
    const std::vector<std::vector<double>>& score);
PermResult best_permutation(const std::vector<std::vector<double>>& est,
                            const std::vector<std::vector<double>>& ref);

struct EvalRow {
  std::string excerpt;
  std::string method;
  std::string slot;  // obj_<i> or bed
  double si_sdr_db = 0.0;
  double baseline_db = 0.0;
  double si_sdri_db = 0.0;
  std::string permutation;
};

struct FiveNumber {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  int count = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::map<std::string, FiveNumber> object_summary;  // SI-SDRi per method
  std::map<std::string, FiveNumber> bed_summary;
  std::vector<std::string> warnings;
};

struct EvalOptions {
  std::string method_dir;          // production per excerpt; may be empty
  std::string method_label = "method";
  bool include_ibm = true;
  int jobs = 1;
};

// Runs the full methodology over a dataset directory written by
// make_eval_set: per-excerpt SI-SDR with best permutation, downmix + bed
// bypass baselines, IBM oracles, SI-SDRi, aggregate five-number summaries.
EvalReport evaluate(const std::string& dataset_dir, const EvalOptions& opts);

// Interpolated quantile (rank q*(n-1)) of unsorted values.
double quantile(std::vector<double> values, double q);
FiveNumber five_number(const std::vector<double>& values);

void write_report_csv(const std::string& path, const EvalReport& report);
void write_boxplot_csv(const std::string& path,
                       const std::map<std::string, FiveNumber>& summary);

}  // namespace objx::eval

#endif  // OBJX_EVAL_HPP
