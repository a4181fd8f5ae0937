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

#ifndef OBJX_DSP_HPP
#define OBJX_DSP_HPP

#include <string>
#include <vector>

#include "objx/autodiff.hpp"
#include "objx/tensor.hpp"

namespace objx::dsp {

// Fixed pipeline format: 48 kHz excerpts of 256*1024 samples analyzed with a
// 2048-point Hann window at hop 1024, giving 256 frames x 1025 bins.
constexpr int kSampleRate = 48000;
constexpr int kFftSize = 2048;
constexpr int kHop = 1024;
constexpr int kFrames = 256;
constexpr int kFreqs = 1025;
constexpr int64_t kExcerptSamples = 262144;
constexpr int kMelBands = 128;
constexpr double kFMax = 24000.0;

struct Waveform {
  std::vector<std::vector<double>> samples;  // [channel][n]
  int sample_rate = kSampleRate;
  std::vector<std::string> labels;

  int channels() const { return static_cast<int>(samples.size()); }
  int64_t length() const {
    return samples.empty() ? 0 : static_cast<int64_t>(samples[0].size());
  }
  static Waveform zeros(int channels, int64_t n);
};

// Complex spectrogram, stored as separate real/imag [C][T][F] tensors.
struct StftTensor {
  Tensor re, im;

  int channels() const { return re.ndim() == 3 ? re.dim(0) : 0; }
  int frames() const { return re.ndim() == 3 ? re.dim(1) : 0; }
  int freqs() const { return re.ndim() == 3 ? re.dim(2) : 0; }
  static StftTensor zeros(int c, int t, int f);
  void check_consistent(const char* where) const;
};

struct MelGram {
  Tensor power;  // [C][T][B]
};

struct MelFilterbank {
  int n_bands = 0;
  int n_freqs = 0;
  double f_max = 0.0;
  Tensor weights;               // [B][F]
  std::vector<int> lo, hi;      // nonzero freq range per band
  std::vector<double> colsum;   // total weight per freq bin
  std::vector<double> center_hz;

  ad::MelView view() const {
    // Pointers into this filterbank; it must outlive any tape using them.
    return ad::MelView{n_bands, n_freqs, weights.data(), lo.data(), hi.data(),
                       colsum.data()};
  }
};

const std::vector<double>& hann_window();

// Strict pipeline entry: 262144 samples per channel, 48 kHz, finite.
StftTensor stft(const Waveform& w);
// Same analysis for any length that is a multiple of the hop and >= one
// window; used by tests and tools on short synthetic excerpts.
StftTensor stft_flex(const Waveform& w);
StftTensor stft_mono(const std::vector<double>& samples);

// Normalized weighted overlap-add synthesis; output length frames*hop.
Waveform istft(const StftTensor& s);

MelFilterbank build_mel_filterbank(int n_bands = kMelBands,
                                   int n_freqs = kFreqs,
                                   double f_max = kFMax);

MelGram to_melgram(const StftTensor& s, const MelFilterbank& fb);

// Normalized transpose: linear[f] = sum_b m[b] w[b][f] / sum_b w[b][f].
std::vector<double> broadcast_mel_mask(const std::vector<double>& m,
                                       const MelFilterbank& fb);
Tensor broadcast_mel_mask(const Tensor& mel, const MelFilterbank& fb);

// Elementwise complex scaling by a real mask in [0,1]; phase preserved.
StftTensor apply_mask(const StftTensor& s, const Tensor& mask);

}  // namespace objx::dsp

#endif  // OBJX_DSP_HPP
