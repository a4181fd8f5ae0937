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

#include "objx/dsp.hpp"

#include <cmath>
#include <complex>

#include "objx/errors.hpp"
#include "objx/fft.hpp"
#include "objx/threading.hpp"

namespace objx::dsp {

namespace {
constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
}  // namespace

Waveform Waveform::zeros(int channels, int64_t n) {
  Waveform w;
  w.samples.assign(static_cast<size_t>(channels),
                   std::vector<double>(static_cast<size_t>(n), 0.0));
  return w;
}

StftTensor StftTensor::zeros(int c, int t, int f) {
  StftTensor s;
  s.re = Tensor({c, t, f});
  s.im = Tensor({c, t, f});
  return s;
}

void StftTensor::check_consistent(const char* where) const {
  if (re.ndim() != 3 || !same_shape(re, im))
    throw ShapeError(std::string(where) + ": inconsistent stft tensor");
}

const std::vector<double>& hann_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kFftSize);
    for (int n = 0; n < kFftSize; ++n)
      v[static_cast<size_t>(n)] =
          0.5 - 0.5 * std::cos(2.0 * kPi * n / kFftSize);
    return v;
  }();
  return w;
}

namespace {

void validate_waveform(const Waveform& w, bool strict, const char* where) {
  if (w.channels() < 1) throw ShapeError(std::string(where) + ": no channels");
  const int64_t n = w.length();
  for (const auto& ch : w.samples) {
    if (static_cast<int64_t>(ch.size()) != n)
      throw ShapeError(std::string(where) + ": channel lengths differ");
    for (double v : ch)
      if (!std::isfinite(v))
        throw ValidationError(std::string(where) + ": non-finite sample");
  }
  if (strict) {
    if (w.sample_rate != kSampleRate)
      throw ValidationError(std::string(where) + ": sample rate must be 48000");
    if (n != kExcerptSamples)
      throw ShapeError(std::string(where) + ": excerpt must be " +
                       std::to_string(kExcerptSamples) + " samples, got " +
                       std::to_string(n));
  } else {
    if (n < kFftSize || n % kHop != 0)
      throw ShapeError(std::string(where) +
                       ": length must be a multiple of the hop and >= 2048");
  }
}

StftTensor stft_impl(const Waveform& w) {
  const int C = w.channels();
  const int64_t n = w.length();
  const int T = static_cast<int>(n / kHop);
  StftTensor out = StftTensor::zeros(C, T, kFreqs);
  const auto& win = hann_window();
  const RealFft fft(kFftSize);
  const int nt = threads::get();
#pragma omp parallel num_threads(nt) if (nt > 1)
  {
    std::vector<double> seg(kFftSize);
    std::vector<std::complex<double>> spec(kFreqs);
#pragma omp for schedule(static) collapse(2)
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < T; ++t) {
        const auto& x = w.samples[static_cast<size_t>(c)];
        // Frame t covers input samples [t*hop - hop, t*hop + hop).
        const int64_t start = static_cast<int64_t>(t) * kHop - kHop;
        for (int i = 0; i < kFftSize; ++i) {
          const int64_t j = start + i;
          const double v = (j >= 0 && j < n) ? x[static_cast<size_t>(j)] : 0.0;
          seg[static_cast<size_t>(i)] = v * win[static_cast<size_t>(i)];
        }
        fft.forward(seg.data(), spec.data());
        double* rp = out.re.data() + (static_cast<int64_t>(c) * T + t) * kFreqs;
        double* ip = out.im.data() + (static_cast<int64_t>(c) * T + t) * kFreqs;
        for (int f = 0; f < kFreqs; ++f) {
          rp[f] = spec[static_cast<size_t>(f)].real();
          ip[f] = spec[static_cast<size_t>(f)].imag();
        }
      }
  }
  return out;
}

}  // namespace

StftTensor stft(const Waveform& w) {
  validate_waveform(w, true, "stft");
  return stft_impl(w);
}

StftTensor stft_flex(const Waveform& w) {
  validate_waveform(w, false, "stft");
  return stft_impl(w);
}

StftTensor stft_mono(const std::vector<double>& samples) {
  Waveform w;
  w.samples.push_back(samples);
  return stft_flex(w);
}

Waveform istft(const StftTensor& s) {
  s.check_consistent("istft");
  if (s.freqs() != kFreqs)
    throw ShapeError("istft: expected " + std::to_string(kFreqs) + " bins");
  const int C = s.channels(), T = s.frames();
  const int64_t n = static_cast<int64_t>(T) * kHop;
  const int64_t padded = n + 2 * kHop;
  const auto& win = hann_window();

  // Normalize by the periodic window-squared sum (bounded in [0.5, 1]).
  // Reconstruction is exact wherever overlap coverage is complete, i.e.
  // everywhere except the final hop, which only the last window's decaying
  // tail reaches; that region tapers instead of amplifying. Exact division
  // by the true coverage would blow up heavily masked spectra there.
  std::vector<double> den(static_cast<size_t>(kHop));
  for (int a = 0; a < kHop; ++a)
    den[static_cast<size_t>(a)] =
        win[static_cast<size_t>(a)] * win[static_cast<size_t>(a)] +
        win[static_cast<size_t>(a + kHop)] * win[static_cast<size_t>(a + kHop)];

  Waveform out = Waveform::zeros(C, n);
  const RealFft fft(kFftSize);
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static)
  for (int c = 0; c < C; ++c) {
    std::vector<double> acc(static_cast<size_t>(padded), 0.0);
    std::vector<double> seg(kFftSize);
    std::vector<std::complex<double>> spec(kFreqs);
    for (int t = 0; t < T; ++t) {
      const double* rp = s.re.data() + (static_cast<int64_t>(c) * T + t) * kFreqs;
      const double* ip = s.im.data() + (static_cast<int64_t>(c) * T + t) * kFreqs;
      for (int f = 0; f < kFreqs; ++f)
        spec[static_cast<size_t>(f)] = {rp[f], ip[f]};
      fft.inverse(spec.data(), seg.data());
      const int64_t off = static_cast<int64_t>(t) * kHop;
      for (int i = 0; i < kFftSize; ++i)
        acc[static_cast<size_t>(off + i)] += seg[static_cast<size_t>(i)] *
                                             win[static_cast<size_t>(i)];
    }
    auto& dst = out.samples[static_cast<size_t>(c)];
    for (int64_t i = 0; i < n; ++i) {
      const double d = den[static_cast<size_t>(i % kHop)];
      dst[static_cast<size_t>(i)] = acc[static_cast<size_t>(i + kHop)] / d;
    }
  }
  return out;
}

MelFilterbank build_mel_filterbank(int n_bands, int n_freqs, double f_max) {
  if (n_bands >= n_freqs)
    throw ShapeError("mel filterbank: need n_bands < n_freqs");
  MelFilterbank fb;
  fb.n_bands = n_bands;
  fb.n_freqs = n_freqs;
  fb.f_max = f_max;
  fb.weights = Tensor({n_bands, n_freqs});
  fb.lo.assign(static_cast<size_t>(n_bands), n_freqs);
  fb.hi.assign(static_cast<size_t>(n_bands), 0);
  fb.colsum.assign(static_cast<size_t>(n_freqs), 0.0);
  fb.center_hz.resize(static_cast<size_t>(n_bands));

  // Centers uniformly spaced on the mel scale; triangles of half-width one
  // grid step, with the first/last filters clamped flat at the edges.
  const double mel_max = hz_to_mel(f_max);
  const double step = mel_max / (n_bands + 1);
  std::vector<double> center(static_cast<size_t>(n_bands));
  for (int b = 0; b < n_bands; ++b) {
    center[static_cast<size_t>(b)] = step * (b + 1);
    fb.center_hz[static_cast<size_t>(b)] = mel_to_hz(center[static_cast<size_t>(b)]);
  }
  for (int f = 0; f < n_freqs; ++f) {
    const double hz = f_max * f / (n_freqs - 1);
    const double m = hz_to_mel(hz);
    for (int b = 0; b < n_bands; ++b) {
      double wgt;
      if (b == 0 && m <= center[0]) {
        wgt = 1.0;
      } else if (b == n_bands - 1 && m >= center[static_cast<size_t>(n_bands - 1)]) {
        wgt = 1.0;
      } else {
        wgt = 1.0 - std::fabs(m - center[static_cast<size_t>(b)]) / step;
        if (wgt < 0.0) wgt = 0.0;
      }
      if (wgt > 0.0) {
        fb.weights[static_cast<size_t>(b * n_freqs + f)] = wgt;
        fb.lo[static_cast<size_t>(b)] = std::min(fb.lo[static_cast<size_t>(b)], f);
        fb.hi[static_cast<size_t>(b)] = std::max(fb.hi[static_cast<size_t>(b)], f + 1);
        fb.colsum[static_cast<size_t>(f)] += wgt;
      }
    }
  }
  for (int b = 0; b < n_bands; ++b)
    if (fb.lo[static_cast<size_t>(b)] >= fb.hi[static_cast<size_t>(b)])
      throw ValidationError("mel filterbank: empty band " + std::to_string(b));
  return fb;
}

MelGram to_melgram(const StftTensor& s, const MelFilterbank& fb) {
  s.check_consistent("to_melgram");
  if (s.freqs() != fb.n_freqs)
    throw ShapeError("to_melgram: freq count does not match filterbank");
  const int C = s.channels(), T = s.frames(), F = fb.n_freqs, B = fb.n_bands;
  MelGram out;
  out.power = Tensor({C, T, B});
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static) collapse(2)
  for (int c = 0; c < C; ++c)
    for (int t = 0; t < T; ++t) {
      const double* rp = s.re.data() + (static_cast<int64_t>(c) * T + t) * F;
      const double* ip = s.im.data() + (static_cast<int64_t>(c) * T + t) * F;
      double* op = out.power.data() + (static_cast<int64_t>(c) * T + t) * B;
      for (int b = 0; b < B; ++b) {
        const double* w = fb.weights.data() + static_cast<int64_t>(b) * F;
        double acc = 0.0;
        for (int f = fb.lo[static_cast<size_t>(b)]; f < fb.hi[static_cast<size_t>(b)]; ++f)
          acc += w[f] * (rp[f] * rp[f] + ip[f] * ip[f]);
        op[b] = acc;
      }
    }
  return out;
}

std::vector<double> broadcast_mel_mask(const std::vector<double>& m,
                                       const MelFilterbank& fb) {
  if (static_cast<int>(m.size()) != fb.n_bands)
    throw ShapeError("broadcast_mel_mask: band count mismatch");
  std::vector<double> out(static_cast<size_t>(fb.n_freqs), 0.0);
  for (int b = 0; b < fb.n_bands; ++b) {
    const double mv = m[static_cast<size_t>(b)];
    if (mv == 0.0) continue;
    const double* w = fb.weights.data() + static_cast<int64_t>(b) * fb.n_freqs;
    for (int f = fb.lo[static_cast<size_t>(b)]; f < fb.hi[static_cast<size_t>(b)]; ++f)
      out[static_cast<size_t>(f)] += mv * w[f];
  }
  for (int f = 0; f < fb.n_freqs; ++f)
    out[static_cast<size_t>(f)] /= fb.colsum[static_cast<size_t>(f)];
  return out;
}

Tensor broadcast_mel_mask(const Tensor& mel, const MelFilterbank& fb) {
  if (mel.ndim() < 1 || mel.dim(mel.ndim() - 1) != fb.n_bands)
    throw ShapeError("broadcast_mel_mask: trailing dim must be band count");
  std::vector<int> oshape = mel.shape;
  oshape.back() = fb.n_freqs;
  Tensor out(oshape);
  const int64_t rows = mel.numel() / fb.n_bands;
  const int B = fb.n_bands, F = fb.n_freqs;
  for (int64_t r = 0; r < rows; ++r) {
    const double* m = mel.data() + r * B;
    double* o = out.data() + r * F;
    for (int b = 0; b < B; ++b) {
      const double mv = m[b];
      if (mv == 0.0) continue;
      const double* w = fb.weights.data() + static_cast<int64_t>(b) * F;
      for (int f = fb.lo[static_cast<size_t>(b)]; f < fb.hi[static_cast<size_t>(b)]; ++f)
        o[f] += mv * w[f];
    }
    for (int f = 0; f < F; ++f) o[f] /= fb.colsum[static_cast<size_t>(f)];
  }
  return out;
}

StftTensor apply_mask(const StftTensor& s, const Tensor& mask) {
  s.check_consistent("apply_mask");
  check_same_shape(s.re, mask, "apply_mask");
  for (int64_t i = 0; i < mask.numel(); ++i) {
    const double m = mask[i];
    if (!(m >= -1e-9 && m <= 1.0 + 1e-9))
      throw ValidationError("apply_mask: mask value outside [0,1]");
  }
  StftTensor out;
  out.re = Tensor(s.re.shape);
  out.im = Tensor(s.im.shape);
  for (int64_t i = 0; i < mask.numel(); ++i) {
    out.re[i] = s.re[i] * mask[i];
    out.im[i] = s.im[i] * mask[i];
  }
  return out;
}

}  // namespace objx::dsp
