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

#include <cmath>

#include "doctest.h"
#include "objx/dsp.hpp"
#include "objx/errors.hpp"
#include "objx/threading.hpp"
#include "test_util.hpp"

using namespace objx;
using namespace objx::dsp;

namespace {

Waveform mono_wave(std::vector<double> x) {
  Waveform w;
  w.samples.push_back(std::move(x));
  return w;
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

TEST_CASE("stft of silence is zero") {
  auto w = Waveform::zeros(1, kExcerptSamples);
  auto s = stft(w);
  CHECK(s.frames() == kFrames);
  CHECK(s.freqs() == kFreqs);
  for (double v : s.re.v) CHECK(v == 0.0);
  for (double v : s.im.v) CHECK(v == 0.0);
}

TEST_CASE("stft of an impulse at sample 1024 has flat unit magnitude in frame 1") {
  auto w = Waveform::zeros(1, kExcerptSamples);
  w.samples[0][1024] = 1.0;
  auto s = stft(w);
  // The impulse sits at the window center of frame 1 where Hann == 1, so
  // the frame's spectrum is flat at the window peak.
  for (int f = 0; f < kFreqs; ++f) {
    const double re = s.re[static_cast<size_t>(1 * kFreqs + f)];
    const double im = s.im[static_cast<size_t>(1 * kFreqs + f)];
    CHECK(std::sqrt(re * re + im * im) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("1 kHz sine peaks at bin 43") {
  std::vector<double> x(static_cast<size_t>(kExcerptSamples));
  for (int64_t i = 0; i < kExcerptSamples; ++i)
    x[static_cast<size_t>(i)] =
        std::sin(2.0 * 3.14159265358979323846 * 1000.0 * i / kSampleRate);
  auto s = stft(mono_wave(std::move(x)));
  std::vector<double> mean_mag(static_cast<size_t>(kFreqs), 0.0);
  for (int t = 0; t < kFrames; ++t)
    for (int f = 0; f < kFreqs; ++f) {
      const double re = s.re[static_cast<size_t>(t * kFreqs + f)];
      const double im = s.im[static_cast<size_t>(t * kFreqs + f)];
      mean_mag[static_cast<size_t>(f)] += std::sqrt(re * re + im * im);
    }
  int argmax = 0;
  for (int f = 1; f < kFreqs; ++f)
    if (mean_mag[static_cast<size_t>(f)] > mean_mag[static_cast<size_t>(argmax)]) argmax = f;
  CHECK(argmax == 43);  // round(1000 * 2048 / 48000)
}

TEST_CASE("istft inverts stft within 1e-6 on the covered region") {
  auto w = mono_wave(testutil::random_wave(kExcerptSamples, 99));
  auto back = istft(stft(w));
  REQUIRE(back.length() == kExcerptSamples);
  // The final hop has single-window coverage and tapers by design.
  double max_err = 0.0;
  for (int64_t i = 0; i < kExcerptSamples - kHop; ++i)
    max_err = std::max(max_err, std::fabs(back.samples[0][static_cast<size_t>(i)] -
                                          w.samples[0][static_cast<size_t>(i)]));
  CHECK(max_err < 1e-6);
  // The taper never amplifies: synthesis output stays within the input's
  // amplitude range over the whole excerpt.
  double in_peak = 0.0, out_tail_peak = 0.0;
  for (int64_t i = 0; i < kExcerptSamples; ++i)
    in_peak = std::max(in_peak, std::fabs(w.samples[0][static_cast<size_t>(i)]));
  for (int64_t i = kExcerptSamples - kHop; i < kExcerptSamples; ++i)
    out_tail_peak = std::max(out_tail_peak,
                             std::fabs(back.samples[0][static_cast<size_t>(i)]));
  CHECK(out_tail_peak <= in_peak * (1.0 + 1e-9));
}

TEST_CASE("istft of zeros is silence; identity mask changes nothing") {
  auto z = StftTensor::zeros(1, 16, kFreqs);
  auto w = istft(z);
  for (double v : w.samples[0]) CHECK(v == 0.0);

  auto s = testutil::random_stft(1, 16, 3);
  Tensor ones(s.re.shape, 1.0);
  auto masked = apply_mask(s, ones);
  auto a = istft(s), b = istft(masked);
  for (size_t i = 0; i < a.samples[0].size(); ++i)
    CHECK(a.samples[0][i] == b.samples[0][i]);
}

TEST_CASE("stft input validation") {
  auto short_wave = Waveform::zeros(1, 4096);
  CHECK_THROWS_AS(stft(short_wave), ShapeError);
  auto w = Waveform::zeros(1, kExcerptSamples);
  w.samples[0][5] = std::nan("");
  CHECK_THROWS_AS(stft(w), ValidationError);
}

TEST_CASE("stft is linear") {
  auto w1 = testutil::random_wave(8192, 1);
  auto w2 = testutil::random_wave(8192, 2);
  const double a = 0.7, b = -1.3;
  std::vector<double> mix(w1.size());
  for (size_t i = 0; i < mix.size(); ++i) mix[i] = a * w1[i] + b * w2[i];
  auto s1 = stft_mono(w1), s2 = stft_mono(w2), sm = stft_mono(mix);
  for (int64_t i = 0; i < sm.re.numel(); ++i) {
    const double expect = a * s1.re[i] + b * s2.re[i];
    CHECK(std::fabs(sm.re[i] - expect) <=
          1e-9 * std::max(1.0, std::fabs(expect)));
  }
}

TEST_CASE("mel filterbank invariants and band-64 center") {
  auto fb = build_mel_filterbank();
  CHECK(fb.weights[0] > 0.0);  // band 0 covers bin 0 via the edge clamp
  for (int f = 0; f < fb.n_freqs; ++f) CHECK(fb.colsum[static_cast<size_t>(f)] > 0.0);
  for (int b = 0; b < fb.n_bands; ++b) {
    double s = 0.0;
    for (int f = 0; f < fb.n_freqs; ++f) s += fb.weights[static_cast<size_t>(b * fb.n_freqs + f)];
    CHECK(s > 0.0);
  }
  // Centers sit uniformly on the mel scale from 0 to f_max.
  const double expect = mel_to_hz(hz_to_mel(24000.0) * 65.0 / 129.0);
  const double bin_width = 24000.0 / 1024.0;
  CHECK(std::fabs(fb.center_hz[64] - expect) < bin_width);
}

TEST_CASE("to_melgram") {
  auto fb = build_mel_filterbank();
  auto z = StftTensor::zeros(1, 4, kFreqs);
  auto mg = to_melgram(z, fb);
  for (double v : mg.power.v) CHECK(v == 0.0);

  // Single nonzero bin only lights bands covering it.
  auto s = StftTensor::zeros(1, 1, kFreqs);
  const int f0 = 500;
  s.re[500] = 2.0;
  auto m = to_melgram(s, fb);
  for (int b = 0; b < fb.n_bands; ++b) {
    const double w = fb.weights[static_cast<size_t>(b * fb.n_freqs + f0)];
    if (w > 0.0)
      CHECK(m.power[static_cast<size_t>(b)] == doctest::Approx(4.0 * w));
    else
      CHECK(m.power[static_cast<size_t>(b)] == 0.0);
  }

  // White frame: band power equals the band's weight sum.
  auto white = StftTensor::zeros(1, 1, kFreqs);
  for (int f = 0; f < kFreqs; ++f) white.re[static_cast<size_t>(f)] = 1.0;
  auto mw = to_melgram(white, fb);
  for (int b = 0; b < fb.n_bands; ++b) {
    double expect = 0.0;
    for (int f = 0; f < kFreqs; ++f)
      expect += fb.weights[static_cast<size_t>(b * fb.n_freqs + f)];
    CHECK(mw.power[static_cast<size_t>(b)] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("broadcast_mel_mask") {
  auto fb = build_mel_filterbank();
  std::vector<double> ones(static_cast<size_t>(fb.n_bands), 1.0);
  auto lin = broadcast_mel_mask(ones, fb);
  for (double v : lin) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> zeros(static_cast<size_t>(fb.n_bands), 0.0);
  for (double v : broadcast_mel_mask(zeros, fb)) CHECK(v == 0.0);

  // One-hot band: each bin receives that band's normalized weight share.
  std::vector<double> hot(static_cast<size_t>(fb.n_bands), 0.0);
  hot[40] = 1.0;
  auto l = broadcast_mel_mask(hot, fb);
  for (int f = 0; f < fb.n_freqs; ++f) {
    const double expect = fb.weights[static_cast<size_t>(40 * fb.n_freqs + f)] /
                          fb.colsum[static_cast<size_t>(f)];
    CHECK(l[static_cast<size_t>(f)] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(l[static_cast<size_t>(f)] >= 0.0);
    CHECK(l[static_cast<size_t>(f)] <= 1.0 + 1e-12);
  }
}

TEST_CASE("apply_mask scales magnitudes and keeps phase") {
  auto s = testutil::random_stft(2, 8, 11);
  Tensor half(s.re.shape, 0.5);
  auto out = apply_mask(s, half);
  for (int64_t i = 0; i < s.re.numel(); ++i) {
    CHECK(out.re[i] == doctest::Approx(0.5 * s.re[i]));
    CHECK(out.im[i] == doctest::Approx(0.5 * s.im[i]));
  }
  Tensor zero(s.re.shape, 0.0);
  auto z = apply_mask(s, zero);
  for (double v : z.re.v) CHECK(v == 0.0);

  Tensor bad(s.re.shape, 1.5);
  CHECK_THROWS_AS(apply_mask(s, bad), ValidationError);
}

TEST_CASE("stft and istft are bit-identical across thread counts") {
  auto w = Waveform::zeros(6, kExcerptSamples);
  Rng rng(123);
  for (auto& ch : w.samples)
    for (auto& v : ch) v = 0.1 * rng.uniform(-1.0, 1.0);
  threads::set(1);
  auto s1 = stft(w);
  auto b1 = istft(s1);
  threads::set(2);
  auto s2 = stft(w);
  auto b2 = istft(s2);
  threads::set(1);
  for (int64_t i = 0; i < s1.re.numel(); ++i) {
    REQUIRE(s1.re[i] == s2.re[i]);
    REQUIRE(s1.im[i] == s2.im[i]);
  }
  for (int c = 0; c < 6; ++c)
    for (int64_t i = 0; i < b1.length(); ++i)
      REQUIRE(b1.samples[static_cast<size_t>(c)][static_cast<size_t>(i)] ==
              b2.samples[static_cast<size_t>(c)][static_cast<size_t>(i)]);
}

TEST_CASE("masking never increases per-bin magnitude") {
  auto s = testutil::random_stft(1, 8, 13);
  auto mask = testutil::random_tensor(s.re.shape, 14, 0.0, 1.0);
  auto out = apply_mask(s, mask);
  for (int64_t i = 0; i < s.re.numel(); ++i) {
    const double m0 = std::hypot(s.re[i], s.im[i]);
    const double m1 = std::hypot(out.re[i], out.im[i]);
    CHECK(m1 <= m0 + 1e-15);
  }
}
