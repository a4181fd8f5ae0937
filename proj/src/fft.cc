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

#include "objx/fft.hpp"

#include <cmath>

#include "objx/errors.hpp"

namespace objx {

namespace {
constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

Fft::Fft(int n) : n_(n) {
  if (!is_pow2(n)) throw ShapeError("fft size must be a power of two");
  log2n_ = 0;
  while ((1 << log2n_) < n) ++log2n_;
  rev_.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < log2n_; ++b) r |= ((i >> b) & 1) << (log2n_ - 1 - b);
    rev_[static_cast<size_t>(i)] = r;
  }
  tw_.resize(static_cast<size_t>(n / 2));
  for (int k = 0; k < n / 2; ++k) {
    double a = -2.0 * kPi * k / n;
    tw_[static_cast<size_t>(k)] = {std::cos(a), std::sin(a)};
  }
}

void Fft::transform(std::complex<double>* x, bool inv) const {
  for (int i = 0; i < n_; ++i) {
    int r = rev_[static_cast<size_t>(i)];
    if (i < r) std::swap(x[i], x[r]);
  }
  for (int len = 2; len <= n_; len <<= 1) {
    int half = len >> 1;
    int step = n_ / len;
    for (int base = 0; base < n_; base += len) {
      for (int k = 0; k < half; ++k) {
        std::complex<double> w = tw_[static_cast<size_t>(k * step)];
        if (inv) w = std::conj(w);
        std::complex<double> u = x[base + k];
        std::complex<double> v = x[base + k + half] * w;
        x[base + k] = u + v;
        x[base + k + half] = u - v;
      }
    }
  }
}

void Fft::forward(std::complex<double>* x) const { transform(x, false); }
void Fft::inverse(std::complex<double>* x) const { transform(x, true); }

RealFft::RealFft(int n) : n_(n), half_(n / 2) {
  if (!is_pow2(n) || n < 4) throw ShapeError("real fft size must be 2^k >= 4");
  tw_.resize(static_cast<size_t>(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) {
    double a = -2.0 * kPi * k / n;
    tw_[static_cast<size_t>(k)] = {std::cos(a), std::sin(a)};
  }
}

void RealFft::forward(const double* x, std::complex<double>* spec) const {
  const int h = n_ / 2;
  std::vector<std::complex<double>> buf(static_cast<size_t>(h));
  for (int k = 0; k < h; ++k) buf[static_cast<size_t>(k)] = {x[2 * k], x[2 * k + 1]};
  half_.forward(buf.data());
  // Untangle even/odd spectra: E[k] = (Z[k]+conj(Z[h-k]))/2,
  // O[k] = -i (Z[k]-conj(Z[h-k]))/2, X[k] = E[k] + tw[k] O[k].
  spec[0] = {buf[0].real() + buf[0].imag(), 0.0};
  spec[h] = {buf[0].real() - buf[0].imag(), 0.0};
  for (int k = 1; k < h; ++k) {
    std::complex<double> zk = buf[static_cast<size_t>(k)];
    std::complex<double> zc = std::conj(buf[static_cast<size_t>(h - k)]);
    std::complex<double> e = 0.5 * (zk + zc);
    std::complex<double> o = std::complex<double>(0.0, -0.5) * (zk - zc);
    spec[k] = e + tw_[static_cast<size_t>(k)] * o;
  }
}

void RealFft::inverse(const std::complex<double>* spec, double* x) const {
  const int h = n_ / 2;
  std::vector<std::complex<double>> buf(static_cast<size_t>(h));
  // Recover E and O, repack Z = E + i O, inverse half-size FFT.
  for (int k = 0; k < h; ++k) {
    std::complex<double> xk = (k == 0) ? spec[0] : spec[k];
    std::complex<double> xh = std::conj(spec[h - k]);
    std::complex<double> e = 0.5 * (xk + xh);
    std::complex<double> o = std::conj(tw_[static_cast<size_t>(k)]) * (0.5 * (xk - xh));
    buf[static_cast<size_t>(k)] = e + std::complex<double>(0.0, 1.0) * o;
  }
  half_.inverse(buf.data());
  const double s = 1.0 / h;
  for (int k = 0; k < h; ++k) {
    x[2 * k] = buf[static_cast<size_t>(k)].real() * s;
    x[2 * k + 1] = buf[static_cast<size_t>(k)].imag() * s;
  }
}

}  // namespace objx
