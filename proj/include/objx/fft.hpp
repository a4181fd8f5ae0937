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

#ifndef OBJX_FFT_HPP
#define OBJX_FFT_HPP

#include <complex>
#include <vector>

namespace objx {

// Iterative radix-2 complex FFT with precomputed twiddles. Power-of-two
// sizes only.
class Fft {
 public:
  explicit Fft(int n);
  int size() const { return n_; }
  void forward(std::complex<double>* x) const;
  // Unscaled inverse; caller divides by n.
  void inverse(std::complex<double>* x) const;

 private:
  void transform(std::complex<double>* x, bool inv) const;
  int n_;
  int log2n_;
  std::vector<int> rev_;
  std::vector<std::complex<double>> tw_;   // e^{-2pi i k / n}, k < n/2
};

// Real-input FFT of size n via a packed complex FFT of size n/2.
// Stateless after construction; one plan may serve many threads.
class RealFft {
 public:
  explicit RealFft(int n);
  int size() const { return n_; }
  // x: n reals -> spec: n/2+1 bins.
  void forward(const double* x, std::complex<double>* spec) const;
  // spec: n/2+1 bins (conjugate symmetry implied) -> x: n reals.
  void inverse(const std::complex<double>* spec, double* x) const;

 private:
  int n_;
  Fft half_;
  std::vector<std::complex<double>> tw_;   // e^{-2pi i k / n}, k <= n/2
};

}  // namespace objx

#endif  // OBJX_FFT_HPP
