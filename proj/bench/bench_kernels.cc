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

// Times the hot kernels: serial reference implementations against the
// OpenMP versions. Usage: objx_bench [max_threads] [reps].

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "objx/dsp.hpp"
#include "objx/kernels.hpp"
#include "objx/rng.hpp"
#include "objx/threading.hpp"

using namespace objx;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.v) v = rng.uniform(-1.0, 1.0);
  return t;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void bench(const std::string& name, int max_threads, int reps,
           const std::function<void()>& serial_fn,
           const std::function<void()>& parallel_fn) {
  threads::set(1);
  const double serial = time_ms(serial_fn, reps);
  std::printf("%-24s serial %8.2f ms", name.c_str(), serial);
  for (int n = 2; n <= max_threads; n *= 2) {
    threads::set(n);
    const double ms = time_ms(parallel_fn, reps);
    std::printf(" | %dt %8.2f ms (x%.2f)", n, ms, serial / ms);
  }
  threads::set(1);
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  const int max_threads = argc > 1 ? std::atoi(argv[1]) : 2;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 5;

  // Shapes from the mask network's heaviest layer and the spectral stage.
  const int ci = 48, h = 256, w = 128, co = 16;
  auto in = random_tensor({ci, h, w}, 1);
  auto wgt = random_tensor({co, ci, 3, 3}, 2);
  auto bias = random_tensor({co}, 3);
  Tensor out({co, h, w});
  Tensor din({ci, h, w});
  Tensor dw({co, ci, 3, 3}), db({co});

  bench("conv2d_forward", max_threads, reps,
        [&] {
          kern::conv2d_forward_serial(in.data(), wgt.data(), bias.data(), ci, h,
                                      w, co, 3, out.data());
        },
        [&] {
          kern::conv2d_forward(in.data(), wgt.data(), bias.data(), ci, h, w, co,
                               3, out.data());
        });
  bench("conv2d_backward_input", max_threads, reps,
        [&] {
          din.fill(0.0);
          kern::conv2d_backward_input_serial(out.data(), wgt.data(), ci, h, w,
                                             co, 3, din.data());
        },
        [&] {
          din.fill(0.0);
          kern::conv2d_backward_input(out.data(), wgt.data(), ci, h, w, co, 3,
                                      din.data());
        });
  bench("conv2d_backward_params", max_threads, reps,
        [&] {
          dw.fill(0.0);
          db.fill(0.0);
          kern::conv2d_backward_params_serial(out.data(), in.data(), ci, h, w,
                                              co, 3, dw.data(), db.data());
        },
        [&] {
          dw.fill(0.0);
          db.fill(0.0);
          kern::conv2d_backward_params(out.data(), in.data(), ci, h, w, co, 3,
                                       dw.data(), db.data());
        });

  const int C = 5, T = 256, F = 1025;
  auto g = random_tensor({C, T}, 4);
  auto x = random_tensor({C, T, F}, 5);
  auto add = random_tensor({T, F}, 6);
  Tensor o({T, F});
  bench("contract_channels", max_threads, reps,
        [&] {
          kern::contract_channels_forward_serial(g.data(), x.data(), add.data(),
                                                 C, T, F, o.data());
        },
        [&] {
          kern::contract_channels_forward(g.data(), x.data(), add.data(), C, T,
                                          F, o.data());
        });

  dsp::Waveform wav = dsp::Waveform::zeros(6, dsp::kExcerptSamples);
  Rng rng(7);
  for (auto& ch : wav.samples)
    for (auto& v : ch) v = 0.1 * rng.uniform(-1.0, 1.0);
  bench("stft+istft (6ch)", max_threads, reps,
        [&] { dsp::istft(dsp::stft(wav)); },
        [&] { dsp::istft(dsp::stft(wav)); });
  return 0;
}
