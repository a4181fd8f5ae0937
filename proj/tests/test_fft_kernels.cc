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

#include <complex>
#include <vector>

#include "doctest.h"
#include "objx/fft.hpp"
#include "objx/kernels.hpp"
#include "objx/threading.hpp"
#include "test_util.hpp"

using namespace objx;

namespace {

// Independent oracle: quadratic-time DFT.
std::vector<std::complex<double>> naive_rdft(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> out(static_cast<size_t>(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = -2.0 * 3.14159265358979323846 * k * i / n;
      acc += x[static_cast<size_t>(i)] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[static_cast<size_t>(k)] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("real fft matches naive dft") {
  for (int n : {16, 256, 2048}) {
    auto x = testutil::random_wave(n, 42 + static_cast<uint64_t>(n), 1.0);
    RealFft fft(n);
    std::vector<std::complex<double>> spec(static_cast<size_t>(n / 2 + 1));
    fft.forward(x.data(), spec.data());
    auto ref = naive_rdft(x);
    for (size_t k = 0; k < ref.size(); ++k)
      CHECK(std::abs(spec[k] - ref[k]) < 1e-8 * n);
  }
}

TEST_CASE("real fft round trip") {
  auto x = testutil::random_wave(2048, 7, 1.0);
  RealFft fft(2048);
  std::vector<std::complex<double>> spec(1025);
  std::vector<double> back(2048);
  fft.forward(x.data(), spec.data());
  fft.inverse(spec.data(), back.data());
  for (size_t i = 0; i < x.size(); ++i)
    CHECK(x[i] == doctest::Approx(back[i]).epsilon(1e-12));
}

TEST_CASE("conv2d omp matches serial reference") {
  const int ci = 3, h = 12, w = 20, co = 5;
  auto in = testutil::random_tensor({ci, h, w}, 1);
  auto wt = testutil::random_tensor({co, ci, 3, 3}, 2);
  auto b = testutil::random_tensor({co}, 3);
  Tensor out_s({co, h, w}), out_p({co, h, w});
  kern::conv2d_forward_serial(in.data(), wt.data(), b.data(), ci, h, w, co, 3,
                              out_s.data());
  threads::set(2);
  kern::conv2d_forward(in.data(), wt.data(), b.data(), ci, h, w, co, 3,
                       out_p.data());
  threads::set(1);
  for (int64_t i = 0; i < out_s.numel(); ++i) CHECK(out_s[i] == out_p[i]);

  auto dout = testutil::random_tensor({co, h, w}, 4);
  Tensor din_s({ci, h, w}), din_p({ci, h, w});
  kern::conv2d_backward_input_serial(dout.data(), wt.data(), ci, h, w, co, 3,
                                     din_s.data());
  threads::set(2);
  kern::conv2d_backward_input(dout.data(), wt.data(), ci, h, w, co, 3,
                              din_p.data());
  threads::set(1);
  for (int64_t i = 0; i < din_s.numel(); ++i) CHECK(din_s[i] == din_p[i]);

  Tensor dw_s({co, ci, 3, 3}), dw_p({co, ci, 3, 3}), db_s({co}), db_p({co});
  kern::conv2d_backward_params_serial(dout.data(), in.data(), ci, h, w, co, 3,
                                      dw_s.data(), db_s.data());
  threads::set(2);
  kern::conv2d_backward_params(dout.data(), in.data(), ci, h, w, co, 3,
                               dw_p.data(), db_p.data());
  threads::set(1);
  for (int64_t i = 0; i < dw_s.numel(); ++i) CHECK(dw_s[i] == dw_p[i]);
  for (int64_t i = 0; i < db_s.numel(); ++i) CHECK(db_s[i] == db_p[i]);
}

TEST_CASE("contract_channels omp matches serial reference") {
  const int c = 4, t = 16, f = 33;
  auto g = testutil::random_tensor({c, t}, 5);
  auto x = testutil::random_tensor({c, t, f}, 6);
  auto add = testutil::random_tensor({t, f}, 7);
  Tensor out_s({t, f}), out_p({t, f});
  kern::contract_channels_forward_serial(g.data(), x.data(), add.data(), c, t, f,
                                         out_s.data());
  threads::set(2);
  kern::contract_channels_forward(g.data(), x.data(), add.data(), c, t, f,
                                  out_p.data());
  threads::set(1);
  for (int64_t i = 0; i < out_s.numel(); ++i) CHECK(out_s[i] == out_p[i]);
}

TEST_CASE("pool and upsample adjoint identity") {
  // <A f, g> == <f, A^T g> for linear kernels.
  const int c = 2, h = 8, w = 6;
  auto f = testutil::random_tensor({c, h, w}, 8);
  auto g = testutil::random_tensor({c, h / 2, w / 2}, 9);
  Tensor af({c, h / 2, w / 2});
  kern::avgpool2_forward(f.data(), c, h, w, af.data());
  Tensor atg({c, h, w});
  kern::avgpool2_backward(g.data(), c, h, w, atg.data());
  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < af.numel(); ++i) lhs += af[i] * g[i];
  for (int64_t i = 0; i < f.numel(); ++i) rhs += f[i] * atg[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  auto gu = testutil::random_tensor({c, h * 2, w * 2}, 10);
  Tensor uf({c, h * 2, w * 2});
  kern::upsample2_forward(f.data(), c, h, w, uf.data());
  Tensor utg({c, h, w});
  kern::upsample2_backward(gu.data(), c, h, w, utg.data());
  lhs = rhs = 0.0;
  for (int64_t i = 0; i < uf.numel(); ++i) lhs += uf[i] * gu[i];
  for (int64_t i = 0; i < f.numel(); ++i) rhs += f[i] * utg[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
