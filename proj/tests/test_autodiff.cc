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

#include "doctest.h"
#include "objx/autodiff.hpp"
#include "objx/spatial.hpp"
#include "test_util.hpp"

using namespace objx;
using namespace objx::ad;
using testutil::grad_check;
using testutil::random_tensor;

namespace {

// Weighted sum against fixed coefficients makes any-shaped output scalar.
VarId pool(Tape& tp, VarId x, uint64_t seed = 99) {
  Tensor w = random_tensor(tp.val(x).shape, seed, 0.5, 1.5);
  return sum_all(tp, mul_const(tp, x, std::move(w)));
}

}  // namespace

TEST_CASE("elementwise op gradients") {
  auto x = random_tensor({4, 6}, 1, 0.2, 1.5);
  auto y = random_tensor({4, 6}, 2, 0.2, 1.5);

  auto check1 = [&](auto make) {
    auto res = grad_check(
        [&](Tape& tp, const std::vector<VarId>& in) {
          return pool(tp, make(tp, in[0]));
        },
        {x});
    CHECK(res.max_rel < 1e-4);
  };
  check1([](Tape& tp, VarId v) { return neg(tp, v); });
  check1([](Tape& tp, VarId v) { return scale(tp, v, 2.5); });
  check1([](Tape& tp, VarId v) { return add_const(tp, v, -0.3); });
  check1([](Tape& tp, VarId v) { return exp_op(tp, v); });
  check1([](Tape& tp, VarId v) { return log1p_op(tp, v); });
  check1([](Tape& tp, VarId v) { return sqrt_eps(tp, v, 1e-9); });
  check1([](Tape& tp, VarId v) { return square(tp, v); });
  check1([](Tape& tp, VarId v) { return abs_op(tp, v); });
  check1([](Tape& tp, VarId v) { return relu(tp, v); });
  check1([](Tape& tp, VarId v) { return leaky_relu(tp, v, 0.2); });
  check1([](Tape& tp, VarId v) { return sigmoid_op(tp, v); });

  auto res2 = grad_check(
      [&](Tape& tp, const std::vector<VarId>& in) {
        VarId m = mul(tp, in[0], in[1]);
        VarId d = div(tp, add_const(tp, m, 2.0), add_const(tp, in[1], 2.0));
        return pool(tp, sub(tp, add(tp, d, in[0]), in[1]));
      },
      {x, y});
  CHECK(res2.max_rel < 1e-4);
}

TEST_CASE("scalar broadcast and reduction gradients") {
  auto x = random_tensor({12}, 3, -1.0, 1.0);
  auto s = random_tensor({1}, 4, 0.5, 1.0);
  auto res = grad_check(
      [&](Tape& tp, const std::vector<VarId>& in) {
        VarId a = add_scalar(tp, in[0], in[1]);
        VarId b = sub_scalar(tp, a, mean_all(tp, a));
        VarId c = mul_scalar(tp, b, in[1]);
        return sum_all(tp, square(tp, c));
      },
      {x, s});
  CHECK(res.max_rel < 1e-4);

  auto m = random_tensor({3, 5}, 5);
  auto res2 = grad_check(
      [&](Tape& tp, const std::vector<VarId>& in) {
        VarId a = sum_dim0(tp, in[0]);     // [5]
        VarId b = sum_last(tp, in[0]);     // [3]
        return add(tp, pool(tp, a, 7), pool(tp, b, 8));
      },
      {m});
  CHECK(res2.max_rel < 1e-4);
}

TEST_CASE("min_rows picks the column minimum and routes gradient") {
  Tape tp;
  Tensor x({2, 3});
  x.v = {1.0, 5.0, 2.0, 4.0, 0.5, 9.0};
  VarId in = tp.leaf(x);
  VarId m = min_rows(tp, in);
  CHECK(tp.val(m)[0] == 1.0);
  CHECK(tp.val(m)[1] == 0.5);
  CHECK(tp.val(m)[2] == 2.0);
  tp.backward(sum_all(tp, m));
  const Tensor& g = tp.grad(in);
  CHECK(g[0] == 1.0);
  CHECK(g[4] == 1.0);
  CHECK(g[2] == 1.0);
  CHECK(g[1] == 0.0);
}

TEST_CASE("shape op gradients") {
  auto a = random_tensor({2, 4}, 6);
  auto b = random_tensor({3, 4}, 7);
  auto res = grad_check(
      [&](Tape& tp, const std::vector<VarId>& in) {
        VarId c = concat0(tp, {in[0], in[1]});      // [5][4]
        VarId s = slice0(tp, c, 1, 3);              // [3][4]
        VarId r = row0(tp, s, 2);                   // [4]
        VarId st = stack0(tp, {r, r});              // [2][4]
        VarId sl = slice_1d(tp, reshape(tp, st, {8}), 2, 5);
        return pool(tp, sl, 11);
      },
      {a, b});
  CHECK(res.max_rel < 1e-4);
}

TEST_CASE("conv2d, pooling and upsampling gradients") {
  auto in = random_tensor({2, 4, 6}, 8);
  auto w = random_tensor({3, 2, 3, 3}, 9, -0.5, 0.5);
  auto b = random_tensor({3}, 10);
  auto res = grad_check(
      [&](Tape& tp, const std::vector<VarId>& xs) {
        return pool(tp, conv2d(tp, xs[0], xs[1], xs[2], 3), 12);
      },
      {in, w, b}, 1e-5, 1e-4, 80);
  CHECK(res.max_rel < 1e-4);

  auto w1 = random_tensor({4, 2, 1, 1}, 11, -0.5, 0.5);
  auto b1 = random_tensor({4}, 12);
  auto res1 = grad_check(
      [&](Tape& tp, const std::vector<VarId>& xs) {
        return pool(tp, conv2d(tp, xs[0], xs[1], xs[2], 1), 13);
      },
      {in, w1, b1});
  CHECK(res1.max_rel < 1e-4);

  auto res2 = grad_check(
      [&](Tape& tp, const std::vector<VarId>& xs) {
        return add(tp, pool(tp, avgpool2(tp, xs[0]), 14),
                   pool(tp, upsample2(tp, xs[0]), 15));
      },
      {in});
  CHECK(res2.max_rel < 1e-4);
}

TEST_CASE("spectral plumbing gradients") {
  const int C = 3, T = 4, F = 7;
  auto re = random_tensor({C, T, F}, 16);
  auto im = random_tensor({C, T, F}, 17);
  auto g = random_tensor({C, T}, 18, 0.1, 1.0);
  auto addend = random_tensor({T, F}, 19);
  auto r = random_tensor({T}, 20, 0.5, 1.5);
  auto r2 = random_tensor({T}, 35, 0.5, 1.5);

  auto res = grad_check(
      [&](Tape& tp, const std::vector<VarId>& xs) {
        VarId c = contract_channels(tp, xs[2], xs[0], xs[3]);
        VarId sr = scale_rows(tp, c, xs[4]);
        VarId dr = div_rows(tp, sr, xs[5], 1e-6);
        VarId e = channel_energies(tp, xs[0], xs[1]);
        VarId f = fold_rows(tp, xs[0], {0.3, 0.0, 1.1}, xs[3]);
        return add(tp, add(tp, pool(tp, dr, 21), pool(tp, e, 22)), pool(tp, f, 23));
      },
      {re, im, g, addend, r, r2});
  CHECK(res.max_rel < 1e-4);

  Tensor ref = random_tensor({C, T, F}, 24, 0.1, 2.0);
  auto res2 = grad_check(
      [&](Tape& tp, const std::vector<VarId>& xs) {
        VarId l1 = l1_mag_sum(tp, xs[0], xs[1], ref);
        VarId mm = mean_mag(tp, xs[0], xs[1]);
        return add(tp, l1, mm);
      },
      {re, im});
  CHECK(res2.max_rel < 1e-4);
}

TEST_CASE("mel broadcast gradient") {
  auto fb = dsp::build_mel_filterbank(8, 33, 24000.0);
  auto mel = random_tensor({2, 3, 8}, 25, 0.1, 0.9);
  auto res = grad_check(
      [&](Tape& tp, const std::vector<VarId>& xs) {
        return pool(tp, mel_broadcast(tp, xs[0], fb.view()), 26);
      },
      {mel});
  CHECK(res.max_rel < 1e-4);
}

TEST_CASE("pan_gains_op and trim_row_op gradients") {
  const int T = 6;
  auto x = random_tensor({T}, 27, 0.05, 0.95);
  auto y = random_tensor({T}, 28, 0.05, 0.95);
  for (const auto& name : spatial::SpeakerLayout::names()) {
    const auto& layout = spatial::SpeakerLayout::get(name);
    for (bool with_trim : {true, false}) {
      auto res = grad_check(
          [&](Tape& tp, const std::vector<VarId>& xs) {
            return pool(tp, spatial::pan_gains_op(tp, xs[0], xs[1], layout, with_trim), 29);
          },
          {x, y});
      CHECK(res.max_rel < 1e-4);
    }
  }
  auto res = grad_check(
      [&](Tape& tp, const std::vector<VarId>& xs) {
        return pool(tp, spatial::trim_row_op(tp, xs[0]), 30);
      },
      {y});
  CHECK(res.max_rel < 1e-4);
}

TEST_CASE("depan_op gradient at interior points") {
  const int T = 5;
  // Strictly positive energies away from branch boundaries: every frame
  // lands in the centroid branch, all frames active.
  auto e = random_tensor({5, T}, 31, 0.5, 2.0);
  spatial::DepanOptions opts;
  opts.smooth = false;
  auto res = grad_check(
      [&](Tape& tp, const std::vector<VarId>& xs) {
        return pool(tp, spatial::depan_op(tp, xs[0], opts), 32);
      },
      {e}, 1e-6, 1e-4);
  CHECK(res.max_rel < 1e-3);

  spatial::DepanOptions smooth = opts;
  smooth.smooth = true;
  auto res2 = grad_check(
      [&](Tape& tp, const std::vector<VarId>& xs) {
        return pool(tp, spatial::depan_op(tp, xs[0], smooth), 33);
      },
      {e}, 1e-6, 1e-4);
  CHECK(res2.max_rel < 1e-3);
}

TEST_CASE("depan_op silence hold copies previous estimate and routes gradient") {
  const int T = 4;
  Tensor e({5, T}, 0.0);
  // Frame 1 active at a known position; frames 0, 2, 3 silent.
  e[0 * T + 1] = 1.0;  // L
  e[2 * T + 1] = 1.0;  // C
  spatial::DepanOptions opts;
  opts.smooth = false;
  Tape tp;
  VarId ev = tp.leaf(e);
  VarId xy = spatial::depan_op(tp, ev, opts);
  // Frame 0 holds the initial (0.5, 0.5); frames 2 and 3 hold frame 1.
  CHECK(tp.val(xy)[0] == doctest::Approx(0.5));
  CHECK(tp.val(xy)[T + 0] == doctest::Approx(0.5));
  const double x1 = tp.val(xy)[1];
  CHECK(x1 == doctest::Approx(0.25).epsilon(1e-5));
  CHECK(tp.val(xy)[2] == x1);
  CHECK(tp.val(xy)[3] == x1);

  // Gradient of the held frames flows back to frame 1's energies.
  tp.backward(sum_all(tp, row0(tp, xy, 0)));
  const Tensor& g = tp.grad(ev);
  CHECK(g[0 * T + 1] != 0.0);
  CHECK(g[0 * T + 0] == 0.0);
  CHECK(g[0 * T + 2] == 0.0);
}

TEST_CASE("tape handles shared subexpressions") {
  auto x = random_tensor({5}, 34, 0.5, 1.5);
  auto res = grad_check(
      [&](Tape& tp, const std::vector<VarId>& xs) {
        VarId sq = square(tp, xs[0]);
        return sum_all(tp, mul(tp, sq, sq));  // x^4, same node twice
      },
      {x});
  CHECK(res.max_rel < 1e-4);
}
