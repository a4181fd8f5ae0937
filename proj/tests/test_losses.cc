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
#include "objx/losses.hpp"
#include "test_util.hpp"

using namespace objx;
using namespace objx::loss;
using spatial::ObjectProduction;
using spatial::ObjectTrack;
using spatial::Position;
using spatial::Trajectory;

namespace {

Trajectory const_traj(double x, double y, int frames) {
  Trajectory t;
  t.p.assign(static_cast<size_t>(frames), Position{x, y});
  return t;
}

ObjectProduction random_production(int n_objects, int T, uint64_t seed) {
  ObjectProduction prod;
  Rng rng(seed);
  for (int o = 0; o < n_objects; ++o) {
    ObjectTrack obj;
    obj.stft = testutil::random_stft(1, T, seed + 10 + static_cast<uint64_t>(o));
    for (int t = 0; t < T; ++t)
      obj.traj.p.push_back(Position{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)});
    prod.objects.push_back(std::move(obj));
  }
  prod.bed = testutil::random_stft(6, T, seed + 99);
  return prod;
}

std::map<std::string, dsp::StftTensor> reference_renders(const ObjectProduction& p) {
  std::map<std::string, dsp::StftTensor> refs;
  for (const auto& name : spatial::SpeakerLayout::names())
    refs.emplace(name, spatial::render(p, spatial::SpeakerLayout::get(name)));
  return refs;
}

}  // namespace

TEST_CASE("recon_loss basics") {
  auto a = testutil::random_stft(2, 4, 1);
  CHECK(recon_loss(a, a) == 0.0);

  auto z = dsp::StftTensor::zeros(2, 4, dsp::kFreqs);
  double mean_mag = 0.0;
  for (int64_t i = 0; i < a.re.numel(); ++i)
    mean_mag += std::hypot(a.re[i], a.im[i]);
  mean_mag /= static_cast<double>(a.re.numel());
  CHECK(recon_loss(a, z) == doctest::Approx(mean_mag).epsilon(1e-12));
  CHECK(recon_loss(a, z) == doctest::Approx(recon_loss(z, a)).epsilon(1e-12));
}

TEST_CASE("supervised loss is zero on its own renders with zero reg") {
  const int T = 8;
  auto prod = random_production(1, T, 5);
  auto refs = reference_renders(prod);
  LossWeights w;
  w.bed_content = w.speaker_proximity = w.slow_motion = w.acceleration =
      w.object_proximity = w.traj_correlation = w.content_correlation = 0.0;
  auto b = supervised_loss(prod, refs, w);
  CHECK(b.total < 1e-9);
  for (const auto& [name, v] : b.recon) CHECK(v < 1e-12);
}

TEST_CASE("layout weight scaling cancels in the normalized average") {
  const int T = 8;
  auto prod = random_production(1, T, 6);
  auto other = random_production(1, T, 7);
  auto refs = reference_renders(other);  // nonzero reconstruction error
  LossWeights w;
  auto b1 = supervised_loss(prod, refs, w);
  for (auto& [k, v] : w.recon_layout) v *= 2.0;
  auto b2 = supervised_loss(prod, refs, w);
  CHECK(b1.total == doctest::Approx(b2.total).epsilon(1e-9));
}

TEST_CASE("supervised with only the 5.1 layout equals unsupervised") {
  const int T = 8;
  auto prod = random_production(1, T, 8);
  auto mix = testutil::random_stft(6, T, 9);
  LossWeights w;
  w.recon_layout = {{"5.1", 1.0}};
  std::map<std::string, dsp::StftTensor> refs;
  refs.emplace("5.1", mix);
  auto sup = supervised_loss(prod, refs, w);
  auto uns = unsupervised_loss(prod, mix, w);
  CHECK(sup.total == doctest::Approx(uns.total).epsilon(1e-12));
}

TEST_CASE("the all-bed production has zero recon and maximal bed content") {
  const int T = 8;
  auto mix = testutil::random_stft(6, T, 10);
  ObjectProduction all_bed;
  all_bed.objects.push_back(
      ObjectTrack{dsp::StftTensor::zeros(1, T, dsp::kFreqs), const_traj(0.5, 0.5, T)});
  all_bed.bed = mix;
  LossWeights w;
  auto b = unsupervised_loss(all_bed, mix, w);
  CHECK(b.recon.at("5.1") < 1e-12);
  CHECK(b.reg.at("bed_content") == doctest::Approx(1.0).epsilon(1e-9));
  for (const auto& [name, v] : b.reg)
    CHECK(v <= b.reg.at("bed_content") + 1e-9);
}

TEST_CASE("exact decomposition reaches zero recon") {
  const int T = 8;
  auto prod = random_production(1, T, 11);
  auto mix = spatial::render(prod, spatial::SpeakerLayout::get("5.1"));
  LossWeights w;
  auto b = unsupervised_loss(prod, mix, w);
  CHECK(b.recon.at("5.1") < 1e-12);
}

TEST_CASE("reg term (i): bed content ratio") {
  const int T = 4;
  auto mix = testutil::random_stft(6, T, 12);
  ObjectProduction p;
  p.objects.push_back(
      ObjectTrack{testutil::random_stft(1, T, 13), const_traj(0.5, 0.0, T)});

  p.bed = dsp::StftTensor::zeros(6, T, dsp::kFreqs);
  CHECK(reg_bed_content(p, mix) == 0.0);

  p.bed = mix;
  CHECK(reg_bed_content(p, mix) == doctest::Approx(1.0).epsilon(1e-12));

  for (int64_t i = 0; i < p.bed.re.numel(); ++i) {
    p.bed.re[i] = 0.5 * mix.re[i];
    p.bed.im[i] = 0.5 * mix.im[i];
  }
  CHECK(reg_bed_content(p, mix) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("reg term (ii): speaker proximity") {
  const int T = 4;
  ObjectProduction p;
  p.bed = dsp::StftTensor::zeros(6, T, dsp::kFreqs);
  p.objects.push_back(
      ObjectTrack{testutil::random_stft(1, T, 14), const_traj(0.0, 0.0, T)});
  CHECK(reg_speaker_proximity(p) == doctest::Approx(1.0).epsilon(1e-9));

  p.objects[0].traj = const_traj(0.5, 0.5, T);
  CHECK(reg_speaker_proximity(p) == doctest::Approx(std::exp(-25.0)).epsilon(1e-6));
  CHECK(reg_speaker_proximity(p) >= 0.0);
  CHECK(reg_speaker_proximity(p) <= 1.0);
}

TEST_CASE("reg term (iii): slow motion hinge") {
  const int T = 32;
  ObjectProduction p;
  p.bed = dsp::StftTensor::zeros(6, T, dsp::kFreqs);
  p.objects.push_back(
      ObjectTrack{testutil::random_stft(1, T, 15), const_traj(0.3, 0.3, T)});
  CHECK(reg_slow_motion(p) == doctest::Approx(1.0).epsilon(1e-6));

  Trajectory fast;
  for (int t = 0; t < T; ++t) fast.p.push_back(Position{0.01 * t, 0.0});
  p.objects[0].traj = fast;  // speed 0.01 >= v_min everywhere
  CHECK(reg_slow_motion(p) == doctest::Approx(0.0));

  Trajectory half;
  for (int t = 0; t < T; ++t) half.p.push_back(Position{0.001 * t, 0.0});
  p.objects[0].traj = half;  // speed = v_min/2
  CHECK(reg_slow_motion(p) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("reg term (iv): acceleration hinge") {
  const int T = 32;
  ObjectProduction p;
  p.bed = dsp::StftTensor::zeros(6, T, dsp::kFreqs);

  Trajectory linear;
  for (int t = 0; t < T; ++t) linear.p.push_back(Position{0.02 * t, 0.3});
  p.objects.push_back(ObjectTrack{testutil::random_stft(1, T, 16), linear});
  CHECK(reg_acceleration(p) == doctest::Approx(0.0).epsilon(1e-9));

  // One slope change of 2*a_max: a single frame with |a| == 0.02 and a
  // hinge of (0.02-0.01)^2 / 0.01^2 == 1, averaged over T-2 samples.
  Trajectory kink;
  for (int t = 0; t < T; ++t) {
    const int k = 10;
    const double x = t <= k ? 0.1 : 0.1 + 0.02 * (t - k);
    kink.p.push_back(Position{x, 0.2});
  }
  p.objects[0].traj = kink;
  CHECK(reg_acceleration(p) == doctest::Approx(1.0 / (T - 2)).epsilon(1e-6));

  Trajectory jump = const_traj(0.1, 0.1, T);
  for (int t = 16; t < T; ++t) jump.p[static_cast<size_t>(t)] = Position{0.6, 0.1};
  p.objects[0].traj = jump;
  CHECK(reg_acceleration(p) > 0.0);
}

TEST_CASE("reg term (v): object proximity") {
  const int T = 4;
  ObjectProduction p;
  p.bed = dsp::StftTensor::zeros(6, T, dsp::kFreqs);
  p.objects.push_back(
      ObjectTrack{testutil::random_stft(1, T, 17), const_traj(0.3, 0.3, T)});
  CHECK(reg_object_proximity(p) == 0.0);  // n == 1

  p.objects.push_back(
      ObjectTrack{testutil::random_stft(1, T, 18), const_traj(0.3, 0.3, T)});
  CHECK(reg_object_proximity(p) == doctest::Approx(1.0).epsilon(1e-9));

  p.objects[1].traj = const_traj(0.3 + 0.1, 0.3, T);
  CHECK(reg_object_proximity(p) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("reg term (vi): trajectory correlation") {
  const int T = 16;
  ObjectProduction p;
  p.bed = dsp::StftTensor::zeros(6, T, dsp::kFreqs);
  Trajectory moving;
  for (int t = 0; t < T; ++t)
    moving.p.push_back(Position{0.1 + 0.05 * t, 0.2 + 0.03 * t});
  p.objects.push_back(ObjectTrack{testutil::random_stft(1, T, 19), moving});
  CHECK(reg_traj_correlation(p) == 0.0);  // n == 1

  p.objects.push_back(ObjectTrack{testutil::random_stft(1, T, 20), moving});
  CHECK(reg_traj_correlation(p) == doctest::Approx(1.0).epsilon(1e-9));

  p.objects[1].traj = const_traj(0.5, 0.5, T);  // zero variance contributes 0
  CHECK(reg_traj_correlation(p) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("reg term (vii): content correlation") {
  const int T = 16;
  const int F = dsp::kFreqs;
  ObjectProduction p;
  p.bed = dsp::StftTensor::zeros(6, T, F);

  // Two objects with time-disjoint envelopes, silent bed.
  auto early = dsp::StftTensor::zeros(1, T, F);
  auto late = dsp::StftTensor::zeros(1, T, F);
  Rng rng(21);
  for (int t = 0; t < T / 2; ++t)
    for (int f = 0; f < F; ++f) {
      early.re[static_cast<size_t>(t * F + f)] = rng.uniform(-1, 1);
      late.re[static_cast<size_t>((T / 2 + t) * F + f)] = rng.uniform(-1, 1);
    }
  p.objects.push_back(ObjectTrack{early, const_traj(0.2, 0.2, T)});
  p.objects.push_back(ObjectTrack{late, const_traj(0.8, 0.8, T)});
  CHECK(reg_content_correlation(p) == doctest::Approx(0.0).epsilon(1e-9));

  // Identical tracks and a bed that carries the same envelope: every pair
  // has cosine similarity 1.
  p.objects[1].stft = p.objects[0].stft;
  const int64_t plane = static_cast<int64_t>(T) * F;
  for (int64_t i = 0; i < plane; ++i) p.bed.re[i] = p.objects[0].stft.re[i];
  CHECK(reg_content_correlation(p) == doctest::Approx(1.0).epsilon(1e-6));

  // Single object against a silent bed: guarded to 0.
  ObjectProduction solo;
  solo.bed = dsp::StftTensor::zeros(6, T, F);
  solo.objects.push_back(ObjectTrack{early, const_traj(0.2, 0.2, T)});
  CHECK(reg_content_correlation(solo) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("breakdown recombines to the total") {
  const int T = 8;
  auto prod = random_production(2, T, 22);
  auto refs = reference_renders(random_production(2, T, 23));
  LossWeights w;
  auto b = supervised_loss(prod, refs, w);
  CHECK(std::fabs(b.total - b.recombine(w)) < 1e-9);

  auto mix = testutil::random_stft(6, T, 24);
  auto bu = unsupervised_loss(prod, mix, w);
  CHECK(std::fabs(bu.total - bu.recombine(w)) < 1e-9);
}

TEST_CASE("default weights honor the relative-magnitude band") {
  LossWeights w;
  for (const auto& t : LossWeights::term_names()) {
    CHECK(w.reg_weight(t) >= 0.001);
    CHECK(w.reg_weight(t) <= 1.0);
  }
  // Heaviest penalties on bed content (i) and acceleration (iv).
  for (const auto& t : LossWeights::term_names()) {
    CHECK(w.reg_weight(t) <= w.bed_content);
    CHECK(w.reg_weight(t) <= w.acceleration);
  }
  // Normalized terms stay in [0,1] on random productions (iv is a hinge
  // and only bounded for bounded trajectories).
  auto prod = random_production(3, 8, 25);
  auto mix = testutil::random_stft(6, 8, 26);
  LossWeights def;
  auto b = unsupervised_loss(prod, mix, def);
  for (const auto& name :
       {"bed_content", "speaker_proximity", "slow_motion", "object_proximity",
        "traj_correlation", "content_correlation"}) {
    CHECK(b.reg.at(name) >= 0.0);
    CHECK(b.reg.at(name) <= 1.0 + 1e-9);
  }
  CHECK(std::isfinite(b.reg.at("acceleration")));
}

TEST_CASE("loss weights validation") {
  LossWeights w;
  w.recon_layout = {{"2.0", 0.0}, {"5.1", 0.0}};
  CHECK_THROWS_AS(w.validate(true), ValidationError);
  CHECK_NOTHROW(w.validate(false));
  LossWeights neg;
  neg.bed_content = -1.0;
  CHECK_THROWS_AS(neg.validate(false), ValidationError);
}

TEST_CASE("unsupervised loss is differentiable end to end from the masks") {
  // Gradient of the total loss with respect to a mel mask entering the
  // production through masking, checked by finite differences.
  const int T = 8;
  auto mix = testutil::random_stft(6, T, 27);
  const auto fb = dsp::build_mel_filterbank();
  LossWeights w;

  auto build = [&](ad::Tape& tp, const std::vector<ad::VarId>& xs) {
    // xs[0]: object mel mask logits -> sigmoid -> masks in (0,1).
    ad::VarId obj_mel = ad::sigmoid_op(tp, xs[0]);
    ad::VarId bed_mel = ad::sigmoid_op(tp, xs[1]);
    model::EncodeGraph g;
    Tensor mix_pos_re({5, T, dsp::kFreqs}), mix_pos_im({5, T, dsp::kFreqs});
    static const int kPos[5] = {0, 1, 2, 4, 5};
    const int64_t plane = static_cast<int64_t>(T) * dsp::kFreqs;
    for (int c = 0; c < 5; ++c) {
      std::copy_n(mix.re.data() + kPos[c] * plane, plane, mix_pos_re.data() + c * plane);
      std::copy_n(mix.im.data() + kPos[c] * plane, plane, mix_pos_im.data() + c * plane);
    }
    spatial::DepanOptions dopts;
    dopts.smooth = true;
    ad::VarId lmask = ad::mel_broadcast(tp, obj_mel, fb.view());
    ad::VarId ore = ad::mul_const(tp, lmask, mix_pos_re);
    ad::VarId oim = ad::mul_const(tp, lmask, mix_pos_im);
    ad::VarId e = ad::channel_energies(tp, ore, oim);
    ad::VarId xy = spatial::depan_op(tp, e, dopts);
    ad::VarId x = ad::row0(tp, xy, 0), y = ad::row0(tp, xy, 1);
    ad::VarId gains = spatial::pan_gains_op(tp, x, y, spatial::SpeakerLayout::get("5.1"), false);
    ad::VarId den = ad::add_const(tp, ad::sum_dim0(tp, ad::square(tp, gains)), 1e-12);
    ad::VarId mono_re = ad::div_rows(tp, ad::contract_channels(tp, gains, ore), den, 0.0);
    ad::VarId mono_im = ad::div_rows(tp, ad::contract_channels(tp, gains, oim), den, 0.0);
    ad::VarId trim_row = spatial::trim_row_op(tp, y);
    g.obj_mono_re.push_back(ad::div_rows(tp, mono_re, trim_row, 0.0));
    g.obj_mono_im.push_back(ad::div_rows(tp, mono_im, trim_row, 0.0));
    g.traj_x.push_back(x);
    g.traj_y.push_back(y);
    ad::VarId bed_lin = ad::mel_broadcast(tp, bed_mel, fb.view());
    g.bed_re = ad::mul_const(tp, bed_lin, mix_pos_re);
    g.bed_im = ad::mul_const(tp, bed_lin, mix_pos_im);
    g.bed_lfe_re = Tensor({T, dsp::kFreqs});
    g.bed_lfe_im = Tensor({T, dsp::kFreqs});
    g.mix_positional_mean_mag = Tensor({1}, 1.0);
    return unsupervised_loss_graph(tp, g, mix, w).total;
  };
  auto obj_logits = testutil::random_tensor({5, T, dsp::kMelBands}, 28, -0.5, 0.5);
  auto bed_logits = testutil::random_tensor({5, T, dsp::kMelBands}, 29, -0.5, 0.5);
  auto res = testutil::grad_check(build, {obj_logits, bed_logits}, 1e-4, 1e-3, 48);
  CHECK(res.frac_ok >= 0.99);
}
