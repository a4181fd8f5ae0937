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

#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "objx/errors.hpp"
#include "objx/eval.hpp"
#include "objx/model.hpp"
#include "test_util.hpp"

using namespace objx;
using namespace objx::model;

namespace {

Tensor small_logmel(int T, uint64_t seed) {
  return testutil::random_tensor({5, T, dsp::kMelBands}, seed, 0.0, 2.0);
}

}  // namespace

TEST_CASE("init_params is seeded and final layer is zero") {
  MaskNetConfig cfg;
  cfg.base_channels = 4;
  cfg.depth = 2;
  cfg.seed = 42;
  auto a = init_params(cfg);
  auto b = init_params(cfg);
  REQUIRE(a.names == b.names);
  for (size_t i = 0; i < a.values.size(); ++i)
    for (int64_t j = 0; j < a.values[i].numel(); ++j)
      CHECK(a.values[i][j] == b.values[i][j]);

  const int fw = a.index_of("final.w");
  const int fb = a.index_of("final.b");
  REQUIRE(fw >= 0);
  for (double v : a.values[static_cast<size_t>(fw)].v) CHECK(v == 0.0);
  for (double v : a.values[static_cast<size_t>(fb)].v) CHECK(v == 0.0);

  cfg.seed = 43;
  auto c = init_params(cfg);
  bool any_diff = false;
  for (int64_t j = 0; j < a.values[0].numel(); ++j)
    any_diff = any_diff || a.values[0][j] != c.values[0][j];
  CHECK(any_diff);
}

TEST_CASE("parameter counts are frozen") {
  MaskNetConfig def;  // n=1, base 16, depth 4
  CHECK(init_params(def).total_count() == 538202);

  MaskNetConfig tiny;
  tiny.base_channels = 2;
  tiny.depth = 1;
  // down0 9*5*2+2, up0 9*4*2+2, final 2*10+10.
  CHECK(init_params(tiny).total_count() == 92 + 74 + 30);
}

TEST_CASE("masknet forward: 0.5 initial masks, range, determinism") {
  MaskNetConfig cfg;
  cfg.base_channels = 2;
  cfg.depth = 1;
  cfg.seed = 7;
  auto params = init_params(cfg);
  const int T = 16;
  auto in = small_logmel(T, 11);
  auto ms = masknet_forward(params, cfg, in);
  REQUIRE(ms.object_masks.size() == 1);
  CHECK(ms.bed_mask.shape == std::vector<int>{5, T, dsp::kMelBands});
  for (double v : ms.object_masks[0].v) CHECK(v == 0.5);
  for (double v : ms.bed_mask.v) CHECK(v == 0.5);

  // Break the zero final layer; outputs stay in (0,1) and reproduce.
  const int fw = params.index_of("final.w");
  for (auto& v : params.values[static_cast<size_t>(fw)].v) v = 0.3;
  auto m1 = masknet_forward(params, cfg, in);
  auto m2 = masknet_forward(params, cfg, in);
  for (int64_t i = 0; i < m1.bed_mask.numel(); ++i) {
    CHECK(m1.bed_mask[i] > 0.0);
    CHECK(m1.bed_mask[i] < 1.0);
    CHECK(m1.bed_mask[i] == m2.bed_mask[i]);
  }
}

TEST_CASE("masknet validates shapes and config") {
  MaskNetConfig bad;
  bad.n_objects = 4;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  MaskNetConfig deep;
  deep.depth = 9;  // 128 not divisible by 512
  CHECK_THROWS_AS(deep.validate(), ValidationError);

  MaskNetConfig cfg;
  cfg.base_channels = 2;
  cfg.depth = 1;
  auto params = init_params(cfg);
  auto bad_in = testutil::random_tensor({5, 16, 64}, 1);
  CHECK_THROWS_AS(masknet_forward(params, cfg, bad_in), ShapeError);
}

TEST_CASE("oracle masks recover a clean single-object mix") {
  const auto& l51 = spatial::SpeakerLayout::get("5.1");
  const int T = 32;
  auto mono = testutil::random_stft(1, T, 5);
  spatial::Trajectory traj;
  for (int t = 0; t < T; ++t)
    traj.p.push_back(spatial::Position{0.2 + 0.5 * t / (T - 1), 0.3});
  auto mix = spatial::render_single_object(mono, traj, l51);

  MaskSet ms;
  ms.object_masks.push_back(Tensor({5, T, dsp::kMelBands}, 1.0));
  ms.bed_mask = Tensor({5, T, dsp::kMelBands}, 0.0);
  EncodeOptions opts;
  opts.depan.smooth = false;
  const auto fb = dsp::build_mel_filterbank();
  auto prod = extract_from_mel_masks(mix, ms, fb, opts);
  REQUIRE(prod.objects.size() == 1);

  const auto est = dsp::istft(prod.objects[0].stft).samples[0];
  const auto ref = dsp::istft(mono).samples[0];
  CHECK(eval::si_sdr(est, ref) > 40.0);
  for (int t = 0; t < T; ++t) {
    CHECK(std::fabs(prod.objects[0].traj.p[static_cast<size_t>(t)].x -
                    traj.p[static_cast<size_t>(t)].x) < 1e-5);
    CHECK(std::fabs(prod.objects[0].traj.p[static_cast<size_t>(t)].y -
                    traj.p[static_cast<size_t>(t)].y) < 1e-5);
  }
  // Bed got nothing.
  for (double v : prod.bed.re.v) CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("all-bed masks pass the mix through to the bed") {
  const int T = 16;
  auto mix = testutil::random_stft(6, T, 6);
  MaskSet ms;
  ms.object_masks.push_back(Tensor({5, T, dsp::kMelBands}, 0.0));
  ms.bed_mask = Tensor({5, T, dsp::kMelBands}, 1.0);
  EncodeOptions opts;
  const auto fb = dsp::build_mel_filterbank();
  auto prod = extract_from_mel_masks(mix, ms, fb, opts);
  for (double v : prod.objects[0].stft.re.v) CHECK(v == 0.0);
  for (int64_t i = 0; i < mix.re.numel(); ++i) {
    CHECK(prod.bed.re[i] == doctest::Approx(mix.re[i]).epsilon(1e-12));
    CHECK(prod.bed.im[i] == doctest::Approx(mix.im[i]).epsilon(1e-12));
  }
}

TEST_CASE("encode graph is deterministic") {
  MaskNetConfig cfg;
  cfg.base_channels = 2;
  cfg.depth = 1;
  auto params = init_params(cfg);
  auto mix = testutil::random_stft(6, 16, 9);
  const auto fb = dsp::build_mel_filterbank();
  EncodeOptions opts;

  auto run = [&] {
    ad::Tape tp;
    std::vector<ad::VarId> pv;
    for (const auto& t : params.values) pv.push_back(tp.constant(t));
    auto g = build_encode_graph(tp, pv, cfg, mix, fb, opts);
    return std::pair{tp.val(g.obj_mono_re[0]), tp.val(g.bed_re)};
  };
  auto [a1, b1] = run();
  auto [a2, b2] = run();
  for (int64_t i = 0; i < a1.numel(); ++i) CHECK(a1[i] == a2[i]);
  for (int64_t i = 0; i < b1.numel(); ++i) CHECK(b1[i] == b2[i]);
}

TEST_CASE("checkpoint round trip and mismatch detection") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "objx_test_ckpt.objx").string();
  MaskNetConfig cfg;
  cfg.base_channels = 4;
  cfg.depth = 2;
  cfg.n_objects = 2;
  cfg.seed = 3;
  auto params = init_params(cfg);
  save_checkpoint(path, params, cfg);

  MaskNetConfig read_cfg;
  auto loaded = load_checkpoint(path, &read_cfg);
  CHECK(read_cfg.n_objects == 2);
  CHECK(read_cfg.base_channels == 4);
  CHECK(read_cfg.depth == 2);
  REQUIRE(loaded.names == params.names);
  for (size_t i = 0; i < params.values.size(); ++i)
    for (int64_t j = 0; j < params.values[i].numel(); ++j)
      CHECK(loaded.values[i][j] == params.values[i][j]);

  auto ok = load_checkpoint_for(path, cfg);
  CHECK(ok.total_count() == params.total_count());

  MaskNetConfig other = cfg;
  other.base_channels = 8;
  CHECK_THROWS_AS(load_checkpoint_for(path, other), DataError);
  fs::remove(path);
}
