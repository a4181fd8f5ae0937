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

#include "objx/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "objx/errors.hpp"
#include "objx/rng.hpp"

namespace objx::model {

namespace {

constexpr double kLeakySlope = 0.2;
constexpr double kProjEps = 1e-12;
// Positional channels of a 6-channel 5.1 tensor (LFE at index 3 excluded).
constexpr int kPos[5] = {0, 1, 2, 4, 5};

int skip_channels(const MaskNetConfig& cfg, int level) {
  return cfg.base_channels << level;
}

struct ConvSpec {
  std::string name;
  int cin, cout, k;
};

// Parameter layout shared by init, forward and checkpoint validation.
std::vector<ConvSpec> conv_specs(const MaskNetConfig& cfg) {
  std::vector<ConvSpec> specs;
  int cin = 5;
  for (int i = 0; i < cfg.depth; ++i) {
    specs.push_back({"down" + std::to_string(i), cin, skip_channels(cfg, i), 3});
    cin = skip_channels(cfg, i);
  }
  for (int i = cfg.depth - 1; i >= 0; --i) {
    const int prev = (i == cfg.depth - 1) ? skip_channels(cfg, cfg.depth - 1)
                                          : skip_channels(cfg, i + 1);
    specs.push_back(
        {"up" + std::to_string(i), prev + skip_channels(cfg, i), skip_channels(cfg, i), 3});
  }
  specs.push_back({"final", cfg.base_channels, (cfg.n_objects + 1) * 5, 1});
  return specs;
}

}  // namespace

void MaskNetConfig::validate() const {
  if (n_objects < 1 || n_objects > 3)
    throw ValidationError("masknet: n_objects must be 1..3");
  if (depth < 1) throw ValidationError("masknet: depth must be >= 1");
  if (base_channels < 1) throw ValidationError("masknet: base_channels >= 1");
  if ((dsp::kMelBands % (1 << depth)) != 0 || (dsp::kFrames % (1 << depth)) != 0)
    throw ValidationError("masknet: 128 and 256 must be divisible by 2^depth");
}

int64_t ParamStore::total_count() const {
  int64_t n = 0;
  for (const auto& t : values) n += t.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& g : grads) g.fill(0.0);
}

int ParamStore::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

ParamStore init_params(const MaskNetConfig& cfg) {
  cfg.validate();
  ParamStore ps;
  Rng rng(Rng::mix(cfg.seed, 0x6d61736b6e6574ULL));
  for (const auto& spec : conv_specs(cfg)) {
    Tensor w({spec.cout, spec.cin, spec.k, spec.k});
    if (spec.name != "final") {
      const double bound = std::sqrt(6.0 / (spec.cin * spec.k * spec.k));
      for (auto& v : w.v) v = rng.uniform(-bound, bound);
    }
    Tensor b({spec.cout});
    ps.names.push_back(spec.name + ".w");
    ps.values.push_back(std::move(w));
    ps.names.push_back(spec.name + ".b");
    ps.values.push_back(std::move(b));
  }
  ps.grads.reserve(ps.values.size());
  for (const auto& v : ps.values) ps.grads.push_back(Tensor(v.shape));
  return ps;
}

ad::VarId masknet_forward_tape(ad::Tape& tp, const std::vector<ad::VarId>& params,
                               const MaskNetConfig& cfg, ad::VarId input) {
  cfg.validate();
  const Tensor& in = tp.val(input);
  if (in.ndim() != 3 || in.dim(0) != 5 || in.dim(2) != dsp::kMelBands)
    throw ShapeError("masknet: input [5][T][128] expected");
  if (in.dim(1) % (1 << cfg.depth) != 0)
    throw ShapeError("masknet: frame count not divisible by 2^depth");
  if (!in.finite()) throw ValidationError("masknet: non-finite input");
  const auto specs = conv_specs(cfg);
  if (params.size() != specs.size() * 2)
    throw ShapeError("masknet: parameter count mismatch");

  ad::VarId h = input;
  std::vector<ad::VarId> skips;
  size_t pi = 0;
  for (int i = 0; i < cfg.depth; ++i) {
    h = ad::conv2d(tp, h, params[pi], params[pi + 1], 3);
    pi += 2;
    h = ad::leaky_relu(tp, h, kLeakySlope);
    skips.push_back(h);
    h = ad::avgpool2(tp, h);
  }
  for (int i = cfg.depth - 1; i >= 0; --i) {
    h = ad::upsample2(tp, h);
    h = ad::concat0(tp, {h, skips[static_cast<size_t>(i)]});
    h = ad::conv2d(tp, h, params[pi], params[pi + 1], 3);
    pi += 2;
    h = ad::leaky_relu(tp, h, kLeakySlope);
  }
  h = ad::conv2d(tp, h, params[pi], params[pi + 1], 1);
  h = ad::sigmoid_op(tp, h);
  if (!tp.val(h).finite())
    throw DivergenceError("masknet: non-finite activations");
  return h;
}

MaskSet masknet_forward(const ParamStore& params, const MaskNetConfig& cfg,
                        const Tensor& logmel) {
  ad::Tape tp;
  std::vector<ad::VarId> pv;
  pv.reserve(params.values.size());
  for (const auto& t : params.values) pv.push_back(tp.constant(t));
  ad::VarId in = tp.constant(logmel);
  ad::VarId planes = masknet_forward_tape(tp, pv, cfg, in);
  const Tensor& out = tp.val(planes);
  const int T = out.dim(1), B = out.dim(2);
  const int64_t plane = static_cast<int64_t>(5) * T * B;
  MaskSet ms;
  for (int o = 0; o < cfg.n_objects; ++o) {
    Tensor m({5, T, B});
    std::copy_n(out.data() + o * plane, plane, m.data());
    ms.object_masks.push_back(std::move(m));
  }
  ms.bed_mask = Tensor({5, T, B});
  std::copy_n(out.data() + cfg.n_objects * plane, plane, ms.bed_mask.data());
  return ms;
}

Tensor encoder_input(const dsp::StftTensor& mix, const dsp::MelFilterbank& fb) {
  mix.check_consistent("encoder_input");
  if (mix.channels() != 6)
    throw ShapeError("encoder_input: 6-channel 5.1 mix expected");
  const int T = mix.frames(), F = mix.freqs(), B = fb.n_bands;
  if (F != fb.n_freqs) throw ShapeError("encoder_input: freq count mismatch");
  Tensor out({5, T, B});
  for (int c = 0; c < 5; ++c)
    for (int t = 0; t < T; ++t) {
      const int64_t off = (static_cast<int64_t>(kPos[c]) * T + t) * F;
      const double* rp = mix.re.data() + off;
      const double* ip = mix.im.data() + off;
      double* op = out.data() + (static_cast<int64_t>(c) * T + t) * B;
      for (int b = 0; b < B; ++b) {
        const double* w = fb.weights.data() + static_cast<int64_t>(b) * F;
        double acc = 0.0;
        for (int f = fb.lo[static_cast<size_t>(b)]; f < fb.hi[static_cast<size_t>(b)]; ++f)
          acc += w[f] * (rp[f] * rp[f] + ip[f] * ip[f]);
        op[b] = std::log1p(acc);
      }
    }
  return out;
}

namespace {

// [5][T][F] positional planes of a 6-channel tensor.
Tensor positional_plane(const Tensor& t6) {
  const int T = t6.dim(1), F = t6.dim(2);
  Tensor out({5, T, F});
  const int64_t plane = static_cast<int64_t>(T) * F;
  for (int c = 0; c < 5; ++c)
    std::copy_n(t6.data() + kPos[c] * plane, plane, out.data() + c * plane);
  return out;
}

Tensor lfe_plane(const Tensor& t6) {
  const int T = t6.dim(1), F = t6.dim(2);
  Tensor out({T, F});
  std::copy_n(t6.data() + 3 * static_cast<int64_t>(T) * F,
              static_cast<int64_t>(T) * F, out.data());
  return out;
}

}  // namespace

EncodeGraph build_encode_graph(ad::Tape& tp, const std::vector<ad::VarId>& params,
                               const MaskNetConfig& cfg,
                               const dsp::StftTensor& mix,
                               const dsp::MelFilterbank& fb,
                               const EncodeOptions& opts) {
  mix.check_consistent("encode");
  if (mix.channels() != 6) throw ShapeError("encode: 6-channel 5.1 mix expected");
  const auto& l51 = spatial::SpeakerLayout::get("5.1");

  EncodeGraph g;
  Tensor mix_pos_re = positional_plane(mix.re);
  Tensor mix_pos_im = positional_plane(mix.im);
  g.bed_lfe_re = lfe_plane(mix.re);
  g.bed_lfe_im = lfe_plane(mix.im);
  {
    double acc = 0.0;
    for (int64_t i = 0; i < mix_pos_re.numel(); ++i)
      acc += std::sqrt(mix_pos_re[i] * mix_pos_re[i] +
                       mix_pos_im[i] * mix_pos_im[i]);
    g.mix_positional_mean_mag = Tensor({1});
    g.mix_positional_mean_mag[0] = acc / static_cast<double>(mix_pos_re.numel());
  }

  ad::VarId in = tp.constant(encoder_input(mix, fb));
  g.mask_planes = masknet_forward_tape(tp, params, cfg, in);

  for (int o = 0; o < cfg.n_objects; ++o) {
    ad::VarId mmask = ad::slice0(tp, g.mask_planes, o * 5, 5);
    ad::VarId lmask = ad::mel_broadcast(tp, mmask, fb.view());
    ad::VarId ore = ad::mul_const(tp, lmask, mix_pos_re);
    ad::VarId oim = ad::mul_const(tp, lmask, mix_pos_im);
    ad::VarId e = ad::channel_energies(tp, ore, oim);
    ad::VarId xy = spatial::depan_op(tp, e, opts.depan);
    ad::VarId x = ad::row0(tp, xy, 0);
    ad::VarId y = ad::row0(tp, xy, 1);
    ad::VarId gains = spatial::pan_gains_op(tp, x, y, l51, false);
    ad::VarId den =
        ad::add_const(tp, ad::sum_dim0(tp, ad::square(tp, gains)), kProjEps);
    ad::VarId mono_re =
        ad::div_rows(tp, ad::contract_channels(tp, gains, ore), den, 0.0);
    ad::VarId mono_im =
        ad::div_rows(tp, ad::contract_channels(tp, gains, oim), den, 0.0);
    ad::VarId trim_row = spatial::trim_row_op(tp, y);
    g.obj_mono_re.push_back(ad::div_rows(tp, mono_re, trim_row, 0.0));
    g.obj_mono_im.push_back(ad::div_rows(tp, mono_im, trim_row, 0.0));
    g.traj_x.push_back(x);
    g.traj_y.push_back(y);
  }

  ad::VarId bed_mel = ad::slice0(tp, g.mask_planes, cfg.n_objects * 5, 5);
  ad::VarId bed_lin = ad::mel_broadcast(tp, bed_mel, fb.view());
  g.bed_re = ad::mul_const(tp, bed_lin, std::move(mix_pos_re));
  g.bed_im = ad::mul_const(tp, bed_lin, std::move(mix_pos_im));
  return g;
}

namespace {

spatial::ObjectProduction production_from_graph(const ad::Tape& tp,
                                                const EncodeGraph& g) {
  spatial::ObjectProduction prod;
  const int T = tp.val(g.bed_re).dim(1);
  const int F = tp.val(g.bed_re).dim(2);
  for (size_t o = 0; o < g.obj_mono_re.size(); ++o) {
    spatial::ObjectTrack obj;
    obj.stft.re = tp.val(g.obj_mono_re[o]);
    obj.stft.im = tp.val(g.obj_mono_im[o]);
    obj.stft.re.shape = {1, T, F};
    obj.stft.im.shape = {1, T, F};
    const Tensor& x = tp.val(g.traj_x[o]);
    const Tensor& y = tp.val(g.traj_y[o]);
    obj.traj.p.resize(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t)
      obj.traj.p[static_cast<size_t>(t)] =
          spatial::Position{x[static_cast<size_t>(t)], y[static_cast<size_t>(t)]};
    prod.objects.push_back(std::move(obj));
  }
  prod.bed = dsp::StftTensor::zeros(6, T, F);
  const Tensor& bre = tp.val(g.bed_re);
  const Tensor& bim = tp.val(g.bed_im);
  const int64_t plane = static_cast<int64_t>(T) * F;
  for (int c = 0; c < 5; ++c) {
    std::copy_n(bre.data() + c * plane, plane, prod.bed.re.data() + kPos[c] * plane);
    std::copy_n(bim.data() + c * plane, plane, prod.bed.im.data() + kPos[c] * plane);
  }
  std::copy_n(g.bed_lfe_re.data(), plane, prod.bed.re.data() + 3 * plane);
  std::copy_n(g.bed_lfe_im.data(), plane, prod.bed.im.data() + 3 * plane);
  return prod;
}

}  // namespace

spatial::ObjectProduction encode(const ParamStore& params, const MaskNetConfig& cfg,
                                 const dsp::Waveform& mix,
                                 const EncodeOptions& opts) {
  const dsp::StftTensor mix_stft = dsp::stft(mix);
  const dsp::MelFilterbank fb = dsp::build_mel_filterbank();
  ad::Tape tp;
  std::vector<ad::VarId> pv;
  for (const auto& t : params.values) pv.push_back(tp.constant(t));
  EncodeGraph g = build_encode_graph(tp, pv, cfg, mix_stft, fb, opts);
  return production_from_graph(tp, g);
}

spatial::ObjectProduction extract_from_linear_masks(
    const dsp::StftTensor& mix, const std::vector<Tensor>& object_masks_linear,
    const Tensor* bed_mask_linear, const EncodeOptions& opts) {
  mix.check_consistent("extract_from_linear_masks");
  if (mix.channels() != 6) throw ShapeError("extract: 6-channel mix expected");
  const int T = mix.frames(), F = mix.freqs();
  const int64_t plane = static_cast<int64_t>(T) * F;

  spatial::ObjectProduction prod;
  dsp::StftTensor sum_masked = dsp::StftTensor::zeros(6, T, F);
  for (const auto& mask : object_masks_linear) {
    if (mask.ndim() != 3 || mask.dim(0) != 5 || mask.dim(1) != T || mask.dim(2) != F)
      throw ShapeError("extract: object mask [5][T][F] expected");
    dsp::StftTensor masked = dsp::StftTensor::zeros(6, T, F);
    for (int c = 0; c < 5; ++c)
      for (int64_t i = 0; i < plane; ++i) {
        const double m = mask[static_cast<size_t>(c * plane + i)];
        masked.re[static_cast<size_t>(kPos[c] * plane + i)] =
            m * mix.re[static_cast<size_t>(kPos[c] * plane + i)];
        masked.im[static_cast<size_t>(kPos[c] * plane + i)] =
            m * mix.im[static_cast<size_t>(kPos[c] * plane + i)];
      }
    for (int64_t i = 0; i < 6 * plane; ++i) {
      sum_masked.re[static_cast<size_t>(i)] += masked.re[static_cast<size_t>(i)];
      sum_masked.im[static_cast<size_t>(i)] += masked.im[static_cast<size_t>(i)];
    }
    spatial::ObjectTrack obj;
    obj.traj = spatial::depan(masked, opts.depan);
    obj.stft = spatial::extract_mono(masked, obj.traj);
    prod.objects.push_back(std::move(obj));
  }

  prod.bed = dsp::StftTensor::zeros(6, T, F);
  if (bed_mask_linear) {
    const Tensor& mask = *bed_mask_linear;
    if (mask.ndim() != 3 || mask.dim(0) != 5 || mask.dim(1) != T || mask.dim(2) != F)
      throw ShapeError("extract: bed mask [5][T][F] expected");
    for (int c = 0; c < 5; ++c)
      for (int64_t i = 0; i < plane; ++i) {
        const double m = mask[static_cast<size_t>(c * plane + i)];
        prod.bed.re[static_cast<size_t>(kPos[c] * plane + i)] =
            m * mix.re[static_cast<size_t>(kPos[c] * plane + i)];
        prod.bed.im[static_cast<size_t>(kPos[c] * plane + i)] =
            m * mix.im[static_cast<size_t>(kPos[c] * plane + i)];
      }
  } else {
    // Complement: bed keeps whatever the object masks did not take, so
    // objects + bed remain a partition of the mix.
    for (int c = 0; c < 5; ++c)
      for (int64_t i = 0; i < plane; ++i) {
        prod.bed.re[static_cast<size_t>(kPos[c] * plane + i)] =
            mix.re[static_cast<size_t>(kPos[c] * plane + i)] -
            sum_masked.re[static_cast<size_t>(kPos[c] * plane + i)];
        prod.bed.im[static_cast<size_t>(kPos[c] * plane + i)] =
            mix.im[static_cast<size_t>(kPos[c] * plane + i)] -
            sum_masked.im[static_cast<size_t>(kPos[c] * plane + i)];
      }
  }
  // LFE is never masked.
  std::copy_n(mix.re.data() + 3 * plane, plane, prod.bed.re.data() + 3 * plane);
  std::copy_n(mix.im.data() + 3 * plane, plane, prod.bed.im.data() + 3 * plane);
  return prod;
}

spatial::ObjectProduction extract_from_mel_masks(const dsp::StftTensor& mix,
                                                 const MaskSet& masks,
                                                 const dsp::MelFilterbank& fb,
                                                 const EncodeOptions& opts) {
  std::vector<Tensor> linear;
  linear.reserve(masks.object_masks.size());
  for (const auto& m : masks.object_masks)
    linear.push_back(dsp::broadcast_mel_mask(m, fb));
  Tensor bed = dsp::broadcast_mel_mask(masks.bed_mask, fb);
  return extract_from_linear_masks(mix, linear, &bed, opts);
}

// ---- checkpoint io ----

namespace {

constexpr char kMagic[8] = {'O', 'B', 'J', 'X', 'C', 'K', 'P', '1'};

void wr_u32(std::ofstream& f, uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}
uint32_t rd_u32(std::ifstream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const MaskNetConfig& cfg) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  f.write(kMagic, 8);
  wr_u32(f, 1);  // version
  const std::vector<std::pair<std::string, double>> meta = {
      {"meta.n_objects", static_cast<double>(cfg.n_objects)},
      {"meta.base_channels", static_cast<double>(cfg.base_channels)},
      {"meta.depth", static_cast<double>(cfg.depth)}};
  wr_u32(f, static_cast<uint32_t>(meta.size() + params.values.size()));
  auto write_entry = [&f](const std::string& name, const Tensor& t) {
    wr_u32(f, static_cast<uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    wr_u32(f, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) wr_u32(f, static_cast<uint32_t>(d));
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * 8));
  };
  for (const auto& [name, value] : meta) {
    Tensor t({1});
    t[0] = value;
    write_entry(name, t);
  }
  for (size_t i = 0; i < params.values.size(); ++i)
    write_entry(params.names[i], params.values[i]);
  if (!f) throw DataError("short checkpoint write: " + path);
}

ParamStore load_checkpoint(const std::string& path, MaskNetConfig* cfg_out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a checkpoint file: " + path);
  const uint32_t version = rd_u32(f);
  if (version != 1) throw DataError("unsupported checkpoint version");
  const uint32_t count = rd_u32(f);

  MaskNetConfig cfg;
  ParamStore ps;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = rd_u32(f);
    if (!f || name_len > 4096) throw DataError("corrupt checkpoint: " + path);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const uint32_t ndim = rd_u32(f);
    if (!f || ndim > 8) throw DataError("corrupt checkpoint: " + path);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(rd_u32(f));
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * 8));
    if (!f) throw DataError("truncated checkpoint: " + path);
    if (name == "meta.n_objects")
      cfg.n_objects = static_cast<int>(t[0]);
    else if (name == "meta.base_channels")
      cfg.base_channels = static_cast<int>(t[0]);
    else if (name == "meta.depth")
      cfg.depth = static_cast<int>(t[0]);
    else {
      ps.names.push_back(name);
      ps.values.push_back(std::move(t));
    }
  }
  for (const auto& v : ps.values) ps.grads.push_back(Tensor(v.shape));
  if (cfg_out) *cfg_out = cfg;
  return ps;
}

ParamStore load_checkpoint_for(const std::string& path, const MaskNetConfig& cfg) {
  MaskNetConfig file_cfg;
  ParamStore ps = load_checkpoint(path, &file_cfg);
  if (file_cfg.n_objects != cfg.n_objects ||
      file_cfg.base_channels != cfg.base_channels || file_cfg.depth != cfg.depth)
    throw DataError("checkpoint/config mismatch: file has n=" +
                    std::to_string(file_cfg.n_objects) +
                    " base=" + std::to_string(file_cfg.base_channels) +
                    " depth=" + std::to_string(file_cfg.depth));
  const ParamStore ref = init_params(cfg);
  if (ref.names != ps.names)
    throw DataError("checkpoint parameter names mismatch");
  for (size_t i = 0; i < ps.values.size(); ++i)
    if (ps.values[i].shape != ref.values[i].shape)
      throw DataError("checkpoint shape mismatch at " + ps.names[i]);
  return ps;
}

}  // namespace objx::model
