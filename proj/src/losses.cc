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

#include "objx/losses.hpp"

#include <cmath>

#include "objx/errors.hpp"

namespace objx::loss {

namespace {

constexpr double kCorrEps = 1e-12;
constexpr double kNormEps = 1e-24;  // inside velocity/acceleration norms
constexpr int kPos[5] = {0, 1, 2, 4, 5};

using ad::Tape;
using ad::VarId;

}  // namespace

void LossWeights::validate(bool supervised) const {
  for (const auto& [name, w] : recon_layout) {
    spatial::SpeakerLayout::get(name);
    if (w < 0.0) throw ValidationError("negative layout weight: " + name);
  }
  for (const auto& t : term_names())
    if (reg_weight(t) < 0.0) throw ValidationError("negative reg weight: " + t);
  if (supervised) {
    double s = 0.0;
    for (const auto& [name, w] : recon_layout) s += w;
    if (s <= 0.0)
      throw ValidationError("supervised mode needs a positive layout weight");
  }
}

const std::vector<std::string>& LossWeights::term_names() {
  static const std::vector<std::string> n = {
      "bed_content",      "speaker_proximity", "slow_motion", "acceleration",
      "object_proximity", "traj_correlation",  "content_correlation"};
  return n;
}

double LossWeights::reg_weight(const std::string& term) const {
  if (term == "bed_content") return bed_content;
  if (term == "speaker_proximity") return speaker_proximity;
  if (term == "slow_motion") return slow_motion;
  if (term == "acceleration") return acceleration;
  if (term == "object_proximity") return object_proximity;
  if (term == "traj_correlation") return traj_correlation;
  if (term == "content_correlation") return content_correlation;
  throw ValidationError("unknown reg term: " + term);
}

double LossBreakdown::recombine(const LossWeights& w) const {
  double num = 0.0, den = 0.0;
  for (const auto& [name, v] : recon) {
    const double lw = w.recon_layout.count(name) ? w.recon_layout.at(name) : 0.0;
    num += lw * v;
    den += lw;
  }
  double out = den > 0.0 ? num / den : 0.0;
  for (const auto& [name, v] : reg) out += w.reg_weight(name) * v;
  return out;
}

double recon_loss(const dsp::StftTensor& pred, const dsp::StftTensor& ref) {
  pred.check_consistent("recon_loss");
  ref.check_consistent("recon_loss");
  check_same_shape(pred.re, ref.re, "recon_loss");
  double acc = 0.0;
  const int64_t n = pred.re.numel();
  for (int64_t i = 0; i < n; ++i) {
    const double pm = std::sqrt(pred.re[i] * pred.re[i] + pred.im[i] * pred.im[i]);
    const double rm = std::sqrt(ref.re[i] * ref.re[i] + ref.im[i] * ref.im[i]);
    acc += std::fabs(pm - rm);
  }
  return acc / static_cast<double>(n);
}

namespace {

Tensor magnitude_plane(const dsp::StftTensor& s, int channel) {
  const int T = s.frames(), F = s.freqs();
  Tensor out({T, F});
  const double* rp = s.re.data() + static_cast<int64_t>(channel) * T * F;
  const double* ip = s.im.data() + static_cast<int64_t>(channel) * T * F;
  for (int64_t i = 0; i < static_cast<int64_t>(T) * F; ++i)
    out[i] = std::sqrt(rp[i] * rp[i] + ip[i] * ip[i]);
  return out;
}

// Reconstruction of one layout: per-positional-channel weighted object mix
// plus the bed fold, L1 against the reference magnitudes; LFE is a constant
// passthrough handled outside the tape.
VarId layout_recon_graph(Tape& tp, const model::EncodeGraph& g,
                         const spatial::SpeakerLayout& layout,
                         const dsp::StftTensor& ref, VarId stack_re,
                         VarId stack_im) {
  const int n_obj = static_cast<int>(g.obj_mono_re.size());
  const int T = tp.val(g.bed_re).dim(1);
  const int F = tp.val(g.bed_re).dim(2);
  if (ref.channels() != layout.num_channels() || ref.frames() != T ||
      ref.freqs() != F)
    throw ShapeError("loss: reference render shape mismatch for " + layout.name());

  std::vector<VarId> gains;
  for (int o = 0; o < n_obj; ++o)
    gains.push_back(spatial::pan_gains_op(tp, g.traj_x[static_cast<size_t>(o)],
                                          g.traj_y[static_cast<size_t>(o)],
                                          layout, true));
  const auto fold = bed_fold_weights(layout);

  VarId total = ad::kNoVar;
  for (int p = 0; p < layout.num_positional(); ++p) {
    VarId bed_fold_re = ad::fold_rows(tp, g.bed_re, fold[static_cast<size_t>(p)]);
    VarId bed_fold_im = ad::fold_rows(tp, g.bed_im, fold[static_cast<size_t>(p)]);
    std::vector<VarId> grows;
    for (int o = 0; o < n_obj; ++o)
      grows.push_back(ad::row0(tp, gains[static_cast<size_t>(o)], p));
    VarId gstack = ad::stack0(tp, grows);
    VarId out_re = ad::contract_channels(tp, gstack, stack_re, bed_fold_re);
    VarId out_im = ad::contract_channels(tp, gstack, stack_im, bed_fold_im);
    VarId l1 = ad::l1_mag_sum(tp, out_re, out_im,
                              magnitude_plane(ref, layout.full_channel(p)));
    total = (total == ad::kNoVar) ? l1 : ad::add(tp, total, l1);
  }

  double lfe_const = 0.0;
  if (layout.has_lfe()) {
    const Tensor ref_mag = magnitude_plane(ref, layout.lfe_index());
    for (int64_t i = 0; i < ref_mag.numel(); ++i) {
      const double pm = std::sqrt(g.bed_lfe_re[i] * g.bed_lfe_re[i] +
                                  g.bed_lfe_im[i] * g.bed_lfe_im[i]);
      lfe_const += std::fabs(pm - ref_mag[i]);
    }
  }
  total = ad::add_const(tp, total, lfe_const);
  const double scale = 1.0 / (static_cast<double>(layout.num_channels()) * T * F);
  return ad::scale(tp, total, scale);
}

// Pearson correlation magnitude of two [T] rows, variance-guarded.
VarId abs_pearson(Tape& tp, VarId a, VarId b) {
  VarId da = ad::sub_scalar(tp, a, ad::mean_all(tp, a));
  VarId db = ad::sub_scalar(tp, b, ad::mean_all(tp, b));
  VarId cov = ad::sum_all(tp, ad::mul(tp, da, db));
  VarId va = ad::sum_all(tp, ad::square(tp, da));
  VarId vb = ad::sum_all(tp, ad::square(tp, db));
  VarId den = ad::mul(tp, ad::sqrt_eps(tp, va, kCorrEps),
                      ad::sqrt_eps(tp, vb, kCorrEps));
  return ad::abs_op(tp, ad::div(tp, cov, den));
}

VarId cosine_sim(Tape& tp, VarId a, VarId b) {
  VarId dot = ad::sum_all(tp, ad::mul(tp, a, b));
  VarId na = ad::sqrt_eps(tp, ad::sum_all(tp, ad::square(tp, a)), 0.0);
  VarId nb = ad::sqrt_eps(tp, ad::sum_all(tp, ad::square(tp, b)), 0.0);
  VarId den = ad::add_const(tp, ad::mul(tp, na, nb), kCorrEps);
  return ad::div(tp, dot, den);
}

VarId mean_of(Tape& tp, const std::vector<VarId>& xs) {
  if (xs.empty()) return tp.constant(Tensor({1}, 0.0));
  VarId acc = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) acc = ad::add(tp, acc, xs[i]);
  return ad::scale(tp, acc, 1.0 / static_cast<double>(xs.size()));
}

// ---- regularization term graphs ----

VarId reg_bed_content_graph(Tape& tp, const model::EncodeGraph& g) {
  const double mix_mag = g.mix_positional_mean_mag[0];
  VarId bed = ad::mean_mag(tp, g.bed_re, g.bed_im);
  return ad::scale(tp, bed, 1.0 / (mix_mag > 0.0 ? mix_mag : 1.0));
}

VarId reg_speaker_proximity_graph(Tape& tp, const model::EncodeGraph& g,
                                  double sigma) {
  const auto& l51 = spatial::SpeakerLayout::get("5.1");
  std::vector<VarId> per_obj;
  for (size_t o = 0; o < g.traj_x.size(); ++o) {
    std::vector<VarId> d2;
    for (const auto& sp : l51.speaker_positions()) {
      VarId dx = ad::square(tp, ad::add_const(tp, g.traj_x[o], -sp.x));
      VarId dy = ad::square(tp, ad::add_const(tp, g.traj_y[o], -sp.y));
      d2.push_back(ad::add(tp, dx, dy));
    }
    VarId dmin = ad::min_rows(tp, ad::stack0(tp, d2));
    per_obj.push_back(
        ad::mean_all(tp, ad::exp_op(tp, ad::scale(tp, dmin, -1.0 / (sigma * sigma)))));
  }
  return mean_of(tp, per_obj);
}

VarId diff1(Tape& tp, VarId x) {
  const int T = tp.val(x).dim(0);
  return ad::sub(tp, ad::slice_1d(tp, x, 1, T - 1), ad::slice_1d(tp, x, 0, T - 1));
}

VarId reg_slow_motion_graph(Tape& tp, const model::EncodeGraph& g, double v_min) {
  std::vector<VarId> per_obj;
  for (size_t o = 0; o < g.traj_x.size(); ++o) {
    VarId vx = diff1(tp, g.traj_x[o]);
    VarId vy = diff1(tp, g.traj_y[o]);
    VarId speed = ad::sqrt_eps(tp, ad::add(tp, ad::square(tp, vx), ad::square(tp, vy)),
                               kNormEps);
    VarId hinge = ad::relu(tp, ad::add_const(tp, ad::neg(tp, speed), v_min));
    per_obj.push_back(ad::scale(tp, ad::mean_all(tp, hinge), 1.0 / v_min));
  }
  return mean_of(tp, per_obj);
}

VarId reg_acceleration_graph(Tape& tp, const model::EncodeGraph& g, double a_max) {
  std::vector<VarId> per_obj;
  for (size_t o = 0; o < g.traj_x.size(); ++o) {
    VarId ax = diff1(tp, diff1(tp, g.traj_x[o]));
    VarId ay = diff1(tp, diff1(tp, g.traj_y[o]));
    VarId mag = ad::sqrt_eps(tp, ad::add(tp, ad::square(tp, ax), ad::square(tp, ay)),
                             kNormEps);
    VarId hinge = ad::relu(tp, ad::add_const(tp, mag, -a_max));
    per_obj.push_back(
        ad::scale(tp, ad::mean_all(tp, ad::square(tp, hinge)), 1.0 / (a_max * a_max)));
  }
  return mean_of(tp, per_obj);
}

VarId reg_object_proximity_graph(Tape& tp, const model::EncodeGraph& g,
                                 double sigma) {
  const size_t n = g.traj_x.size();
  std::vector<VarId> pairs;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      VarId dx = ad::square(tp, ad::sub(tp, g.traj_x[i], g.traj_x[j]));
      VarId dy = ad::square(tp, ad::sub(tp, g.traj_y[i], g.traj_y[j]));
      VarId d2 = ad::add(tp, dx, dy);
      pairs.push_back(
          ad::mean_all(tp, ad::exp_op(tp, ad::scale(tp, d2, -1.0 / (sigma * sigma)))));
    }
  return mean_of(tp, pairs);
}

VarId reg_traj_correlation_graph(Tape& tp, const model::EncodeGraph& g) {
  const size_t n = g.traj_x.size();
  std::vector<VarId> pairs;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      VarId rx = abs_pearson(tp, g.traj_x[i], g.traj_x[j]);
      VarId ry = abs_pearson(tp, g.traj_y[i], g.traj_y[j]);
      pairs.push_back(ad::scale(tp, ad::add(tp, rx, ry), 0.5));
    }
  return mean_of(tp, pairs);
}

VarId reg_content_correlation_graph(Tape& tp, const model::EncodeGraph& g) {
  const size_t n = g.obj_mono_re.size();
  const int T = tp.val(g.bed_re).dim(1);
  const int F = tp.val(g.bed_re).dim(2);
  // Power envelope per frame for every object and the bed.
  std::vector<VarId> env;
  for (size_t o = 0; o < n; ++o) {
    VarId re3 = ad::reshape(tp, g.obj_mono_re[o], {1, T, F});
    VarId im3 = ad::reshape(tp, g.obj_mono_im[o], {1, T, F});
    env.push_back(ad::row0(tp, ad::channel_energies(tp, re3, im3), 0));
  }
  VarId bed_env = ad::sum_dim0(tp, ad::channel_energies(tp, g.bed_re, g.bed_im));
  std::vector<VarId> pairs;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      pairs.push_back(cosine_sim(tp, env[i], env[j]));
  for (size_t i = 0; i < n; ++i)
    pairs.push_back(cosine_sim(tp, env[i], bed_env));
  return mean_of(tp, pairs);
}

LossGraph build_loss_graph(Tape& tp, const model::EncodeGraph& g,
                           const std::map<std::string, dsp::StftTensor>& refs,
                           const LossWeights& w, bool supervised) {
  w.validate(supervised);
  LossGraph out;

  VarId stack_re = ad::stack0(tp, g.obj_mono_re);
  VarId stack_im = ad::stack0(tp, g.obj_mono_im);

  VarId recon_part = ad::kNoVar;
  double wsum = 0.0;
  for (const auto& [name, lw] : w.recon_layout) {
    if (lw <= 0.0) continue;
    auto it = refs.find(name);
    if (it == refs.end())
      throw ValidationError("loss: missing reference render for layout " + name);
    VarId rl = layout_recon_graph(tp, g, spatial::SpeakerLayout::get(name),
                                  it->second, stack_re, stack_im);
    out.recon[name] = rl;
    VarId weighted = ad::scale(tp, rl, lw);
    recon_part = recon_part == ad::kNoVar ? weighted : ad::add(tp, recon_part, weighted);
    wsum += lw;
  }
  VarId total = recon_part == ad::kNoVar ? tp.constant(Tensor({1}, 0.0))
                                         : ad::scale(tp, recon_part, 1.0 / wsum);

  out.reg["bed_content"] = reg_bed_content_graph(tp, g);
  out.reg["speaker_proximity"] = reg_speaker_proximity_graph(tp, g, w.speaker_sigma);
  out.reg["slow_motion"] = reg_slow_motion_graph(tp, g, w.v_min);
  out.reg["acceleration"] = reg_acceleration_graph(tp, g, w.a_max);
  out.reg["object_proximity"] = reg_object_proximity_graph(tp, g, w.object_sigma);
  out.reg["traj_correlation"] = reg_traj_correlation_graph(tp, g);
  out.reg["content_correlation"] = reg_content_correlation_graph(tp, g);
  for (const auto& term : LossWeights::term_names()) {
    const double tw = w.reg_weight(term);
    if (tw != 0.0) total = ad::add(tp, total, ad::scale(tp, out.reg[term], tw));
  }
  out.total = total;
  return out;
}

}  // namespace

LossBreakdown LossGraph::values(const Tape& tp) const {
  LossBreakdown b;
  b.total = tp.val(total)[0];
  for (const auto& [name, id] : recon) b.recon[name] = tp.val(id)[0];
  for (const auto& [name, id] : reg) b.reg[name] = tp.val(id)[0];
  return b;
}

LossGraph supervised_loss_graph(Tape& tp, const model::EncodeGraph& g,
                                const std::map<std::string, dsp::StftTensor>& refs,
                                const LossWeights& w) {
  return build_loss_graph(tp, g, refs, w, true);
}

LossGraph unsupervised_loss_graph(Tape& tp, const model::EncodeGraph& g,
                                  const dsp::StftTensor& mix51,
                                  const LossWeights& w) {
  LossWeights uw = w;
  uw.recon_layout = {{"5.1", 1.0}};
  std::map<std::string, dsp::StftTensor> refs;
  refs.emplace("5.1", mix51);
  return build_loss_graph(tp, g, refs, uw, false);
}

model::EncodeGraph production_graph(Tape& tp,
                                    const spatial::ObjectProduction& prod,
                                    const dsp::StftTensor* mix51) {
  prod.bed.check_consistent("production_graph");
  if (prod.bed.channels() != 6)
    throw ShapeError("production_graph: 6-channel bed expected");
  const int T = prod.bed.frames(), F = prod.bed.freqs();
  const int64_t plane = static_cast<int64_t>(T) * F;

  model::EncodeGraph g;
  for (const auto& obj : prod.objects) {
    if (obj.traj.frames() != T || obj.stft.frames() != T)
      throw ShapeError("production_graph: frame count mismatch");
    Tensor re({T, F}), im({T, F});
    std::copy_n(obj.stft.re.data(), plane, re.data());
    std::copy_n(obj.stft.im.data(), plane, im.data());
    g.obj_mono_re.push_back(tp.constant(std::move(re)));
    g.obj_mono_im.push_back(tp.constant(std::move(im)));
    Tensor x({T}), y({T});
    for (int t = 0; t < T; ++t) {
      x[static_cast<size_t>(t)] = obj.traj.p[static_cast<size_t>(t)].x;
      y[static_cast<size_t>(t)] = obj.traj.p[static_cast<size_t>(t)].y;
    }
    g.traj_x.push_back(tp.constant(std::move(x)));
    g.traj_y.push_back(tp.constant(std::move(y)));
  }
  Tensor bre({5, T, F}), bim({5, T, F});
  for (int c = 0; c < 5; ++c) {
    std::copy_n(prod.bed.re.data() + kPos[c] * plane, plane, bre.data() + c * plane);
    std::copy_n(prod.bed.im.data() + kPos[c] * plane, plane, bim.data() + c * plane);
  }
  g.bed_re = tp.constant(std::move(bre));
  g.bed_im = tp.constant(std::move(bim));
  g.bed_lfe_re = Tensor({T, F});
  g.bed_lfe_im = Tensor({T, F});
  std::copy_n(prod.bed.re.data() + 3 * plane, plane, g.bed_lfe_re.data());
  std::copy_n(prod.bed.im.data() + 3 * plane, plane, g.bed_lfe_im.data());

  g.mix_positional_mean_mag = Tensor({1}, 1.0);
  if (mix51) {
    double acc = 0.0;
    for (int c = 0; c < 5; ++c) {
      const double* rp = mix51->re.data() + kPos[c] * plane;
      const double* ip = mix51->im.data() + kPos[c] * plane;
      for (int64_t i = 0; i < plane; ++i)
        acc += std::sqrt(rp[i] * rp[i] + ip[i] * ip[i]);
    }
    g.mix_positional_mean_mag[0] = acc / static_cast<double>(5 * plane);
  }
  return g;
}

LossBreakdown supervised_loss(const spatial::ObjectProduction& prod,
                              const std::map<std::string, dsp::StftTensor>& refs,
                              const LossWeights& w) {
  Tape tp;
  auto it = refs.find("5.1");
  model::EncodeGraph g = production_graph(tp, prod, it == refs.end() ? nullptr : &it->second);
  LossGraph lg = supervised_loss_graph(tp, g, refs, w);
  return lg.values(tp);
}

LossBreakdown unsupervised_loss(const spatial::ObjectProduction& prod,
                                const dsp::StftTensor& mix51,
                                const LossWeights& w) {
  Tape tp;
  model::EncodeGraph g = production_graph(tp, prod, &mix51);
  LossGraph lg = unsupervised_loss_graph(tp, g, mix51, w);
  return lg.values(tp);
}

namespace {

double eval_term_graph(const spatial::ObjectProduction& prod,
                       const dsp::StftTensor* mix51,
                       VarId (*builder)(Tape&, const model::EncodeGraph&)) {
  Tape tp;
  model::EncodeGraph g = production_graph(tp, prod, mix51);
  return tp.val(builder(tp, g))[0];
}

}  // namespace

double reg_bed_content(const spatial::ObjectProduction& prod,
                       const dsp::StftTensor& mix51) {
  Tape tp;
  model::EncodeGraph g = production_graph(tp, prod, &mix51);
  return tp.val(reg_bed_content_graph(tp, g))[0];
}

double reg_speaker_proximity(const spatial::ObjectProduction& prod, double sigma) {
  Tape tp;
  model::EncodeGraph g = production_graph(tp, prod, nullptr);
  return tp.val(reg_speaker_proximity_graph(tp, g, sigma))[0];
}

double reg_slow_motion(const spatial::ObjectProduction& prod, double v_min) {
  Tape tp;
  model::EncodeGraph g = production_graph(tp, prod, nullptr);
  return tp.val(reg_slow_motion_graph(tp, g, v_min))[0];
}

double reg_acceleration(const spatial::ObjectProduction& prod, double a_max) {
  Tape tp;
  model::EncodeGraph g = production_graph(tp, prod, nullptr);
  return tp.val(reg_acceleration_graph(tp, g, a_max))[0];
}

double reg_object_proximity(const spatial::ObjectProduction& prod, double sigma) {
  Tape tp;
  model::EncodeGraph g = production_graph(tp, prod, nullptr);
  return tp.val(reg_object_proximity_graph(tp, g, sigma))[0];
}

double reg_traj_correlation(const spatial::ObjectProduction& prod) {
  return eval_term_graph(prod, nullptr, &reg_traj_correlation_graph);
}

double reg_content_correlation(const spatial::ObjectProduction& prod) {
  return eval_term_graph(prod, nullptr, &reg_content_correlation_graph);
}

}  // namespace objx::loss
