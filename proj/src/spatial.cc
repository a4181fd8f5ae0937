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

#include "objx/spatial.hpp"

#include <cmath>
#include <map>
#include <memory>

#include "objx/errors.hpp"
#include "objx/threading.hpp"

namespace objx::spatial {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfPi = kPi / 2.0;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }
}  // namespace

SpeakerLayout::SpeakerLayout(std::string name, std::vector<std::string> channels,
                             int lfe_index, std::vector<SpeakerRow> rows)
    : name_(std::move(name)),
      channels_(std::move(channels)),
      lfe_index_(lfe_index),
      rows_(std::move(rows)) {
  for (int c = 0; c < num_channels(); ++c)
    if (c != lfe_index_) pos_to_full_.push_back(c);
  positions_.resize(static_cast<size_t>(num_positional()));
  for (auto& row : rows_)
    for (auto& spk : row.speakers) {
      for (size_t p = 0; p < pos_to_full_.size(); ++p)
        if (channels_[static_cast<size_t>(pos_to_full_[p])] == spk.label) {
          spk.channel = pos_to_full_[p];
          spk.positional = static_cast<int>(p);
        }
      if (spk.positional < 0)
        throw ValidationError("layout " + name_ + ": unknown speaker " + spk.label);
      positions_[static_cast<size_t>(spk.positional)] = Position{spk.x, row.y};
    }
}

const std::vector<std::string>& SpeakerLayout::names() {
  static const std::vector<std::string> n = {"2.0", "5.1", "7.1", "9.1"};
  return n;
}

const SpeakerLayout& SpeakerLayout::get(const std::string& name) {
  static const std::map<std::string, std::shared_ptr<SpeakerLayout>> layouts = [] {
    std::map<std::string, std::shared_ptr<SpeakerLayout>> m;
    m["2.0"] = std::make_shared<SpeakerLayout>(
        "2.0", std::vector<std::string>{"L", "R"}, -1,
        std::vector<SpeakerRow>{{0.0, {{"L", 0.0}, {"R", 1.0}}}});
    m["5.1"] = std::make_shared<SpeakerLayout>(
        "5.1", std::vector<std::string>{"L", "R", "C", "LFE", "Ls", "Rs"}, 3,
        std::vector<SpeakerRow>{{0.0, {{"L", 0.0}, {"C", 0.5}, {"R", 1.0}}},
                                {1.0, {{"Ls", 0.0}, {"Rs", 1.0}}}});
    m["7.1"] = std::make_shared<SpeakerLayout>(
        "7.1",
        std::vector<std::string>{"L", "R", "C", "LFE", "Lss", "Rss", "Ls", "Rs"},
        3,
        std::vector<SpeakerRow>{{0.0, {{"L", 0.0}, {"C", 0.5}, {"R", 1.0}}},
                                {0.5, {{"Lss", 0.0}, {"Rss", 1.0}}},
                                {1.0, {{"Ls", 0.0}, {"Rs", 1.0}}}});
    m["9.1"] = std::make_shared<SpeakerLayout>(
        "9.1",
        std::vector<std::string>{"L", "R", "C", "LFE", "Lw", "Rw", "Lss", "Rss",
                                 "Ls", "Rs"},
        3,
        std::vector<SpeakerRow>{{0.0,
                                 {{"L", 0.0},
                                  {"Lw", 0.25},
                                  {"C", 0.5},
                                  {"Rw", 0.75},
                                  {"R", 1.0}}},
                                {0.5, {{"Lss", 0.0}, {"Rss", 1.0}}},
                                {1.0, {{"Ls", 0.0}, {"Rs", 1.0}}}});
    return m;
  }();
  auto it = layouts.find(name);
  if (it == layouts.end()) throw DataError("unknown speaker layout: " + name);
  return *it->second;
}

double trim(double y) { return std::exp(kTrimLogSlope * clamp01(y)); }

void pan_gains_detail(const SpeakerLayout& layout, double x, double y,
                      bool with_trim, double* g, double* dgdx, double* dgdy) {
  const double cx = clamp01(x);
  const double cy = clamp01(y);
  const auto& rows = layout.rows();
  const int P = layout.num_positional();
  for (int i = 0; i < P; ++i) {
    g[i] = 0.0;
    if (dgdx) dgdx[i] = 0.0;
    if (dgdy) dgdy[i] = 0.0;
  }
  const double tf = with_trim ? trim(cy) : 1.0;
  const double dtf = with_trim ? kTrimLogSlope * tf : 0.0;

  // Active rows: the two bracketing cy, with cos/sin balance; single-row
  // layouts get the whole signal.
  struct ActiveRow {
    const SpeakerRow* row;
    double gain;
    double dgain_dy;
  };
  ActiveRow active[2];
  int n_active = 0;
  if (rows.size() == 1) {
    active[n_active++] = {&rows[0], 1.0, 0.0};
  } else {
    size_t j = 0;
    while (j + 2 < rows.size() && rows[j + 1].y <= cy) ++j;
    const double ya = rows[j].y, yb = rows[j + 1].y;
    const double rate = kHalfPi / (yb - ya);
    const double th = (cy - ya) * rate;
    active[n_active++] = {&rows[j], std::cos(th), -std::sin(th) * rate};
    active[n_active++] = {&rows[j + 1], std::sin(th), std::cos(th) * rate};
  }

  for (int a = 0; a < n_active; ++a) {
    const SpeakerRow& row = *active[a].row;
    const double rg = active[a].gain;
    const double drg = active[a].dgain_dy;
    const auto& spk = row.speakers;
    size_t k = 0;
    while (k + 2 < spk.size() && spk[k + 1].x <= cx) ++k;
    const double xa = spk[k].x, xb = spk[k + 1].x;
    const double rate = kHalfPi / (xb - xa);
    const double th = (cx - xa) * rate;
    const double ga = std::cos(th), gb = std::sin(th);
    const double dga = -std::sin(th) * rate, dgb = std::cos(th) * rate;
    const int ia = spk[k].positional, ib = spk[k + 1].positional;
    g[ia] += rg * ga * tf;
    g[ib] += rg * gb * tf;
    if (dgdx) {
      dgdx[ia] += rg * dga * tf;
      dgdx[ib] += rg * dgb * tf;
    }
    if (dgdy) {
      dgdy[ia] += drg * ga * tf + rg * ga * dtf;
      dgdy[ib] += drg * gb * tf + rg * gb * dtf;
    }
  }
}

GainVector pan_gains(Position p, const SpeakerLayout& layout) {
  GainVector out;
  out.g.resize(static_cast<size_t>(layout.num_positional()));
  pan_gains_detail(layout, p.x, p.y, true, out.g.data(), nullptr, nullptr);
  return out;
}

std::vector<std::vector<double>> bed_fold_weights(const SpeakerLayout& layout) {
  // Source order: 5.1 positional L,R,C,Ls,Rs.
  const int P = layout.num_positional();
  std::vector<std::vector<double>> w(static_cast<size_t>(P),
                                     std::vector<double>(5, 0.0));
  const auto& names = layout.channel_names();
  const double q = std::sqrt(0.5);
  if (layout.name() == "2.0") {
    w[0] = {1.0, 0.0, q, q, 0.0};  // L <- L + .707 C + .707 Ls
    w[1] = {0.0, 1.0, q, 0.0, q};  // R <- R + .707 C + .707 Rs
    return w;
  }
  // 5.1/7.1/9.1: same-named speakers pass through, everything else silent.
  const std::vector<std::string> src = {"L", "R", "C", "Ls", "Rs"};
  for (int p = 0; p < P; ++p) {
    const std::string& label = names[static_cast<size_t>(layout.full_channel(p))];
    for (size_t s = 0; s < src.size(); ++s)
      if (label == src[s]) w[static_cast<size_t>(p)][s] = 1.0;
  }
  return w;
}

dsp::StftTensor render(const ObjectProduction& prod, const SpeakerLayout& layout) {
  prod.bed.check_consistent("render bed");
  if (prod.bed.channels() != 6)
    throw ShapeError("render: bed must have 6 channels (5.1)");
  const int T = prod.bed.frames();
  const int F = prod.bed.freqs();
  for (const auto& obj : prod.objects) {
    obj.stft.check_consistent("render object");
    if (obj.stft.channels() != 1)
      throw ShapeError("render: object tracks must be mono");
    if (obj.stft.frames() != T || obj.traj.frames() != T)
      throw ShapeError("render: frame count mismatch");
    if (obj.stft.freqs() != F) throw ShapeError("render: freq count mismatch");
  }

  const int C = layout.num_channels();
  const int P = layout.num_positional();
  dsp::StftTensor out = dsp::StftTensor::zeros(C, T, F);

  // Bed fold into positional channels, LFE passthrough.
  const auto fold = bed_fold_weights(layout);
  // 5.1 bed positional full-channel indices: L,R,C,Ls,Rs = 0,1,2,4,5.
  static const int kBedPos[5] = {0, 1, 2, 4, 5};
  for (int p = 0; p < P; ++p) {
    const int oc = layout.full_channel(p);
    for (int s = 0; s < 5; ++s) {
      const double wv = fold[static_cast<size_t>(p)][static_cast<size_t>(s)];
      if (wv == 0.0) continue;
      const int64_t n = static_cast<int64_t>(T) * F;
      const double* sre = prod.bed.re.data() + static_cast<int64_t>(kBedPos[s]) * n;
      const double* sim = prod.bed.im.data() + static_cast<int64_t>(kBedPos[s]) * n;
      double* dre = out.re.data() + static_cast<int64_t>(oc) * n;
      double* dim = out.im.data() + static_cast<int64_t>(oc) * n;
      for (int64_t i = 0; i < n; ++i) {
        dre[i] += wv * sre[i];
        dim[i] += wv * sim[i];
      }
    }
  }
  if (layout.has_lfe()) {
    const int64_t n = static_cast<int64_t>(T) * F;
    std::copy_n(prod.bed.re.data() + 3 * n, n,
                out.re.data() + static_cast<int64_t>(layout.lfe_index()) * n);
    std::copy_n(prod.bed.im.data() + 3 * n, n,
                out.im.data() + static_cast<int64_t>(layout.lfe_index()) * n);
  }

  std::vector<double> g(static_cast<size_t>(P));
  for (const auto& obj : prod.objects) {
    for (int t = 0; t < T; ++t) {
      const Position& p = obj.traj.p[static_cast<size_t>(t)];
      pan_gains_detail(layout, p.x, p.y, true, g.data(), nullptr, nullptr);
      const double* sre = obj.stft.re.data() + static_cast<int64_t>(t) * F;
      const double* sim = obj.stft.im.data() + static_cast<int64_t>(t) * F;
      for (int pp = 0; pp < P; ++pp) {
        const double gv = g[static_cast<size_t>(pp)];
        if (gv == 0.0) continue;
        const int oc = layout.full_channel(pp);
        double* dre = out.re.data() + (static_cast<int64_t>(oc) * T + t) * F;
        double* dim = out.im.data() + (static_cast<int64_t>(oc) * T + t) * F;
        for (int f = 0; f < F; ++f) {
          dre[f] += gv * sre[f];
          dim[f] += gv * sim[f];
        }
      }
    }
  }
  return out;
}

dsp::StftTensor render_single_object(const dsp::StftTensor& mono,
                                     const Trajectory& traj,
                                     const SpeakerLayout& layout) {
  ObjectProduction prod;
  prod.objects.push_back(ObjectTrack{mono, traj});
  prod.bed = dsp::StftTensor::zeros(6, mono.frames(), mono.freqs());
  return render(prod, layout);
}

void depan_core(const double* e, int T, const DepanOptions& opts, double* x,
                double* y, DepanRecord* rec) {
  const double eps = opts.eps;
  if (rec) {
    rec->branch.assign(static_cast<size_t>(T), 0);
    rec->raw_x.assign(static_cast<size_t>(T), 0.0);
    rec->raw_y.assign(static_cast<size_t>(T), 0.0);
  }
  double hx = 0.5, hy = 0.5;  // held raw estimate
  std::vector<double> rx(static_cast<size_t>(T)), ry(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    const double eL = e[0 * T + t], eR = e[1 * T + t], eC = e[2 * T + t];
    const double eLs = e[3 * T + t], eRs = e[4 * T + t];
    const double ef = eL + eR + eC;
    const double eb = eLs + eRs;
    const double tot = ef + eb;
    uint8_t branch = 0;
    if (tot >= opts.silence_eps) {
      const double uf = std::sqrt(ef + eps), ub = std::sqrt(eb + eps);
      hy = (2.0 / kPi) * std::atan2(ub, uf);
      double xf;
      if (eR <= 1e-6 * ef) {
        branch = 1;
        xf = std::atan2(std::sqrt(eC + eps), std::sqrt(eL + eps)) / kPi;
      } else if (eL <= 1e-6 * ef) {
        branch = 2;
        xf = 0.5 + std::atan2(std::sqrt(eR + eps), std::sqrt(eC + eps)) / kPi;
      } else {
        branch = 3;
        xf = (0.5 * eC + eR) / (ef + eps);
      }
      const double xb = (2.0 / kPi) * std::atan2(std::sqrt(eRs + eps),
                                                 std::sqrt(eLs + eps));
      hx = (ef * xf + eb * xb) / (tot + eps);
    }
    rx[static_cast<size_t>(t)] = hx;
    ry[static_cast<size_t>(t)] = hy;
    if (rec) {
      rec->branch[static_cast<size_t>(t)] = branch;
      rec->raw_x[static_cast<size_t>(t)] = hx;
      rec->raw_y[static_cast<size_t>(t)] = hy;
    }
  }
  if (opts.smooth) {
    double sx = 0.5, sy = 0.5;
    for (int t = 0; t < T; ++t) {
      sx = opts.alpha * rx[static_cast<size_t>(t)] + (1.0 - opts.alpha) * sx;
      sy = opts.alpha * ry[static_cast<size_t>(t)] + (1.0 - opts.alpha) * sy;
      x[t] = sx;
      y[t] = sy;
    }
  } else {
    for (int t = 0; t < T; ++t) {
      x[t] = rx[static_cast<size_t>(t)];
      y[t] = ry[static_cast<size_t>(t)];
    }
  }
}

namespace {

// Positional 5.1 energies e[5][T] from a 6-channel tensor, LFE dropped.
std::vector<double> positional_energies(const dsp::StftTensor& s) {
  static const int kPos[5] = {0, 1, 2, 4, 5};
  const int T = s.frames(), F = s.freqs();
  std::vector<double> e(static_cast<size_t>(5 * T));
  for (int c = 0; c < 5; ++c)
    for (int t = 0; t < T; ++t) {
      const int64_t off = (static_cast<int64_t>(kPos[c]) * T + t) * F;
      const double* rp = s.re.data() + off;
      const double* ip = s.im.data() + off;
      double acc = 0.0;
      for (int f = 0; f < F; ++f) acc += rp[f] * rp[f] + ip[f] * ip[f];
      e[static_cast<size_t>(c * T + t)] = acc;
    }
  return e;
}

}  // namespace

Trajectory depan(const dsp::StftTensor& obj51, const DepanOptions& opts) {
  obj51.check_consistent("depan");
  if (obj51.channels() != 6)
    throw ShapeError("depan: expected a 6-channel 5.1 tensor");
  const int T = obj51.frames();
  const auto e = positional_energies(obj51);
  std::vector<double> x(static_cast<size_t>(T)), y(static_cast<size_t>(T));
  depan_core(e.data(), T, opts, x.data(), y.data(), nullptr);
  Trajectory traj;
  traj.p.resize(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t)
    traj.p[static_cast<size_t>(t)] = Position{x[static_cast<size_t>(t)],
                                              y[static_cast<size_t>(t)]};
  return traj;
}

namespace {

dsp::StftTensor trim_scale(const dsp::StftTensor& mono, const Trajectory& traj,
                           bool inverse) {
  mono.check_consistent("detrim");
  if (mono.channels() != 1) throw ShapeError("detrim: mono tensor expected");
  const int T = mono.frames(), F = mono.freqs();
  if (traj.frames() != T) throw ShapeError("detrim: frame count mismatch");
  dsp::StftTensor out = mono;
  for (int t = 0; t < T; ++t) {
    const double tv = trim(traj.p[static_cast<size_t>(t)].y);
    const double s = inverse ? 1.0 / tv : tv;
    double* rp = out.re.data() + static_cast<int64_t>(t) * F;
    double* ip = out.im.data() + static_cast<int64_t>(t) * F;
    for (int f = 0; f < F; ++f) {
      rp[f] *= s;
      ip[f] *= s;
    }
  }
  return out;
}

}  // namespace

dsp::StftTensor detrim(const dsp::StftTensor& mono, const Trajectory& traj) {
  return trim_scale(mono, traj, true);
}

dsp::StftTensor apply_trim(const dsp::StftTensor& mono, const Trajectory& traj) {
  return trim_scale(mono, traj, false);
}

dsp::StftTensor extract_mono(const dsp::StftTensor& obj51, const Trajectory& traj) {
  obj51.check_consistent("extract_mono");
  if (obj51.channels() != 6)
    throw ShapeError("extract_mono: expected a 6-channel 5.1 tensor");
  const int T = obj51.frames(), F = obj51.freqs();
  if (traj.frames() != T) throw ShapeError("extract_mono: frame count mismatch");
  const auto& layout = SpeakerLayout::get("5.1");
  static const int kPos[5] = {0, 1, 2, 4, 5};
  constexpr double kEps = 1e-12;

  dsp::StftTensor out = dsp::StftTensor::zeros(1, T, F);
  std::vector<double> g(5);
  for (int t = 0; t < T; ++t) {
    const Position& p = traj.p[static_cast<size_t>(t)];
    pan_gains_detail(layout, p.x, p.y, false, g.data(), nullptr, nullptr);
    double den = kEps;
    for (double gv : g) den += gv * gv;
    const double tv = trim(p.y);
    double* rp = out.re.data() + static_cast<int64_t>(t) * F;
    double* ip = out.im.data() + static_cast<int64_t>(t) * F;
    for (int c = 0; c < 5; ++c) {
      const double gv = g[static_cast<size_t>(c)];
      if (gv == 0.0) continue;
      const int64_t off = (static_cast<int64_t>(kPos[c]) * T + t) * F;
      const double* sre = obj51.re.data() + off;
      const double* sim = obj51.im.data() + off;
      const double s = gv / den;
      for (int f = 0; f < F; ++f) {
        rp[f] += s * sre[f];
        ip[f] += s * sim[f];
      }
    }
    // De-trim.
    const double inv = 1.0 / tv;
    for (int f = 0; f < F; ++f) {
      rp[f] *= inv;
      ip[f] *= inv;
    }
  }
  return out;
}

}  // namespace objx::spatial
