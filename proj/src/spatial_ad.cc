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

// Tape adjoints for the panner and de-panner. Branch points (speaker pair
// selection, silence hold) propagate through the branch taken forward.

#include <cmath>
#include <memory>

#include "objx/errors.hpp"
#include "objx/spatial.hpp"

namespace objx::spatial {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ad::VarId pan_gains_op(ad::Tape& tp, ad::VarId x, ad::VarId y,
                       const SpeakerLayout& layout, bool with_trim) {
  const Tensor& xv = tp.val(x);
  const Tensor& yv = tp.val(y);
  if (xv.ndim() != 1 || !same_shape(xv, yv))
    throw ShapeError("pan_gains_op: [T] trajectories expected");
  const int T = xv.dim(0);
  const int P = layout.num_positional();
  Tensor out({P, T});
  auto dx = std::make_shared<Tensor>(Tensor({P, T}));
  auto dy = std::make_shared<Tensor>(Tensor({P, T}));
  std::vector<double> g(static_cast<size_t>(P)), gx(static_cast<size_t>(P)),
      gy(static_cast<size_t>(P));
  for (int t = 0; t < T; ++t) {
    pan_gains_detail(layout, xv[static_cast<size_t>(t)], yv[static_cast<size_t>(t)],
                     with_trim, g.data(), gx.data(), gy.data());
    for (int p = 0; p < P; ++p) {
      out[static_cast<size_t>(p * T + t)] = g[static_cast<size_t>(p)];
      (*dx)[static_cast<size_t>(p * T + t)] = gx[static_cast<size_t>(p)];
      (*dy)[static_cast<size_t>(p * T + t)] = gy[static_cast<size_t>(p)];
    }
  }
  bool rg = tp.requires_grad(x) || tp.requires_grad(y);
  return tp.emit(std::move(out), rg, [x, y, dx, dy, P, T](ad::Tape& t2, ad::VarId self) {
    const Tensor& g2 = t2.grad(self);
    const bool need_x = t2.requires_grad(x);
    const bool need_y = t2.requires_grad(y);
    Tensor* gxv = need_x ? &t2.grad(x) : nullptr;
    Tensor* gyv = need_y ? &t2.grad(y) : nullptr;
    for (int t = 0; t < T; ++t) {
      double ax = 0.0, ay = 0.0;
      for (int p = 0; p < P; ++p) {
        const double gv = g2[static_cast<size_t>(p * T + t)];
        ax += gv * (*dx)[static_cast<size_t>(p * T + t)];
        ay += gv * (*dy)[static_cast<size_t>(p * T + t)];
      }
      if (need_x) (*gxv)[static_cast<size_t>(t)] += ax;
      if (need_y) (*gyv)[static_cast<size_t>(t)] += ay;
    }
  });
}

ad::VarId trim_row_op(ad::Tape& tp, ad::VarId y) {
  return ad::exp_op(tp, ad::scale(tp, y, kTrimLogSlope));
}

ad::VarId depan_op(ad::Tape& tp, ad::VarId energies, const DepanOptions& opts) {
  const Tensor& ev = tp.val(energies);
  if (ev.ndim() != 2 || ev.dim(0) != 5)
    throw ShapeError("depan_op: energies [5][T] expected");
  const int T = ev.dim(1);
  Tensor out({2, T});
  auto rec = std::make_shared<DepanRecord>();
  depan_core(ev.data(), T, opts, out.data(), out.data() + T, rec.get());

  bool rg = tp.requires_grad(energies);
  return tp.emit(std::move(out), rg, [energies, rec, opts, T](ad::Tape& t2,
                                                              ad::VarId self) {
    const Tensor& g = t2.grad(self);
    const Tensor& ev2 = t2.val(energies);
    Tensor& ge = t2.grad(energies);
    const double eps = opts.eps;

    std::vector<double> drx(static_cast<size_t>(T)), dry(static_cast<size_t>(T));
    if (opts.smooth) {
      // s_t = a r_t + (1-a) s_{t-1}
      double cx = 0.0, cy = 0.0;
      for (int t = T - 1; t >= 0; --t) {
        const double gx = g[static_cast<size_t>(t)] + cx;
        const double gy = g[static_cast<size_t>(T + t)] + cy;
        drx[static_cast<size_t>(t)] = opts.alpha * gx;
        dry[static_cast<size_t>(t)] = opts.alpha * gy;
        cx = (1.0 - opts.alpha) * gx;
        cy = (1.0 - opts.alpha) * gy;
      }
    } else {
      for (int t = 0; t < T; ++t) {
        drx[static_cast<size_t>(t)] = g[static_cast<size_t>(t)];
        dry[static_cast<size_t>(t)] = g[static_cast<size_t>(T + t)];
      }
    }
    // Held frames copy the previous raw estimate.
    for (int t = T - 1; t >= 1; --t)
      if (rec->branch[static_cast<size_t>(t)] == 0) {
        drx[static_cast<size_t>(t - 1)] += drx[static_cast<size_t>(t)];
        dry[static_cast<size_t>(t - 1)] += dry[static_cast<size_t>(t)];
      }

    for (int t = 0; t < T; ++t) {
      const uint8_t br = rec->branch[static_cast<size_t>(t)];
      if (br == 0) continue;
      const double gx = drx[static_cast<size_t>(t)];
      const double gy = dry[static_cast<size_t>(t)];
      if (gx == 0.0 && gy == 0.0) continue;
      const double eL = ev2[static_cast<size_t>(0 * T + t)];
      const double eR = ev2[static_cast<size_t>(1 * T + t)];
      const double eC = ev2[static_cast<size_t>(2 * T + t)];
      const double eLs = ev2[static_cast<size_t>(3 * T + t)];
      const double eRs = ev2[static_cast<size_t>(4 * T + t)];
      const double ef = eL + eR + eC;
      const double eb = eLs + eRs;

      // y = (2/pi) atan2(sqrt(eb+eps), sqrt(ef+eps))
      const double uf = std::sqrt(ef + eps), ub = std::sqrt(eb + eps);
      const double s2 = ef + eb + 2.0 * eps;
      const double dy_def = -ub / (kPi * s2 * uf);
      const double dy_deb = uf / (kPi * s2 * ub);

      // Front estimate and its partials (branch-dependent).
      double xf, dxf_deL = 0.0, dxf_deC = 0.0, dxf_deR = 0.0;
      if (br == 1) {
        const double uL = std::sqrt(eL + eps), uC = std::sqrt(eC + eps);
        const double s = eL + eC + 2.0 * eps;
        xf = std::atan2(uC, uL) / kPi;
        dxf_deC = uL / (kPi * s * 2.0 * uC);
        dxf_deL = -uC / (kPi * s * 2.0 * uL);
      } else if (br == 2) {
        const double uC = std::sqrt(eC + eps), uR = std::sqrt(eR + eps);
        const double s = eC + eR + 2.0 * eps;
        xf = 0.5 + std::atan2(uR, uC) / kPi;
        dxf_deR = uC / (kPi * s * 2.0 * uR);
        dxf_deC = -uR / (kPi * s * 2.0 * uC);
      } else {
        const double den = ef + eps;
        const double num = 0.5 * eC + eR;
        xf = num / den;
        dxf_deL = -num / (den * den);
        dxf_deC = 0.5 / den - num / (den * den);
        dxf_deR = 1.0 / den - num / (den * den);
      }

      const double uLs = std::sqrt(eLs + eps), uRs = std::sqrt(eRs + eps);
      const double sb = eLs + eRs + 2.0 * eps;
      const double xb = (2.0 / kPi) * std::atan2(uRs, uLs);
      const double dxb_deRs = uLs / (kPi * sb * uRs);
      const double dxb_deLs = -uRs / (kPi * sb * uLs);

      const double totp = ef + eb + eps;
      const double num = ef * xf + eb * xb;
      const double dx_dxf = ef / totp;
      const double dx_dxb = eb / totp;
      const double dx_def = xf / totp - num / (totp * totp);
      const double dx_deb = xb / totp - num / (totp * totp);

      ge[static_cast<size_t>(0 * T + t)] +=
          gx * (dx_def + dx_dxf * dxf_deL) + gy * dy_def;
      ge[static_cast<size_t>(1 * T + t)] +=
          gx * (dx_def + dx_dxf * dxf_deR) + gy * dy_def;
      ge[static_cast<size_t>(2 * T + t)] +=
          gx * (dx_def + dx_dxf * dxf_deC) + gy * dy_def;
      ge[static_cast<size_t>(3 * T + t)] +=
          gx * (dx_deb + dx_dxb * dxb_deLs) + gy * dy_deb;
      ge[static_cast<size_t>(4 * T + t)] +=
          gx * (dx_deb + dx_dxb * dxb_deRs) + gy * dy_deb;
    }
  });
}

}  // namespace objx::spatial
