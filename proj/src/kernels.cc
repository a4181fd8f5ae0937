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

#include "objx/kernels.hpp"

#include <algorithm>

#include "objx/threading.hpp"

namespace objx::kern {

namespace {
inline int64_t idx3(int a, int b, int c, int nb, int nc) {
  return (static_cast<int64_t>(a) * nb + b) * nc + c;
}
}  // namespace

void conv2d_forward_serial(const double* in, const double* wgt,
                           const double* bias, int ci, int h, int w, int co,
                           int k, double* out) {
  const int p = (k - 1) / 2;
  for (int oc = 0; oc < co; ++oc) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = bias ? bias[oc] : 0.0;
        for (int ic = 0; ic < ci; ++ic)
          for (int dy = 0; dy < k; ++dy) {
            const int iy = y + dy - p;
            if (iy < 0 || iy >= h) continue;
            for (int dx = 0; dx < k; ++dx) {
              const int ix = x + dx - p;
              if (ix < 0 || ix >= w) continue;
              acc += wgt[idx3(oc, ic, dy * k + dx, ci, k * k)] *
                     in[idx3(ic, iy, ix, h, w)];
            }
          }
        out[idx3(oc, y, x, h, w)] = acc;
      }
  }
}

void conv2d_forward(const double* in, const double* wgt, const double* bias,
                    int ci, int h, int w, int co, int k, double* out) {
  const int p = (k - 1) / 2;
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static)
  for (int oc = 0; oc < co; ++oc) {
    double* orow = out + idx3(oc, 0, 0, h, w);
    const double b = bias ? bias[oc] : 0.0;
    std::fill(orow, orow + static_cast<int64_t>(h) * w, b);
    for (int ic = 0; ic < ci; ++ic) {
      const double* irow = in + idx3(ic, 0, 0, h, w);
      const double* wk = wgt + idx3(oc, ic, 0, ci, k * k);
      for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx) {
          const double wv = wk[dy * k + dx];
          if (wv == 0.0) continue;
          for (int y = 0; y < h; ++y) {
            const int iy = y + dy - p;
            if (iy < 0 || iy >= h) continue;
            const int x0 = std::max(0, p - dx);
            const int x1 = std::min(w, w + p - dx);
            const double* ip = irow + static_cast<int64_t>(iy) * w + (x0 + dx - p);
            double* op = orow + static_cast<int64_t>(y) * w + x0;
            for (int x = x0; x < x1; ++x) *op++ += wv * *ip++;
          }
        }
    }
  }
}

void conv2d_backward_input_serial(const double* dout, const double* wgt,
                                  int ci, int h, int w, int co, int k,
                                  double* din) {
  const int p = (k - 1) / 2;
  for (int ic = 0; ic < ci; ++ic)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int oc = 0; oc < co; ++oc)
          for (int dy = 0; dy < k; ++dy) {
            const int oy = y - dy + p;
            if (oy < 0 || oy >= h) continue;
            for (int dx = 0; dx < k; ++dx) {
              const int ox = x - dx + p;
              if (ox < 0 || ox >= w) continue;
              acc += wgt[idx3(oc, ic, dy * k + dx, ci, k * k)] *
                     dout[idx3(oc, oy, ox, h, w)];
            }
          }
        din[idx3(ic, y, x, h, w)] += acc;
      }
}

void conv2d_backward_input(const double* dout, const double* wgt, int ci,
                           int h, int w, int co, int k, double* din) {
  const int p = (k - 1) / 2;
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static)
  for (int ic = 0; ic < ci; ++ic) {
    double* drow = din + idx3(ic, 0, 0, h, w);
    for (int oc = 0; oc < co; ++oc) {
      const double* gout = dout + idx3(oc, 0, 0, h, w);
      const double* wk = wgt + idx3(oc, ic, 0, ci, k * k);
      for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx) {
          const double wv = wk[dy * k + dx];
          if (wv == 0.0) continue;
          for (int y = 0; y < h; ++y) {
            const int oy = y - dy + p;
            if (oy < 0 || oy >= h) continue;
            const int x0 = std::max(0, dx - p);
            const int x1 = std::min(w, w + dx - p);
            const double* gp = gout + static_cast<int64_t>(oy) * w + (x0 - dx + p);
            double* dp = drow + static_cast<int64_t>(y) * w + x0;
            for (int x = x0; x < x1; ++x) *dp++ += wv * *gp++;
          }
        }
    }
  }
}

void conv2d_backward_params_serial(const double* dout, const double* in,
                                   int ci, int h, int w, int co, int k,
                                   double* dwgt, double* dbias) {
  const int p = (k - 1) / 2;
  for (int oc = 0; oc < co; ++oc) {
    double db = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) db += dout[idx3(oc, y, x, h, w)];
    dbias[oc] += db;
    for (int ic = 0; ic < ci; ++ic)
      for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx) {
          double acc = 0.0;
          for (int y = 0; y < h; ++y) {
            const int iy = y + dy - p;
            if (iy < 0 || iy >= h) continue;
            for (int x = 0; x < w; ++x) {
              const int ix = x + dx - p;
              if (ix < 0 || ix >= w) continue;
              acc += dout[idx3(oc, y, x, h, w)] * in[idx3(ic, iy, ix, h, w)];
            }
          }
          dwgt[idx3(oc, ic, dy * k + dx, ci, k * k)] += acc;
        }
  }
}

void conv2d_backward_params(const double* dout, const double* in, int ci,
                            int h, int w, int co, int k, double* dwgt,
                            double* dbias) {
  const int p = (k - 1) / 2;
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static)
  for (int oc = 0; oc < co; ++oc) {
    const double* gout = dout + idx3(oc, 0, 0, h, w);
    double db = 0.0;
    for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) db += gout[i];
    dbias[oc] += db;
    for (int ic = 0; ic < ci; ++ic) {
      const double* irow = in + idx3(ic, 0, 0, h, w);
      for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx) {
          double acc = 0.0;
          for (int y = 0; y < h; ++y) {
            const int iy = y + dy - p;
            if (iy < 0 || iy >= h) continue;
            const int x0 = std::max(0, p - dx);
            const int x1 = std::min(w, w + p - dx);
            const double* gp = gout + static_cast<int64_t>(y) * w + x0;
            const double* ip = irow + static_cast<int64_t>(iy) * w + (x0 + dx - p);
            for (int x = x0; x < x1; ++x) acc += *gp++ * *ip++;
          }
          dwgt[idx3(oc, ic, dy * k + dx, ci, k * k)] += acc;
        }
    }
  }
}

void avgpool2_forward(const double* in, int c, int h, int w, double* out) {
  const int oh = h / 2, ow = w / 2;
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const double* ip = in + idx3(ch, 0, 0, h, w);
    double* op = out + idx3(ch, 0, 0, oh, ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        op[static_cast<int64_t>(y) * ow + x] =
            0.25 * (ip[idx3(0, 2 * y, 2 * x, h, w)] +
                    ip[idx3(0, 2 * y, 2 * x + 1, h, w)] +
                    ip[idx3(0, 2 * y + 1, 2 * x, h, w)] +
                    ip[idx3(0, 2 * y + 1, 2 * x + 1, h, w)]);
  }
}

void avgpool2_backward(const double* dout, int c, int h, int w, double* din) {
  const int oh = h / 2, ow = w / 2;
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const double* gp = dout + idx3(ch, 0, 0, oh, ow);
    double* dp = din + idx3(ch, 0, 0, h, w);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const double g = 0.25 * gp[static_cast<int64_t>(y) * ow + x];
        dp[idx3(0, 2 * y, 2 * x, h, w)] += g;
        dp[idx3(0, 2 * y, 2 * x + 1, h, w)] += g;
        dp[idx3(0, 2 * y + 1, 2 * x, h, w)] += g;
        dp[idx3(0, 2 * y + 1, 2 * x + 1, h, w)] += g;
      }
  }
}

void upsample2_forward(const double* in, int c, int h, int w, double* out) {
  const int oh = h * 2, ow = w * 2;
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const double* ip = in + idx3(ch, 0, 0, h, w);
    double* op = out + idx3(ch, 0, 0, oh, ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        op[static_cast<int64_t>(y) * ow + x] =
            ip[static_cast<int64_t>(y / 2) * w + x / 2];
  }
}

void upsample2_backward(const double* dout, int c, int h, int w, double* din) {
  const int oh = h * 2, ow = w * 2;
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const double* gp = dout + idx3(ch, 0, 0, oh, ow);
    double* dp = din + idx3(ch, 0, 0, h, w);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        dp[static_cast<int64_t>(y / 2) * w + x / 2] +=
            gp[static_cast<int64_t>(y) * ow + x];
  }
}

void contract_channels_forward_serial(const double* g, const double* x,
                                      const double* addend, int c, int t,
                                      int f, double* out) {
  for (int tt = 0; tt < t; ++tt)
    for (int ff = 0; ff < f; ++ff) {
      double acc = addend ? addend[static_cast<int64_t>(tt) * f + ff] : 0.0;
      for (int cc = 0; cc < c; ++cc)
        acc += g[static_cast<int64_t>(cc) * t + tt] *
               x[idx3(cc, tt, ff, t, f)];
      out[static_cast<int64_t>(tt) * f + ff] = acc;
    }
}

void contract_channels_forward(const double* g, const double* x,
                               const double* addend, int c, int t, int f,
                               double* out) {
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static)
  for (int tt = 0; tt < t; ++tt) {
    double* op = out + static_cast<int64_t>(tt) * f;
    if (addend) {
      const double* ap = addend + static_cast<int64_t>(tt) * f;
      for (int ff = 0; ff < f; ++ff) op[ff] = ap[ff];
    } else {
      for (int ff = 0; ff < f; ++ff) op[ff] = 0.0;
    }
    for (int cc = 0; cc < c; ++cc) {
      const double gv = g[static_cast<int64_t>(cc) * t + tt];
      if (gv == 0.0) continue;
      const double* xp = x + idx3(cc, tt, 0, t, f);
      for (int ff = 0; ff < f; ++ff) op[ff] += gv * xp[ff];
    }
  }
}

}  // namespace objx::kern
