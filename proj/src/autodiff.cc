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

#include "objx/autodiff.hpp"

#include <cmath>
#include <memory>

#include "objx/kernels.hpp"
#include "objx/threading.hpp"

namespace objx::ad {

namespace {

constexpr int64_t kParChunk = 1 << 16;  // parallelize elementwise loops above this

void axpy(Tensor& dst, const Tensor& src, double a) {
  const int64_t n = src.numel();
  double* d = dst.data();
  const double* s = src.data();
  for (int64_t i = 0; i < n; ++i) d[i] += a * s[i];
}

template <class F>
void par_for(int64_t n, F&& f) {
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1 && n > kParChunk) schedule(static)
  for (int64_t i = 0; i < n; ++i) f(i);
}

}  // namespace

void Tape::backward(VarId root) {
  Node& r = nodes_[static_cast<size_t>(root)];
  if (r.val.numel() != 1)
    throw ShapeError("backward: root must be a scalar");
  grad(root)[0] = 1.0;
  for (VarId id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.rg && n.bwd && !n.grad.v.empty()) n.bwd(*this, id);
  }
}

// ---------- elementwise ----------

VarId add(Tape& tp, VarId a, VarId b) {
  check_same_shape(tp.val(a), tp.val(b), "add");
  Tensor out = tp.val(a);
  axpy(out, tp.val(b), 1.0);
  bool rg = tp.requires_grad(a) || tp.requires_grad(b);
  return tp.emit(std::move(out), rg, [a, b](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a)) axpy(t.grad(a), g, 1.0);
    if (t.requires_grad(b)) axpy(t.grad(b), g, 1.0);
  });
}

VarId sub(Tape& tp, VarId a, VarId b) {
  check_same_shape(tp.val(a), tp.val(b), "sub");
  Tensor out = tp.val(a);
  axpy(out, tp.val(b), -1.0);
  bool rg = tp.requires_grad(a) || tp.requires_grad(b);
  return tp.emit(std::move(out), rg, [a, b](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a)) axpy(t.grad(a), g, 1.0);
    if (t.requires_grad(b)) axpy(t.grad(b), g, -1.0);
  });
}

VarId mul(Tape& tp, VarId a, VarId b) {
  check_same_shape(tp.val(a), tp.val(b), "mul");
  const Tensor& av = tp.val(a);
  const Tensor& bv = tp.val(b);
  Tensor out(av.shape);
  par_for(av.numel(), [&](int64_t i) { out[i] = av[i] * bv[i]; });
  bool rg = tp.requires_grad(a) || tp.requires_grad(b);
  return tp.emit(std::move(out), rg, [a, b](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad(a);
      const Tensor& bv2 = t.val(b);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad(b);
      const Tensor& av2 = t.val(a);
      for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av2[i];
    }
  });
}

VarId div(Tape& tp, VarId a, VarId b) {
  check_same_shape(tp.val(a), tp.val(b), "div");
  const Tensor& av = tp.val(a);
  const Tensor& bv = tp.val(b);
  Tensor out(av.shape);
  par_for(av.numel(), [&](int64_t i) { out[i] = av[i] / bv[i]; });
  bool rg = tp.requires_grad(a) || tp.requires_grad(b);
  return tp.emit(std::move(out), rg, [a, b](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    const Tensor& av2 = t.val(a);
    const Tensor& bv2 = t.val(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / bv2[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad(b);
      for (int64_t i = 0; i < g.numel(); ++i)
        gb[i] -= g[i] * av2[i] / (bv2[i] * bv2[i]);
    }
  });
}

namespace {

// Shared shape for unary elementwise ops: fv computes value, fg computes
// local derivative from the parent value.
template <class FV, class FG>
VarId unary(Tape& tp, VarId x, FV fv, FG fg) {
  const Tensor& xv = tp.val(x);
  Tensor out(xv.shape);
  par_for(xv.numel(), [&](int64_t i) { out[i] = fv(xv[i]); });
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x, fg](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv2 = t.val(x);
    Tensor& gx = t.grad(x);
    const int64_t n = g.numel();
    for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * fg(xv2[i]);
  });
}

}  // namespace

VarId neg(Tape& tp, VarId x) {
  return unary(tp, x, [](double v) { return -v; }, [](double) { return -1.0; });
}

VarId scale(Tape& tp, VarId x, double c) {
  return unary(tp, x, [c](double v) { return c * v; }, [c](double) { return c; });
}

VarId add_const(Tape& tp, VarId x, double c) {
  return unary(tp, x, [c](double v) { return v + c; }, [](double) { return 1.0; });
}

VarId exp_op(Tape& tp, VarId x) {
  return unary(tp, x, [](double v) { return std::exp(v); },
               [](double v) { return std::exp(v); });
}

VarId log1p_op(Tape& tp, VarId x) {
  return unary(tp, x, [](double v) { return std::log1p(v); },
               [](double v) { return 1.0 / (1.0 + v); });
}

VarId sqrt_eps(Tape& tp, VarId x, double eps) {
  return unary(tp, x, [eps](double v) { return std::sqrt(v + eps); },
               [eps](double v) { return 0.5 / std::sqrt(v + eps); });
}

VarId square(Tape& tp, VarId x) {
  return unary(tp, x, [](double v) { return v * v; },
               [](double v) { return 2.0 * v; });
}

VarId abs_op(Tape& tp, VarId x) {
  return unary(tp, x, [](double v) { return std::fabs(v); },
               [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

VarId relu(Tape& tp, VarId x) {
  return unary(tp, x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

VarId leaky_relu(Tape& tp, VarId x, double slope) {
  return unary(tp, x, [slope](double v) { return v > 0.0 ? v : slope * v; },
               [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

VarId sigmoid_op(Tape& tp, VarId x) {
  return unary(tp, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](double v) {
                 double s = 1.0 / (1.0 + std::exp(-v));
                 return s * (1.0 - s);
               });
}

VarId mul_const(Tape& tp, VarId x, Tensor c) {
  check_same_shape(tp.val(x), c, "mul_const");
  auto cp = std::make_shared<Tensor>(std::move(c));
  const Tensor& xv = tp.val(x);
  Tensor out(xv.shape);
  const Tensor& cv = *cp;
  par_for(xv.numel(), [&](int64_t i) { out[i] = xv[i] * cv[i]; });
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x, cp](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    const Tensor& cv2 = *cp;
    for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * cv2[i];
  });
}

// ---------- scalar broadcast ----------

namespace {
void check_scalar(const Tensor& s, const char* where) {
  if (s.numel() != 1) throw ShapeError(std::string(where) + ": scalar expected");
}
}  // namespace

VarId add_scalar(Tape& tp, VarId x, VarId s) {
  check_scalar(tp.val(s), "add_scalar");
  const Tensor& xv = tp.val(x);
  const double sv = tp.val(s)[0];
  Tensor out(xv.shape);
  for (int64_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] + sv;
  bool rg = tp.requires_grad(x) || tp.requires_grad(s);
  return tp.emit(std::move(out), rg, [x, s](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(x)) axpy(t.grad(x), g, 1.0);
    if (t.requires_grad(s)) {
      double acc = 0.0;
      for (int64_t i = 0; i < g.numel(); ++i) acc += g[i];
      t.grad(s)[0] += acc;
    }
  });
}

VarId sub_scalar(Tape& tp, VarId x, VarId s) {
  check_scalar(tp.val(s), "sub_scalar");
  const Tensor& xv = tp.val(x);
  const double sv = tp.val(s)[0];
  Tensor out(xv.shape);
  for (int64_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] - sv;
  bool rg = tp.requires_grad(x) || tp.requires_grad(s);
  return tp.emit(std::move(out), rg, [x, s](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(x)) axpy(t.grad(x), g, 1.0);
    if (t.requires_grad(s)) {
      double acc = 0.0;
      for (int64_t i = 0; i < g.numel(); ++i) acc += g[i];
      t.grad(s)[0] -= acc;
    }
  });
}

VarId mul_scalar(Tape& tp, VarId x, VarId s) {
  check_scalar(tp.val(s), "mul_scalar");
  const Tensor& xv = tp.val(x);
  const double sv = tp.val(s)[0];
  Tensor out(xv.shape);
  for (int64_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] * sv;
  bool rg = tp.requires_grad(x) || tp.requires_grad(s);
  return tp.emit(std::move(out), rg, [x, s](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    const double sv2 = t.val(s)[0];
    if (t.requires_grad(x)) axpy(t.grad(x), g, sv2);
    if (t.requires_grad(s)) {
      const Tensor& xv2 = t.val(x);
      double acc = 0.0;
      for (int64_t i = 0; i < g.numel(); ++i) acc += g[i] * xv2[i];
      t.grad(s)[0] += acc;
    }
  });
}

// ---------- reductions ----------

VarId sum_all(Tape& tp, VarId x) {
  const Tensor& xv = tp.val(x);
  Tensor out({1});
  double acc = 0.0;
  for (int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
  out[0] = acc;
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x](Tape& t, VarId self) {
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad(x);
    for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

VarId mean_all(Tape& tp, VarId x) {
  const int64_t n = tp.val(x).numel();
  return scale(tp, sum_all(tp, x), 1.0 / static_cast<double>(n));
}

VarId sum_dim0(Tape& tp, VarId x) {
  const Tensor& xv = tp.val(x);
  if (xv.ndim() < 2) throw ShapeError("sum_dim0: rank >= 2 required");
  const int k = xv.dim(0);
  std::vector<int> oshape(xv.shape.begin() + 1, xv.shape.end());
  Tensor out(oshape);
  const int64_t m = out.numel();
  for (int j = 0; j < k; ++j) {
    const double* src = xv.data() + static_cast<int64_t>(j) * m;
    for (int64_t i = 0; i < m; ++i) out[i] += src[i];
  }
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x, k, m](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (int j = 0; j < k; ++j) {
      double* dst = gx.data() + static_cast<int64_t>(j) * m;
      for (int64_t i = 0; i < m; ++i) dst[i] += g[i];
    }
  });
}

VarId sum_last(Tape& tp, VarId x) {
  const Tensor& xv = tp.val(x);
  if (xv.ndim() < 1) throw ShapeError("sum_last: rank >= 1 required");
  const int f = xv.dim(xv.ndim() - 1);
  std::vector<int> oshape(xv.shape.begin(), xv.shape.end() - 1);
  if (oshape.empty()) oshape = {1};
  Tensor out(oshape);
  const int64_t rows = out.numel();
  for (int64_t r = 0; r < rows; ++r) {
    const double* src = xv.data() + r * f;
    double acc = 0.0;
    for (int i = 0; i < f; ++i) acc += src[i];
    out[static_cast<size_t>(r)] = acc;
  }
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x, f, rows](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (int64_t r = 0; r < rows; ++r) {
      double* dst = gx.data() + r * f;
      const double gv = g[static_cast<size_t>(r)];
      for (int i = 0; i < f; ++i) dst[i] += gv;
    }
  });
}

VarId min_rows(Tape& tp, VarId x) {
  const Tensor& xv = tp.val(x);
  if (xv.ndim() != 2) throw ShapeError("min_rows: [K][T] expected");
  const int k = xv.dim(0), n = xv.dim(1);
  Tensor out({n});
  auto arg = std::make_shared<std::vector<int>>(static_cast<size_t>(n));
  for (int t = 0; t < n; ++t) {
    double best = xv[static_cast<size_t>(t)];
    int bi = 0;
    for (int j = 1; j < k; ++j) {
      double v = xv[static_cast<size_t>(j * n + t)];
      if (v < best) {
        best = v;
        bi = j;
      }
    }
    out[static_cast<size_t>(t)] = best;
    (*arg)[static_cast<size_t>(t)] = bi;
  }
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x, arg, n](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (int i = 0; i < n; ++i)
      gx[static_cast<size_t>((*arg)[static_cast<size_t>(i)] * n + i)] += g[static_cast<size_t>(i)];
  });
}

// ---------- shape ----------

VarId concat0(Tape& tp, const std::vector<VarId>& xs) {
  if (xs.empty()) throw ShapeError("concat0: empty list");
  const Tensor& first = tp.val(xs[0]);
  std::vector<int> oshape = first.shape;
  int total = 0;
  for (VarId id : xs) {
    const Tensor& v = tp.val(id);
    if (!std::equal(v.shape.begin() + 1, v.shape.end(), first.shape.begin() + 1))
      throw ShapeError("concat0: trailing dims differ");
    total += v.dim(0);
  }
  oshape[0] = total;
  Tensor out(oshape);
  int64_t off = 0;
  for (VarId id : xs) {
    const Tensor& v = tp.val(id);
    std::copy(v.v.begin(), v.v.end(), out.v.begin() + off);
    off += v.numel();
  }
  bool rg = false;
  for (VarId id : xs) rg = rg || tp.requires_grad(id);
  auto list = std::make_shared<std::vector<VarId>>(xs);
  return tp.emit(std::move(out), rg, [list](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    int64_t off2 = 0;
    for (VarId id : *list) {
      const int64_t n = t.val(id).numel();
      if (t.requires_grad(id)) {
        Tensor& gx = t.grad(id);
        for (int64_t i = 0; i < n; ++i) gx[i] += g[static_cast<size_t>(off2 + i)];
      }
      off2 += n;
    }
  });
}

VarId slice0(Tape& tp, VarId x, int from, int count) {
  const Tensor& xv = tp.val(x);
  if (xv.ndim() < 1 || from < 0 || from + count > xv.dim(0))
    throw ShapeError("slice0: range out of bounds");
  std::vector<int> oshape = xv.shape;
  oshape[0] = count;
  int64_t stride = 1;
  for (size_t i = 1; i < xv.shape.size(); ++i) stride *= xv.shape[i];
  Tensor out(oshape);
  std::copy(xv.v.begin() + from * stride, xv.v.begin() + (from + count) * stride,
            out.v.begin());
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x, from, stride](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    const int64_t off = from * stride;
    for (int64_t i = 0; i < g.numel(); ++i) gx[static_cast<size_t>(off + i)] += g[i];
  });
}

VarId row0(Tape& tp, VarId x, int i) {
  VarId s = slice0(tp, x, i, 1);
  std::vector<int> shape = tp.val(s).shape;
  shape.erase(shape.begin());
  if (shape.empty()) shape = {1};
  return reshape(tp, s, shape);
}

VarId stack0(Tape& tp, const std::vector<VarId>& xs) {
  if (xs.empty()) throw ShapeError("stack0: empty list");
  const Tensor& first = tp.val(xs[0]);
  for (VarId id : xs) check_same_shape(tp.val(id), first, "stack0");
  std::vector<int> oshape;
  oshape.push_back(static_cast<int>(xs.size()));
  oshape.insert(oshape.end(), first.shape.begin(), first.shape.end());
  Tensor out(oshape);
  const int64_t m = first.numel();
  for (size_t j = 0; j < xs.size(); ++j)
    std::copy(tp.val(xs[j]).v.begin(), tp.val(xs[j]).v.end(),
              out.v.begin() + static_cast<int64_t>(j) * m);
  bool rg = false;
  for (VarId id : xs) rg = rg || tp.requires_grad(id);
  auto list = std::make_shared<std::vector<VarId>>(xs);
  return tp.emit(std::move(out), rg, [list, m](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    for (size_t j = 0; j < list->size(); ++j) {
      VarId id = (*list)[j];
      if (!t.requires_grad(id)) continue;
      Tensor& gx = t.grad(id);
      const double* src = g.data() + static_cast<int64_t>(j) * m;
      for (int64_t i = 0; i < m; ++i) gx[i] += src[i];
    }
  });
}

VarId slice_1d(Tape& tp, VarId x, int from, int len) {
  const Tensor& xv = tp.val(x);
  if (xv.ndim() != 1 || from < 0 || from + len > xv.dim(0))
    throw ShapeError("slice_1d: range out of bounds");
  Tensor out({len});
  std::copy(xv.v.begin() + from, xv.v.begin() + from + len, out.v.begin());
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x, from, len](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (int i = 0; i < len; ++i) gx[static_cast<size_t>(from + i)] += g[static_cast<size_t>(i)];
  });
}

VarId reshape(Tape& tp, VarId x, std::vector<int> shape) {
  const Tensor& xv = tp.val(x);
  if (Tensor::numel_of(shape) != xv.numel())
    throw ShapeError("reshape: element count mismatch");
  Tensor out;
  out.shape = std::move(shape);
  out.v = xv.v;
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x](Tape& t, VarId self) {
    axpy(t.grad(x), t.grad(self), 1.0);
  });
}

// ---------- network blocks ----------

VarId conv2d(Tape& tp, VarId in, VarId w, VarId b, int k) {
  const Tensor& iv = tp.val(in);
  const Tensor& wv = tp.val(w);
  const Tensor& bv = tp.val(b);
  if (iv.ndim() != 3) throw ShapeError("conv2d: input [C][H][W] expected");
  const int ci = iv.dim(0), h = iv.dim(1), ww = iv.dim(2);
  const int co = wv.dim(0);
  if (wv.numel() != static_cast<int64_t>(co) * ci * k * k || bv.numel() != co)
    throw ShapeError("conv2d: weight/bias shape mismatch");
  Tensor out({co, h, ww});
  kern::conv2d_forward(iv.data(), wv.data(), bv.data(), ci, h, ww, co, k,
                       out.data());
  bool rg = tp.requires_grad(in) || tp.requires_grad(w) || tp.requires_grad(b);
  return tp.emit(std::move(out), rg,
                 [in, w, b, ci, h, ww, co, k](Tape& t, VarId self) {
                   const Tensor& g = t.grad(self);
                   if (t.requires_grad(in))
                     kern::conv2d_backward_input(g.data(), t.val(w).data(), ci,
                                                 h, ww, co, k,
                                                 t.grad(in).data());
                   if (t.requires_grad(w) || t.requires_grad(b))
                     kern::conv2d_backward_params(g.data(), t.val(in).data(),
                                                  ci, h, ww, co, k,
                                                  t.grad(w).data(),
                                                  t.grad(b).data());
                 });
}

VarId avgpool2(Tape& tp, VarId x) {
  const Tensor& xv = tp.val(x);
  if (xv.ndim() != 3) throw ShapeError("avgpool2: [C][H][W] expected");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (h % 2 || w % 2) throw ShapeError("avgpool2: odd spatial dims");
  Tensor out({c, h / 2, w / 2});
  kern::avgpool2_forward(xv.data(), c, h, w, out.data());
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x, c, h, w](Tape& t, VarId self) {
    kern::avgpool2_backward(t.grad(self).data(), c, h, w, t.grad(x).data());
  });
}

VarId upsample2(Tape& tp, VarId x) {
  const Tensor& xv = tp.val(x);
  if (xv.ndim() != 3) throw ShapeError("upsample2: [C][H][W] expected");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  Tensor out({c, h * 2, w * 2});
  kern::upsample2_forward(xv.data(), c, h, w, out.data());
  bool rg = tp.requires_grad(x);
  return tp.emit(std::move(out), rg, [x, c, h, w](Tape& t, VarId self) {
    kern::upsample2_backward(t.grad(self).data(), c, h, w, t.grad(x).data());
  });
}

// ---------- spectral plumbing ----------

namespace {
void check_rows(const Tensor& x, const Tensor& r, const char* where) {
  if (x.ndim() != 2 || r.ndim() != 1 || r.dim(0) != x.dim(0))
    throw ShapeError(std::string(where) + ": [T][F] and [T] expected");
}
}  // namespace

VarId scale_rows(Tape& tp, VarId x, VarId r) {
  const Tensor& xv = tp.val(x);
  const Tensor& rv = tp.val(r);
  check_rows(xv, rv, "scale_rows");
  const int t = xv.dim(0), f = xv.dim(1);
  Tensor out(xv.shape);
  for (int i = 0; i < t; ++i) {
    const double rr = rv[static_cast<size_t>(i)];
    const double* src = xv.data() + static_cast<int64_t>(i) * f;
    double* dst = out.data() + static_cast<int64_t>(i) * f;
    for (int j = 0; j < f; ++j) dst[j] = src[j] * rr;
  }
  bool rg = tp.requires_grad(x) || tp.requires_grad(r);
  return tp.emit(std::move(out), rg, [x, r, t, f](Tape& tpe, VarId self) {
    const Tensor& g = tpe.grad(self);
    const Tensor& xv2 = tpe.val(x);
    const Tensor& rv2 = tpe.val(r);
    if (tpe.requires_grad(x)) {
      Tensor& gx = tpe.grad(x);
      for (int i = 0; i < t; ++i) {
        const double rr = rv2[static_cast<size_t>(i)];
        const double* gp = g.data() + static_cast<int64_t>(i) * f;
        double* dp = gx.data() + static_cast<int64_t>(i) * f;
        for (int j = 0; j < f; ++j) dp[j] += gp[j] * rr;
      }
    }
    if (tpe.requires_grad(r)) {
      Tensor& gr = tpe.grad(r);
      for (int i = 0; i < t; ++i) {
        const double* gp = g.data() + static_cast<int64_t>(i) * f;
        const double* xp = xv2.data() + static_cast<int64_t>(i) * f;
        double acc = 0.0;
        for (int j = 0; j < f; ++j) acc += gp[j] * xp[j];
        gr[static_cast<size_t>(i)] += acc;
      }
    }
  });
}

VarId div_rows(Tape& tp, VarId x, VarId r, double eps) {
  const Tensor& xv = tp.val(x);
  const Tensor& rv = tp.val(r);
  check_rows(xv, rv, "div_rows");
  const int t = xv.dim(0), f = xv.dim(1);
  Tensor out(xv.shape);
  for (int i = 0; i < t; ++i) {
    const double d = 1.0 / (rv[static_cast<size_t>(i)] + eps);
    const double* src = xv.data() + static_cast<int64_t>(i) * f;
    double* dst = out.data() + static_cast<int64_t>(i) * f;
    for (int j = 0; j < f; ++j) dst[j] = src[j] * d;
  }
  bool rg = tp.requires_grad(x) || tp.requires_grad(r);
  return tp.emit(std::move(out), rg, [x, r, t, f, eps](Tape& tpe, VarId self) {
    const Tensor& g = tpe.grad(self);
    const Tensor& xv2 = tpe.val(x);
    const Tensor& rv2 = tpe.val(r);
    for (int i = 0; i < t; ++i) {
      const double den = rv2[static_cast<size_t>(i)] + eps;
      const double* gp = g.data() + static_cast<int64_t>(i) * f;
      if (tpe.requires_grad(x)) {
        double* dp = tpe.grad(x).data() + static_cast<int64_t>(i) * f;
        for (int j = 0; j < f; ++j) dp[j] += gp[j] / den;
      }
      if (tpe.requires_grad(r)) {
        const double* xp = xv2.data() + static_cast<int64_t>(i) * f;
        double acc = 0.0;
        for (int j = 0; j < f; ++j) acc += gp[j] * xp[j];
        tpe.grad(r)[static_cast<size_t>(i)] -= acc / (den * den);
      }
    }
  });
}

VarId contract_channels(Tape& tp, VarId g, VarId x, VarId addend) {
  const Tensor& gv = tp.val(g);
  const Tensor& xv = tp.val(x);
  if (gv.ndim() != 2 || xv.ndim() != 3 || gv.dim(0) != xv.dim(0) ||
      gv.dim(1) != xv.dim(1))
    throw ShapeError("contract_channels: [C][T] with [C][T][F] expected");
  const int c = xv.dim(0), t = xv.dim(1), f = xv.dim(2);
  const double* ap = nullptr;
  if (addend != kNoVar) {
    const Tensor& av = tp.val(addend);
    if (av.ndim() != 2 || av.dim(0) != t || av.dim(1) != f)
      throw ShapeError("contract_channels: addend [T][F] expected");
    ap = av.data();
  }
  Tensor out({t, f});
  kern::contract_channels_forward(gv.data(), xv.data(), ap, c, t, f,
                                  out.data());
  bool rg = tp.requires_grad(g) || tp.requires_grad(x) ||
            (addend != kNoVar && tp.requires_grad(addend));
  return tp.emit(std::move(out), rg, [g, x, addend, c, t, f](Tape& tpe, VarId self) {
    const Tensor& gr = tpe.grad(self);
    const Tensor& gv2 = tpe.val(g);
    const Tensor& xv2 = tpe.val(x);
    if (tpe.requires_grad(g)) {
      Tensor& gg = tpe.grad(g);
      for (int cc = 0; cc < c; ++cc)
        for (int tt = 0; tt < t; ++tt) {
          const double* xp = xv2.data() + (static_cast<int64_t>(cc) * t + tt) * f;
          const double* gp = gr.data() + static_cast<int64_t>(tt) * f;
          double acc = 0.0;
          for (int j = 0; j < f; ++j) acc += xp[j] * gp[j];
          gg[static_cast<size_t>(cc) * t + tt] += acc;
        }
    }
    if (tpe.requires_grad(x)) {
      Tensor& gx = tpe.grad(x);
      const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static) collapse(2)
      for (int cc = 0; cc < c; ++cc)
        for (int tt = 0; tt < t; ++tt) {
          const double gvv = gv2[static_cast<size_t>(cc) * t + tt];
          if (gvv == 0.0) continue;
          double* dp = gx.data() + (static_cast<int64_t>(cc) * t + tt) * f;
          const double* gp = gr.data() + static_cast<int64_t>(tt) * f;
          for (int j = 0; j < f; ++j) dp[j] += gvv * gp[j];
        }
    }
    if (addend != kNoVar && tpe.requires_grad(addend))
      axpy(tpe.grad(addend), gr, 1.0);
  });
}

VarId fold_rows(Tape& tp, VarId x, std::vector<double> w, VarId addend) {
  const Tensor& xv = tp.val(x);
  if (xv.ndim() != 3 || static_cast<int>(w.size()) != xv.dim(0))
    throw ShapeError("fold_rows: [C][T][F] with |w| == C expected");
  const int c = xv.dim(0), t = xv.dim(1), f = xv.dim(2);
  Tensor out({t, f});
  if (addend != kNoVar) {
    const Tensor& av = tp.val(addend);
    check_same_shape(av, out, "fold_rows addend");
    out.v = av.v;
  }
  for (int cc = 0; cc < c; ++cc) {
    if (w[static_cast<size_t>(cc)] == 0.0) continue;
    const double* src = xv.data() + static_cast<int64_t>(cc) * t * f;
    const double wv = w[static_cast<size_t>(cc)];
    for (int64_t i = 0; i < static_cast<int64_t>(t) * f; ++i) out[i] += wv * src[i];
  }
  bool rg = tp.requires_grad(x) || (addend != kNoVar && tp.requires_grad(addend));
  auto wp = std::make_shared<std::vector<double>>(std::move(w));
  return tp.emit(std::move(out), rg, [x, addend, wp, c, t, f](Tape& tpe, VarId self) {
    const Tensor& g = tpe.grad(self);
    if (tpe.requires_grad(x)) {
      Tensor& gx = tpe.grad(x);
      for (int cc = 0; cc < c; ++cc) {
        const double wv = (*wp)[static_cast<size_t>(cc)];
        if (wv == 0.0) continue;
        double* dst = gx.data() + static_cast<int64_t>(cc) * t * f;
        for (int64_t i = 0; i < static_cast<int64_t>(t) * f; ++i) dst[i] += wv * g[i];
      }
    }
    if (addend != kNoVar && tpe.requires_grad(addend))
      axpy(tpe.grad(addend), g, 1.0);
  });
}

VarId channel_energies(Tape& tp, VarId re, VarId im) {
  const Tensor& rv = tp.val(re);
  const Tensor& iv = tp.val(im);
  check_same_shape(rv, iv, "channel_energies");
  if (rv.ndim() != 3) throw ShapeError("channel_energies: [C][T][F] expected");
  const int c = rv.dim(0), t = rv.dim(1), f = rv.dim(2);
  Tensor out({c, t});
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static) collapse(2)
  for (int cc = 0; cc < c; ++cc)
    for (int tt = 0; tt < t; ++tt) {
      const double* rp = rv.data() + (static_cast<int64_t>(cc) * t + tt) * f;
      const double* ip = iv.data() + (static_cast<int64_t>(cc) * t + tt) * f;
      double acc = 0.0;
      for (int j = 0; j < f; ++j) acc += rp[j] * rp[j] + ip[j] * ip[j];
      out[static_cast<size_t>(cc) * t + tt] = acc;
    }
  bool rg = tp.requires_grad(re) || tp.requires_grad(im);
  return tp.emit(std::move(out), rg, [re, im, c, t, f](Tape& tpe, VarId self) {
    const Tensor& g = tpe.grad(self);
    const Tensor& rv2 = tpe.val(re);
    const Tensor& iv2 = tpe.val(im);
    const int nt2 = threads::get();
    const bool need_re = tpe.requires_grad(re);
    const bool need_im = tpe.requires_grad(im);
    Tensor* gre = need_re ? &tpe.grad(re) : nullptr;
    Tensor* gim = need_im ? &tpe.grad(im) : nullptr;
#pragma omp parallel for num_threads(nt2) if (nt2 > 1) schedule(static) collapse(2)
    for (int cc = 0; cc < c; ++cc)
      for (int tt = 0; tt < t; ++tt) {
        const double gv = 2.0 * g[static_cast<size_t>(cc) * t + tt];
        if (gv == 0.0) continue;
        const int64_t off = (static_cast<int64_t>(cc) * t + tt) * f;
        if (need_re) {
          const double* rp = rv2.data() + off;
          double* dp = gre->data() + off;
          for (int j = 0; j < f; ++j) dp[j] += gv * rp[j];
        }
        if (need_im) {
          const double* ip = iv2.data() + off;
          double* dp = gim->data() + off;
          for (int j = 0; j < f; ++j) dp[j] += gv * ip[j];
        }
      }
  });
}

VarId l1_mag_sum(Tape& tp, VarId re, VarId im, Tensor ref_mag) {
  const Tensor& rv = tp.val(re);
  const Tensor& iv = tp.val(im);
  check_same_shape(rv, iv, "l1_mag_sum");
  check_same_shape(rv, ref_mag, "l1_mag_sum ref");
  auto ref = std::make_shared<Tensor>(std::move(ref_mag));
  const int64_t n = rv.numel();
  Tensor out({1});
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double m = std::sqrt(rv[i] * rv[i] + iv[i] * iv[i]);
    acc += std::fabs(m - (*ref)[i]);
  }
  out[0] = acc;
  bool rg = tp.requires_grad(re) || tp.requires_grad(im);
  return tp.emit(std::move(out), rg, [re, im, ref, n](Tape& tpe, VarId self) {
    const double g = tpe.grad(self)[0];
    const Tensor& rv2 = tpe.val(re);
    const Tensor& iv2 = tpe.val(im);
    Tensor& gre = tpe.grad(re);
    Tensor& gim = tpe.grad(im);
    constexpr double kTiny = 1e-300;
    for (int64_t i = 0; i < n; ++i) {
      const double m = std::sqrt(rv2[i] * rv2[i] + iv2[i] * iv2[i]);
      if (m < kTiny) continue;
      const double d = m - (*ref)[i];
      const double s = g * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / m;
      gre[i] += s * rv2[i];
      gim[i] += s * iv2[i];
    }
  });
}

VarId mean_mag(Tape& tp, VarId re, VarId im) {
  const Tensor& rv = tp.val(re);
  const Tensor& iv = tp.val(im);
  check_same_shape(rv, iv, "mean_mag");
  const int64_t n = rv.numel();
  Tensor out({1});
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i)
    acc += std::sqrt(rv[i] * rv[i] + iv[i] * iv[i]);
  out[0] = acc / static_cast<double>(n);
  bool rg = tp.requires_grad(re) || tp.requires_grad(im);
  return tp.emit(std::move(out), rg, [re, im, n](Tape& tpe, VarId self) {
    const double g = tpe.grad(self)[0] / static_cast<double>(n);
    const Tensor& rv2 = tpe.val(re);
    const Tensor& iv2 = tpe.val(im);
    Tensor& gre = tpe.grad(re);
    Tensor& gim = tpe.grad(im);
    constexpr double kTiny = 1e-300;
    for (int64_t i = 0; i < n; ++i) {
      const double m = std::sqrt(rv2[i] * rv2[i] + iv2[i] * iv2[i]);
      if (m < kTiny) continue;
      gre[i] += g * rv2[i] / m;
      gim[i] += g * iv2[i] / m;
    }
  });
}

VarId mel_broadcast(Tape& tp, VarId mel, const MelView& fb) {
  const Tensor& mv = tp.val(mel);
  if (mv.ndim() < 1 || mv.dim(mv.ndim() - 1) != fb.bands)
    throw ShapeError("mel_broadcast: trailing dim must equal band count");
  std::vector<int> oshape = mv.shape;
  oshape.back() = fb.freqs;
  const int64_t rows = mv.numel() / fb.bands;
  const int B = fb.bands, F = fb.freqs;
  Tensor out(oshape);
  const int nt = threads::get();
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const double* m = mv.data() + r * B;
    double* o = out.data() + r * F;
    for (int j = 0; j < F; ++j) o[j] = 0.0;
    for (int b = 0; b < B; ++b) {
      const double mval = m[b];
      if (mval == 0.0) continue;
      const double* w = fb.weights + static_cast<int64_t>(b) * F;
      for (int j = fb.lo[b]; j < fb.hi[b]; ++j) o[j] += mval * w[j];
    }
    for (int j = 0; j < F; ++j) o[j] /= fb.colsum[j];
  }
  bool rg = tp.requires_grad(mel);
  return tp.emit(std::move(out), rg, [mel, fb, rows, B, F](Tape& tpe, VarId self) {
    const Tensor& g = tpe.grad(self);
    Tensor& gm = tpe.grad(mel);
    const int nt2 = threads::get();
#pragma omp parallel for num_threads(nt2) if (nt2 > 1) schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
      const double* gp = g.data() + r * F;
      double* dm = gm.data() + r * B;
      for (int b = 0; b < B; ++b) {
        const double* w = fb.weights + static_cast<int64_t>(b) * F;
        double acc = 0.0;
        for (int j = fb.lo[b]; j < fb.hi[b]; ++j)
          acc += gp[j] * w[j] / fb.colsum[j];
        dm[b] += acc;
      }
    }
  });
}

}  // namespace objx::ad
