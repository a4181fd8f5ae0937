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

#ifndef OBJX_AUTODIFF_HPP
#define OBJX_AUTODIFF_HPP

#include <functional>
#include <vector>

#include "objx/tensor.hpp"

// Reverse-mode tape. Creation order is a topological order, so backward()
// just walks the node list in reverse; every op supplies an analytic
// adjoint. Branchy ops (min, hoods in the de-panner) back-propagate through
// the branch chosen in the forward pass.

namespace objx::ad {

using VarId = int;
constexpr VarId kNoVar = -1;

class Tape {
 public:
  VarId constant(Tensor t) { return emit(std::move(t), false, nullptr); }
  VarId leaf(Tensor t) { return emit(std::move(t), true, nullptr); }

  const Tensor& val(VarId id) const { return nodes_[static_cast<size_t>(id)].val; }
  bool requires_grad(VarId id) const {
    return nodes_[static_cast<size_t>(id)].rg;
  }

  // Gradient buffer; valid after backward(). Allocates zeros on first use.
  Tensor& grad(VarId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.v.empty() && !n.val.v.empty())
      n.grad = Tensor(n.val.shape);
    return n.grad;
  }

  void backward(VarId root);
  void clear() { nodes_.clear(); }
  size_t num_nodes() const { return nodes_.size(); }

  VarId emit(Tensor val, bool rg,
             std::function<void(Tape&, VarId)> bwd) {
    nodes_.push_back(Node{std::move(val), Tensor{}, rg, std::move(bwd)});
    return static_cast<VarId>(nodes_.size() - 1);
  }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    bool rg = false;
    std::function<void(Tape&, VarId)> bwd;
  };
  std::vector<Node> nodes_;
};

// ---- elementwise ----
VarId add(Tape&, VarId a, VarId b);
VarId sub(Tape&, VarId a, VarId b);
VarId mul(Tape&, VarId a, VarId b);
VarId div(Tape&, VarId a, VarId b);          // caller guards denominators
VarId neg(Tape&, VarId x);
VarId scale(Tape&, VarId x, double c);
VarId add_const(Tape&, VarId x, double c);
VarId mul_const(Tape&, VarId x, Tensor c);   // elementwise constant factor
VarId exp_op(Tape&, VarId x);
VarId log1p_op(Tape&, VarId x);
VarId sqrt_eps(Tape&, VarId x, double eps);  // sqrt(x + eps)
VarId square(Tape&, VarId x);
VarId abs_op(Tape&, VarId x);                // subgradient 0 at 0
VarId relu(Tape&, VarId x);
VarId leaky_relu(Tape&, VarId x, double slope);
VarId sigmoid_op(Tape&, VarId x);

// ---- scalar ([1]) broadcast ----
VarId add_scalar(Tape&, VarId x, VarId s);
VarId sub_scalar(Tape&, VarId x, VarId s);
VarId mul_scalar(Tape&, VarId x, VarId s);

// ---- reductions ----
VarId sum_all(Tape&, VarId x);               // -> [1]
VarId mean_all(Tape&, VarId x);              // -> [1]
VarId sum_dim0(Tape&, VarId x);              // [K][...] -> [...]
VarId sum_last(Tape&, VarId x);              // [...][F] -> [...]
VarId min_rows(Tape&, VarId x);              // [K][T] -> [T], argmin branch

// ---- shape ----
VarId concat0(Tape&, const std::vector<VarId>& xs);
VarId slice0(Tape&, VarId x, int from, int count);
VarId row0(Tape&, VarId x, int i);           // [K][...] -> [...]
VarId stack0(Tape&, const std::vector<VarId>& xs);
VarId slice_1d(Tape&, VarId x, int from, int len);
VarId reshape(Tape&, VarId x, std::vector<int> shape);

// ---- network blocks ----
VarId conv2d(Tape&, VarId in, VarId w, VarId b, int k);
VarId avgpool2(Tape&, VarId x);
VarId upsample2(Tape&, VarId x);

// ---- spectral plumbing ----
// x: [T][F] scaled per row by r: [T].
VarId scale_rows(Tape&, VarId x, VarId r);
VarId div_rows(Tape&, VarId x, VarId r, double eps);
// out[t][f] = sum_c g[c][t] x[c][t][f] (+ addend).
VarId contract_channels(Tape&, VarId g, VarId x, VarId addend = kNoVar);
// out[t][f] = sum_c w[c] x[c][t][f] (+ addend), constant weights.
VarId fold_rows(Tape&, VarId x, std::vector<double> w, VarId addend = kNoVar);
// e[c][t] = sum_f re^2 + im^2.
VarId channel_energies(Tape&, VarId re, VarId im);
// sum over all elements of | sqrt(re^2+im^2) - ref |.
VarId l1_mag_sum(Tape&, VarId re, VarId im, Tensor ref_mag);
// mean over all elements of sqrt(re^2+im^2).
VarId mean_mag(Tape&, VarId re, VarId im);

// Sparse filterbank views so spectral ops stay decoupled from dsp types.
struct MelView {
  int bands = 0;
  int freqs = 0;
  const double* weights = nullptr;  // [bands][freqs]
  const int* lo = nullptr;          // per band first nonzero freq
  const int* hi = nullptr;          // per band one-past-last nonzero freq
  const double* colsum = nullptr;   // per freq total weight
};
// mel mask [...][bands] -> normalized linear mask [...][freqs].
VarId mel_broadcast(Tape&, VarId mel, const MelView& fb);

}  // namespace objx::ad

#endif  // OBJX_AUTODIFF_HPP
