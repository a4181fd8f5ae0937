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

#ifndef OBJX_KERNELS_HPP
#define OBJX_KERNELS_HPP

#include <cstdint>

// Hot inner loops, parallelized with OpenMP over independent output
// elements. Each element is a serial sum in fixed order, so results are
// bit-identical for every thread count. The *_serial variants are the
// plain reference implementations kept for testing and benchmarking.

namespace objx::kern {

// 2D convolution, stride 1, zero padding (k-1)/2, k in {1,3}.
// in: [ci][h][w], wgt: [co][ci][k][k], bias: [co], out: [co][h][w].
void conv2d_forward(const double* in, const double* wgt, const double* bias,
                    int ci, int h, int w, int co, int k, double* out);
void conv2d_forward_serial(const double* in, const double* wgt,
                           const double* bias, int ci, int h, int w, int co,
                           int k, double* out);

// din += correlation of dout with the kernel (transposed conv).
void conv2d_backward_input(const double* dout, const double* wgt, int ci,
                           int h, int w, int co, int k, double* din);
void conv2d_backward_input_serial(const double* dout, const double* wgt,
                                  int ci, int h, int w, int co, int k,
                                  double* din);

// dwgt += in (x) dout;  dbias += sum(dout).
void conv2d_backward_params(const double* dout, const double* in, int ci,
                            int h, int w, int co, int k, double* dwgt,
                            double* dbias);
void conv2d_backward_params_serial(const double* dout, const double* in,
                                   int ci, int h, int w, int co, int k,
                                   double* dwgt, double* dbias);

// 2x2 mean pooling, stride 2. h and w must be even.
void avgpool2_forward(const double* in, int c, int h, int w, double* out);
void avgpool2_backward(const double* dout, int c, int h, int w, double* din);

// 2x nearest-neighbor upsampling.
void upsample2_forward(const double* in, int c, int h, int w, double* out);
void upsample2_backward(const double* dout, int c, int h, int w, double* din);

// out[t*f + j] = sum_c g[c*t_n + t] * x[(c*t_n + t)*f + j] (+ addend).
void contract_channels_forward(const double* g, const double* x,
                               const double* addend, int c, int t, int f,
                               double* out);
void contract_channels_forward_serial(const double* g, const double* x,
                                      const double* addend, int c, int t,
                                      int f, double* out);

}  // namespace objx::kern

#endif  // OBJX_KERNELS_HPP
