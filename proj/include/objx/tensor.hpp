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

#ifndef OBJX_TENSOR_HPP
#define OBJX_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "objx/errors.hpp"

namespace objx {

// Dense row-major tensor of 64-bit reals. Reference-mode storage for every
// spectral and network quantity.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  }
  Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    v.assign(static_cast<size_t>(numel_of(shape)), fill);
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d < 0) throw ShapeError("negative tensor dimension");
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  double& operator[](size_t i) { return v[i]; }
  double operator[](size_t i) const { return v[i]; }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  bool finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape;
}

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* where) {
  if (!same_shape(a, b))
    throw ShapeError(std::string(where) + ": shape mismatch " +
                     shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace objx

#endif  // OBJX_TENSOR_HPP
