/*
 * Copyright 2026 SLTNet Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SLTNET_TENSOR_HPP
#define SLTNET_TENSOR_HPP

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "sltnet/common.hpp"

namespace sltnet {

inline int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int e : shape) {
    require_arg(e >= 0, "tensor extent must be non-negative");
    n *= e;
  }
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

// Dense row-major real tensor. Value semantics; not reference counted.
template <typename R>
struct Tensor {
  std::vector<int> shape;
  std::vector<R> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(static_cast<size_t>(numel_of(shape)), R(0)) {}
  Tensor(std::vector<int> s, R fill)
      : shape(std::move(s)), v(static_cast<size_t>(numel_of(shape)), fill) {}

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, R x) { return Tensor(std::move(s), x); }
  static Tensor scalar(R x) { return Tensor({1}, x); }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  R* data() { return v.data(); }
  const R* data() const { return v.data(); }

  R& operator[](int64_t i) { return v[static_cast<size_t>(i)]; }
  const R& operator[](int64_t i) const { return v[static_cast<size_t>(i)]; }

  // rank-4 NCHW accessors used by the naive kernels
  R& at4(int n, int c, int h, int w) {
    return v[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  const R& at4(int n, int c, int h, int w) const {
    return v[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  R& at3(int a, int b, int c) {
    return v[(static_cast<size_t>(a) * shape[1] + b) * shape[2] + c];
  }
  const R& at3(int a, int b, int c) const {
    return v[(static_cast<size_t>(a) * shape[1] + b) * shape[2] + c];
  }

  R& at2(int a, int b) { return v[static_cast<size_t>(a) * shape[1] + b]; }
  const R& at2(int a, int b) const { return v[static_cast<size_t>(a) * shape[1] + b]; }

  void fill(R x) { std::fill(v.begin(), v.end(), x); }

  template <typename R2>
  Tensor<R2> cast() const {
    Tensor<R2> out(shape);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<R2>(v[i]);
    return out;
  }
};

template <typename R>
void check_same_shape(const Tensor<R>& a, const Tensor<R>& b, const char* what) {
  if (!a.same_shape(b))
    throw ArgumentError(std::string(what) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                        shape_str(b.shape));
}

}  // namespace sltnet

#endif  // SLTNET_TENSOR_HPP
