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
#ifndef SLTNET_TESTS_ORACLES_HPP
#define SLTNET_TESTS_ORACLES_HPP

// Test-side reference implementations. These stay independent of the library
// code paths they check: plain loops, no im2col, no tape.

#include <cmath>
#include <functional>
#include <vector>

#include "sltnet/rng.hpp"
#include "sltnet/tape.hpp"
#include "sltnet/tensor.hpp"

namespace oracles {

using sltnet::Rng;
using sltnet::Tape;
using sltnet::Tensor;
using sltnet::Var;

template <typename R>
Tensor<R> random_tensor(std::vector<int> shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor<R> t(std::move(shape));
  for (auto& x : t.v) x = static_cast<R>(rng.uniform(lo, hi));
  return t;
}

template <typename R>
Tensor<R> random_binary(std::vector<int> shape, Rng& rng, double p_one = 0.5) {
  Tensor<R> t(std::move(shape));
  for (auto& x : t.v) x = rng.uniform() < p_one ? R(1) : R(0);
  return t;
}

// Straight six-loop cross-correlation, independent of the library kernels.
template <typename R>
Tensor<R> conv2d_ref(const Tensor<R>& x, const Tensor<R>& w, int stride, int pad_h, int pad_w,
                     int dil_h, int dil_w, int groups) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int icg = cin / groups, ocg = cout / groups;
  const int oh = (h + 2 * pad_h - dil_h * (kh - 1) - 1) / stride + 1;
  const int ow = (wd + 2 * pad_w - dil_w * (kw - 1) - 1) / stride + 1;
  Tensor<R> y({n, cout, oh, ow});
  for (int ni = 0; ni < n; ++ni)
    for (int oc = 0; oc < cout; ++oc) {
      const int gi = oc / ocg;
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) {
          R acc = 0;
          for (int ic = 0; ic < icg; ++ic)
            for (int i = 0; i < kh; ++i)
              for (int j = 0; j < kw; ++j) {
                const int sy = yy * stride - pad_h + i * dil_h;
                const int sx = xx * stride - pad_w + j * dil_w;
                if (sy < 0 || sy >= h || sx < 0 || sx >= wd) continue;
                acc += x.at4(ni, gi * icg + ic, sy, sx) * w.at4(oc, ic, i, j);
              }
          y.at4(ni, oc, yy, xx) = acc;
        }
    }
  return y;
}

inline bool close_rel(double a, double b, double rtol, double atol = 1e-9) {
  return std::abs(a - b) <= rtol * std::max(std::abs(a), std::abs(b)) + atol;
}

template <typename R>
double max_rel_diff(const Tensor<R>& a, const Tensor<R>& b, double atol = 1e-12) {
  double worst = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    const double den = std::max({std::abs(static_cast<double>(a[i])),
                                 std::abs(static_cast<double>(b[i])), atol});
    worst = std::max(worst, d / den);
  }
  return worst;
}

// Worst absolute difference relative to the tensors' own magnitude. The right
// metric when two float32 summation orders are compared: near-zero outputs
// carry cancellation error that elementwise relative comparison overstates.
template <typename R>
double scale_rel_diff(const Tensor<R>& a, const Tensor<R>& b) {
  double dmax = 0, scale = 1e-30;
  for (int64_t i = 0; i < a.numel(); ++i) {
    dmax = std::max(dmax, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    scale = std::max({scale, std::abs(static_cast<double>(a[i])),
                      std::abs(static_cast<double>(b[i]))});
  }
  return dmax / scale;
}

// Central-difference check of d(loss)/d(inputs[i]) for a loss rebuilt from the
// current contents of *inputs. Returns the worst relative mismatch.
struct GradCheckResult {
  double worst_rel = 0;
  int64_t checked = 0;
};

inline GradCheckResult check_gradients(
    std::vector<Tensor<double>*> inputs,
    const std::function<double(Tape<double>&, const std::vector<Var>&, bool)>& run,
    double h = 1e-4, double rtol = 1e-4, double atol = 1e-7) {
  // run(tape, vars, do_backward) must record the loss from vars and, when
  // do_backward, call tape.backward itself; returns the loss value.
  std::vector<Tensor<double>> grads(inputs.size());
  {
    Tape<double> t;
    std::vector<Var> vars;
    for (size_t i = 0; i < inputs.size(); ++i) {
      grads[i] = Tensor<double>(inputs[i]->shape);
      vars.push_back(t.param(std::make_shared<Tensor<double>>(*inputs[i]), &grads[i]));
    }
    run(t, vars, true);
  }
  auto eval = [&]() {
    Tape<double> t;
    std::vector<Var> vars;
    for (auto* in : inputs) vars.push_back(t.leaf(*in));
    return run(t, vars, false);
  };
  GradCheckResult res;
  for (size_t i = 0; i < inputs.size(); ++i) {
    Tensor<double>& x = *inputs[i];
    for (int64_t j = 0; j < x.numel(); ++j) {
      const double keep = x[j];
      x[j] = keep + h;
      const double lp = eval();
      x[j] = keep - h;
      const double lm = eval();
      x[j] = keep;
      const double fd = (lp - lm) / (2 * h);
      const double an = grads[i][j];
      const double rel =
          std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), atol / rtol});
      res.worst_rel = std::max(res.worst_rel, rel);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace oracles

#endif  // SLTNET_TESTS_ORACLES_HPP
