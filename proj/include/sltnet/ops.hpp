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
#ifndef SLTNET_OPS_HPP
#define SLTNET_OPS_HPP

#include <cmath>
#include <memory>

#include "sltnet/conv_kernels.hpp"
#include "sltnet/tape.hpp"

namespace sltnet {

template <typename F>
void par_for(int64_t n, F f) {
  if (n < (1 << 14)) {
    for (int64_t i = 0; i < n; ++i) f(i);
    return;
  }
#pragma omp parallel for num_threads(worker_threads()) schedule(static)
  for (int64_t i = 0; i < n; ++i) f(i);
}

template <typename R>
void axpy(Tensor<R>& dst, const Tensor<R>& src, R alpha = R(1)) {
  check_same_shape(dst, src, "axpy");
  R* d = dst.data();
  const R* s = src.data();
  par_for(dst.numel(), [&](int64_t i) { d[i] += alpha * s[i]; });
}

// ---------------------------------------------------------------------------
// elementwise / shape suite
// ---------------------------------------------------------------------------

template <typename R>
Var add(Tape<R>& t, Var a, Var b) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  check_same_shape(av, bv, "add");
  auto y = std::make_shared<Tensor<R>>(av.shape);
  const R* ap = av.data();
  const R* bp = bv.data();
  R* yp = y->data();
  par_for(y->numel(), [&](int64_t i) { yp[i] = ap[i] + bp[i]; });
  return t.emit({y}, [a, b](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    axpy(tp.grad_acc(a), *go);
    axpy(tp.grad_acc(b), *go);
  });
}

template <typename R>
Var scale(Tape<R>& t, Var a, R c) {
  const auto& av = t.val(a);
  auto y = std::make_shared<Tensor<R>>(av.shape);
  const R* ap = av.data();
  R* yp = y->data();
  par_for(y->numel(), [&](int64_t i) { yp[i] = c * ap[i]; });
  return t.emit({y}, [a, c](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    axpy(tp.grad_acc(a), *go, c);
  });
}

template <typename R>
Var hadamard(Tape<R>& t, Var a, Var b) {
  auto av = t.val_ptr(a);
  auto bv = t.val_ptr(b);
  check_same_shape(*av, *bv, "hadamard");
  auto y = std::make_shared<Tensor<R>>(av->shape);
  const R* ap = av->data();
  const R* bp = bv->data();
  R* yp = y->data();
  par_for(y->numel(), [&](int64_t i) { yp[i] = ap[i] * bp[i]; });
  return t.emit({y}, [a, b, av, bv](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& ga = tp.grad_acc(a);
    Tensor<R>& gb = tp.grad_acc(b);
    const R* gp = go->data();
    const R* bp2 = bv->data();
    const R* ap2 = av->data();
    par_for(go->numel(), [&](int64_t i) {
      ga[i] += gp[i] * bp2[i];
      gb[i] += gp[i] * ap2[i];
    });
  });
}

template <typename R, typename FwdF, typename DerivF>
Var unary_ew(Tape<R>& t, Var a, FwdF f, DerivF dfdy) {
  auto av = t.val_ptr(a);
  auto y = std::make_shared<Tensor<R>>(av->shape);
  const R* ap = av->data();
  R* yp = y->data();
  par_for(y->numel(), [&](int64_t i) { yp[i] = f(ap[i]); });
  return t.emit({y}, [a, y, dfdy](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& ga = tp.grad_acc(a);
    const R* gp = go->data();
    const R* yp2 = y->data();
    par_for(go->numel(), [&](int64_t i) { ga[i] += gp[i] * dfdy(yp2[i]); });
  });
}

template <typename R>
Var sigmoid_op(Tape<R>& t, Var a) {
  return unary_ew(
      t, a, [](R x) { return R(1) / (R(1) + std::exp(-x)); }, [](R y) { return y * (R(1) - y); });
}

template <typename R>
Var tanh_op(Tape<R>& t, Var a) {
  return unary_ew(
      t, a, [](R x) { return std::tanh(x); }, [](R y) { return R(1) - y * y; });
}

// x: (N,C,H,W), b: (C)
template <typename R>
Var add_channel_bias(Tape<R>& t, Var x, Var b) {
  const auto& xv = t.val(x);
  const auto& bv = t.val(b);
  require_arg(xv.rank() == 4 && bv.numel() == xv.dim(1), "add_channel_bias: bias length != C");
  auto y = std::make_shared<Tensor<R>>(xv.shape);
  const int c = xv.dim(1);
  const int64_t hw = static_cast<int64_t>(xv.dim(2)) * xv.dim(3);
  const R* xp = xv.data();
  const R* bp = bv.data();
  R* yp = y->data();
  par_for(xv.numel(), [&](int64_t i) { yp[i] = xp[i] + bp[(i / hw) % c]; });
  return t.emit({y}, [x, b, c, hw](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    axpy(tp.grad_acc(x), *go);
    Tensor<R>& gb = tp.grad_acc(b);
    const R* gp = go->data();
    for (int64_t i = 0; i < go->numel(); ++i) gb[(i / hw) % c] += gp[i];
  });
}

// x: (N,C,H,W), gate: (N,C); per-channel scaling (channel attention)
template <typename R>
Var mul_channel_gate(Tape<R>& t, Var x, Var gate) {
  auto xv = t.val_ptr(x);
  auto gv = t.val_ptr(gate);
  require_arg(xv->rank() == 4 && gv->rank() == 2 && gv->dim(0) == xv->dim(0) &&
                  gv->dim(1) == xv->dim(1),
              "mul_channel_gate: gate must be (N,C)");
  auto y = std::make_shared<Tensor<R>>(xv->shape);
  const int64_t hw = static_cast<int64_t>(xv->dim(2)) * xv->dim(3);
  const R* xp = xv->data();
  const R* gp = gv->data();
  R* yp = y->data();
  par_for(xv->numel(), [&](int64_t i) { yp[i] = xp[i] * gp[i / hw]; });
  return t.emit({y}, [x, gate, xv, gv, hw](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gx = tp.grad_acc(x);
    Tensor<R>& gg = tp.grad_acc(gate);
    const R* gop = go->data();
    const R* xp2 = xv->data();
    const R* gp2 = gv->data();
    par_for(go->numel(), [&](int64_t i) { gx[i] += gop[i] * gp2[i / hw]; });
    for (int64_t i = 0; i < go->numel(); ++i) gg[i / hw] += gop[i] * xp2[i];
  });
}

// x: (N,C,H,W), m: (N,1,H,W); broadcast over channels (attention map on V)
template <typename R>
Var mul_spatial_map(Tape<R>& t, Var x, Var m) {
  auto xv = t.val_ptr(x);
  auto mv = t.val_ptr(m);
  require_arg(xv->rank() == 4 && mv->rank() == 4 && mv->dim(1) == 1 && mv->dim(0) == xv->dim(0) &&
                  mv->dim(2) == xv->dim(2) && mv->dim(3) == xv->dim(3),
              "mul_spatial_map: map must be (N,1,H,W)");
  auto y = std::make_shared<Tensor<R>>(xv->shape);
  const int c = xv->dim(1);
  const int64_t hw = static_cast<int64_t>(xv->dim(2)) * xv->dim(3);
  const R* xp = xv->data();
  const R* mp = mv->data();
  R* yp = y->data();
  par_for(xv->numel(), [&](int64_t i) {
    const int64_t ni = i / (hw * c);
    yp[i] = xp[i] * mp[ni * hw + i % hw];
  });
  return t.emit({y}, [x, m, xv, mv, c, hw](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gx = tp.grad_acc(x);
    Tensor<R>& gm = tp.grad_acc(m);
    const R* gop = go->data();
    const R* xp2 = xv->data();
    const R* mp2 = mv->data();
    par_for(go->numel(), [&](int64_t i) {
      const int64_t ni = i / (hw * c);
      gx[i] += gop[i] * mp2[ni * hw + i % hw];
    });
    for (int64_t i = 0; i < go->numel(); ++i) {
      const int64_t ni = i / (hw * c);
      gm[ni * hw + i % hw] += gop[i] * xp2[i];
    }
  });
}

// (N,C,H,W) -> (N,1,H,W)
template <typename R>
Var sum_over_channels(Tape<R>& t, Var x) {
  const auto& xv = t.val(x);
  require_arg(xv.rank() == 4, "sum_over_channels: expects rank-4");
  const int n = xv.dim(0), c = xv.dim(1);
  const int64_t hw = static_cast<int64_t>(xv.dim(2)) * xv.dim(3);
  auto y = std::make_shared<Tensor<R>>(std::vector<int>{n, 1, xv.dim(2), xv.dim(3)});
  const R* xp = xv.data();
  R* yp = y->data();
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const R* src = xp + (static_cast<int64_t>(ni) * c + ci) * hw;
      R* dst = yp + static_cast<int64_t>(ni) * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] += src[i];
    }
  return t.emit({y}, [x, n, c, hw](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gx = tp.grad_acc(x);
    const R* gp = go->data();
    par_for(static_cast<int64_t>(n) * c * hw, [&](int64_t i) {
      const int64_t ni = i / (hw * c);
      gx[i] += gp[ni * hw + i % hw];
    });
  });
}

template <typename R>
Var concat_channels(Tape<R>& t, const std::vector<Var>& xs) {
  require_arg(!xs.empty(), "concat: empty input list");
  const auto& first = t.val(xs[0]);
  require_arg(first.rank() == 4, "concat: expects rank-4");
  int ctot = 0;
  for (Var v : xs) {
    const auto& xv = t.val(v);
    require_arg(xv.dim(0) == first.dim(0) && xv.dim(2) == first.dim(2) &&
                    xv.dim(3) == first.dim(3),
                "concat: mismatched extents");
    ctot += xv.dim(1);
  }
  const int n = first.dim(0);
  const int64_t hw = static_cast<int64_t>(first.dim(2)) * first.dim(3);
  auto y = std::make_shared<Tensor<R>>(std::vector<int>{n, ctot, first.dim(2), first.dim(3)});
  std::vector<int> offs;
  int off = 0;
  for (Var v : xs) {
    offs.push_back(off);
    const auto& xv = t.val(v);
    const int ci = xv.dim(1);
    for (int ni = 0; ni < n; ++ni)
      std::copy(xv.data() + static_cast<int64_t>(ni) * ci * hw,
                xv.data() + static_cast<int64_t>(ni + 1) * ci * hw,
                y->data() + (static_cast<int64_t>(ni) * ctot + off) * hw);
    off += ci;
  }
  auto xs_copy = xs;
  return t.emit({y}, [xs_copy, offs, n, ctot, hw](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    for (size_t k = 0; k < xs_copy.size(); ++k) {
      Tensor<R>& gx = tp.grad_acc(xs_copy[k]);
      const int ci = gx.dim(1);
      for (int ni = 0; ni < n; ++ni) {
        const R* src = go->data() + (static_cast<int64_t>(ni) * ctot + offs[k]) * hw;
        R* dst = gx.data() + static_cast<int64_t>(ni) * ci * hw;
        for (int64_t i = 0; i < ci * hw; ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename R>
Var slice_channels(Tape<R>& t, Var x, int c0, int c1) {
  const auto& xv = t.val(x);
  require_arg(xv.rank() == 4 && 0 <= c0 && c0 < c1 && c1 <= xv.dim(1), "slice: bad channel range");
  const int n = xv.dim(0), c = xv.dim(1), cs = c1 - c0;
  const int64_t hw = static_cast<int64_t>(xv.dim(2)) * xv.dim(3);
  auto y = std::make_shared<Tensor<R>>(std::vector<int>{n, cs, xv.dim(2), xv.dim(3)});
  for (int ni = 0; ni < n; ++ni)
    std::copy(xv.data() + (static_cast<int64_t>(ni) * c + c0) * hw,
              xv.data() + (static_cast<int64_t>(ni) * c + c1) * hw,
              y->data() + static_cast<int64_t>(ni) * cs * hw);
  return t.emit({y}, [x, c0, n, c, cs, hw](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gx = tp.grad_acc(x);
    for (int ni = 0; ni < n; ++ni) {
      const R* src = go->data() + static_cast<int64_t>(ni) * cs * hw;
      R* dst = gx.data() + (static_cast<int64_t>(ni) * c + c0) * hw;
      for (int64_t i = 0; i < cs * hw; ++i) dst[i] += src[i];
    }
  });
}

// (N,C,H,W) -> (N,C)
template <typename R>
Var global_avg_pool(Tape<R>& t, Var x) {
  const auto& xv = t.val(x);
  require_arg(xv.rank() == 4, "global_avg_pool: expects rank-4");
  const int n = xv.dim(0), c = xv.dim(1);
  const int64_t hw = static_cast<int64_t>(xv.dim(2)) * xv.dim(3);
  require_arg(hw > 0, "global_avg_pool: empty spatial extent");
  auto y = std::make_shared<Tensor<R>>(std::vector<int>{n, c});
  const R* xp = xv.data();
  for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
    R acc = 0;
    const R* src = xp + nc * hw;
    for (int64_t i = 0; i < hw; ++i) acc += src[i];
    (*y)[nc] = acc / static_cast<R>(hw);
  }
  return t.emit({y}, [x, hw](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gx = tp.grad_acc(x);
    const R* gp = go->data();
    const R inv = R(1) / static_cast<R>(hw);
    par_for(gx.numel(), [&](int64_t i) { gx[i] += gp[i / hw] * inv; });
  });
}

// 2x2 max pool, stride 2; argmax routing in backward, first-wins on ties.
template <typename R>
Var max_pool2x2(Tape<R>& t, Var x) {
  const auto& xv = t.val(x);
  require_arg(xv.rank() == 4, "max_pool2x2: expects rank-4");
  const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  require_arg(h % 2 == 0 && w % 2 == 0, "max_pool2x2: extents must be even");
  const int oh = h / 2, ow = w / 2;
  auto y = std::make_shared<Tensor<R>>(std::vector<int>{n, c, oh, ow});
  auto arg = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(y->numel()));
  par_for(static_cast<int64_t>(n) * c, [&](int64_t nc) {
    const R* src = xv.data() + nc * h * w;
    R* dst = y->data() + nc * oh * ow;
    int32_t* am = arg->data() + nc * oh * ow;
    for (int yy = 0; yy < oh; ++yy)
      for (int xx = 0; xx < ow; ++xx) {
        int best = (2 * yy) * w + 2 * xx;
        R bv = src[best];
        const int cands[3] = {(2 * yy) * w + 2 * xx + 1, (2 * yy + 1) * w + 2 * xx,
                              (2 * yy + 1) * w + 2 * xx + 1};
        for (int cand : cands)
          if (src[cand] > bv) {
            bv = src[cand];
            best = cand;
          }
        dst[yy * ow + xx] = bv;
        am[yy * ow + xx] = best;
      }
  });
  const int64_t hw = static_cast<int64_t>(h) * w;
  const int64_t ohw = static_cast<int64_t>(oh) * ow;
  return t.emit({y}, [x, arg, hw, ohw](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gx = tp.grad_acc(x);
    const R* gp = go->data();
    const int32_t* am = arg->data();
    for (int64_t i = 0; i < go->numel(); ++i) gx[(i / ohw) * hw + am[i]] += gp[i];
  });
}

// x: (N,in), w: (out,in), b: (out) optional (pass invalid Var to skip)
template <typename R>
Var linear(Tape<R>& t, Var x, Var w, Var b) {
  auto xv = t.val_ptr(x);
  auto wv = t.val_ptr(w);
  require_arg(xv->rank() == 2 && wv->rank() == 2 && xv->dim(1) == wv->dim(1),
              "linear: x must be (N,in), w (out,in)");
  const int n = xv->dim(0), in = xv->dim(1), out = wv->dim(0);
  auto y = std::make_shared<Tensor<R>>(std::vector<int>{n, out});
  gemm(false, true, n, out, in, R(1), xv->data(), in, wv->data(), in, R(0), y->data(), out);
  if (b.valid()) {
    const auto& bv = t.val(b);
    require_arg(bv.numel() == out, "linear: bias length mismatch");
    for (int ni = 0; ni < n; ++ni)
      for (int o = 0; o < out; ++o) (*y)[static_cast<int64_t>(ni) * out + o] += bv[o];
  }
  return t.emit({y}, [x, w, b, xv, wv, n, in, out](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gx = tp.grad_acc(x);
    Tensor<R>& gw = tp.grad_acc(w);
    gemm(false, false, n, in, out, R(1), go->data(), out, wv->data(), in, R(1), gx.data(), in);
    gemm(true, false, out, in, n, R(1), go->data(), out, xv->data(), in, R(1), gw.data(), in);
    if (b.valid()) {
      Tensor<R>& gb = tp.grad_acc(b);
      for (int ni = 0; ni < n; ++ni)
        for (int o = 0; o < out; ++o) gb[o] += (*go)[static_cast<int64_t>(ni) * out + o];
    }
  });
}

// align_corners=false bilinear resize of (N,C,H,W)
template <typename R>
Var bilinear_upsample(Tape<R>& t, Var x, int oh, int ow) {
  auto xv = t.val_ptr(x);
  require_arg(xv->rank() == 4 && oh >= 1 && ow >= 1, "bilinear_upsample: bad target extents");
  const int n = xv->dim(0), c = xv->dim(1), h = xv->dim(2), w = xv->dim(3);
  auto y = std::make_shared<Tensor<R>>(std::vector<int>{n, c, oh, ow});

  struct Lerp {
    int i0, i1;
    R w1;
  };
  auto make_axis = [](int in, int out) {
    std::vector<Lerp> v(static_cast<size_t>(out));
    const double s = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
      double src = (i + 0.5) * s - 0.5;
      if (src < 0) src = 0;
      const int i0 = std::min(static_cast<int>(src), in - 1);
      const int i1 = std::min(i0 + 1, in - 1);
      v[static_cast<size_t>(i)] = {i0, i1, static_cast<R>(src - i0)};
    }
    return v;
  };
  auto ay = std::make_shared<std::vector<Lerp>>(make_axis(h, oh));
  auto ax = std::make_shared<std::vector<Lerp>>(make_axis(w, ow));

  par_for(static_cast<int64_t>(n) * c, [&](int64_t nc) {
    const R* src = xv->data() + nc * h * w;
    R* dst = y->data() + nc * oh * ow;
    for (int yy = 0; yy < oh; ++yy) {
      const Lerp& ly = (*ay)[static_cast<size_t>(yy)];
      for (int xx = 0; xx < ow; ++xx) {
        const Lerp& lx = (*ax)[static_cast<size_t>(xx)];
        const R v00 = src[ly.i0 * w + lx.i0], v01 = src[ly.i0 * w + lx.i1];
        const R v10 = src[ly.i1 * w + lx.i0], v11 = src[ly.i1 * w + lx.i1];
        dst[yy * ow + xx] = (R(1) - ly.w1) * ((R(1) - lx.w1) * v00 + lx.w1 * v01) +
                            ly.w1 * ((R(1) - lx.w1) * v10 + lx.w1 * v11);
      }
    }
  });
  return t.emit({y}, [x, ay, ax, n, c, h, w, oh, ow](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gx = tp.grad_acc(x);
    for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
      const R* gp = go->data() + nc * oh * ow;
      R* dst = gx.data() + nc * h * w;
      for (int yy = 0; yy < oh; ++yy) {
        const Lerp& ly = (*ay)[static_cast<size_t>(yy)];
        for (int xx = 0; xx < ow; ++xx) {
          const Lerp& lx = (*ax)[static_cast<size_t>(xx)];
          const R g = gp[yy * ow + xx];
          dst[ly.i0 * w + lx.i0] += (R(1) - ly.w1) * (R(1) - lx.w1) * g;
          dst[ly.i0 * w + lx.i1] += (R(1) - ly.w1) * lx.w1 * g;
          dst[ly.i1 * w + lx.i0] += ly.w1 * (R(1) - lx.w1) * g;
          dst[ly.i1 * w + lx.i1] += ly.w1 * lx.w1 * g;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

template <typename R>
struct BnArgs {
  R momentum = R(0.1);
  R eps = R(1e-5);
  bool training = true;
  bool update_running = true;
};

// Normalizes over (N,H,W) per channel in training mode; running stats in eval.
// Running buffers live outside the tape (network-owned, serialized).
template <typename R>
Var batchnorm2d(Tape<R>& t, Var x, Var gamma, Var beta, Tensor<R>& run_mean, Tensor<R>& run_var,
                const BnArgs<R>& a) {
  auto xv = t.val_ptr(x);
  require_arg(xv->rank() == 4, "batchnorm2d: expects rank-4");
  const int n = xv->dim(0), c = xv->dim(1), h = xv->dim(2), w = xv->dim(3);
  require_arg(t.val(gamma).numel() == c && t.val(beta).numel() == c,
              "batchnorm2d: per-channel parameter length mismatch");
  require_arg(static_cast<int>(run_mean.numel()) == c && static_cast<int>(run_var.numel()) == c,
              "batchnorm2d: running stat length mismatch");
  const int64_t m = static_cast<int64_t>(n) * h * w;
  require_arg(m > 0, "batchnorm2d: zero batch");
  const int64_t hw = static_cast<int64_t>(h) * w;

  auto mean = std::make_shared<Tensor<R>>(std::vector<int>{c});
  auto inv_std = std::make_shared<Tensor<R>>(std::vector<int>{c});

  if (a.training) {
    for (int ci = 0; ci < c; ++ci) {
      R acc = 0;
      for (int ni = 0; ni < n; ++ni) {
        const R* src = xv->data() + (static_cast<int64_t>(ni) * c + ci) * hw;
        for (int64_t i = 0; i < hw; ++i) acc += src[i];
      }
      const R mu = acc / static_cast<R>(m);
      R var = 0;
      for (int ni = 0; ni < n; ++ni) {
        const R* src = xv->data() + (static_cast<int64_t>(ni) * c + ci) * hw;
        for (int64_t i = 0; i < hw; ++i) {
          const R d = src[i] - mu;
          var += d * d;
        }
      }
      var /= static_cast<R>(m);
      (*mean)[ci] = mu;
      (*inv_std)[ci] = R(1) / std::sqrt(var + a.eps);
      if (a.update_running) {
        const R unbiased = m > 1 ? var * static_cast<R>(m) / static_cast<R>(m - 1) : var;
        run_mean[ci] = (R(1) - a.momentum) * run_mean[ci] + a.momentum * mu;
        run_var[ci] = (R(1) - a.momentum) * run_var[ci] + a.momentum * unbiased;
      }
    }
  } else {
    for (int ci = 0; ci < c; ++ci) {
      (*mean)[ci] = run_mean[ci];
      (*inv_std)[ci] = R(1) / std::sqrt(run_var[ci] + a.eps);
    }
  }

  auto y = std::make_shared<Tensor<R>>(xv->shape);
  const auto& gv = t.val(gamma);
  const auto& bv = t.val(beta);
  par_for(xv->numel(), [&](int64_t i) {
    const int ci = static_cast<int>((i / hw) % c);
    (*y)[i] = ((*xv)[i] - (*mean)[ci]) * (*inv_std)[ci] * gv[ci] + bv[ci];
  });

  const bool training = a.training;
  return t.emit({y}, [x, gamma, beta, xv, mean, inv_std, n, c, hw, m, training](Tape<R>& tp,
                                                                                int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gx = tp.grad_acc(x);
    Tensor<R>& gg = tp.grad_acc(gamma);
    Tensor<R>& gb = tp.grad_acc(beta);
    const Tensor<R>& gmv = tp.val(gamma);
#pragma omp parallel for num_threads(worker_threads()) schedule(static)
    for (int ci = 0; ci < c; ++ci) {
      R sum_gy = 0, sum_gy_xhat = 0;
      for (int ni = 0; ni < n; ++ni) {
        const int64_t base = (static_cast<int64_t>(ni) * c + ci) * hw;
        for (int64_t i = 0; i < hw; ++i) {
          const R xhat = ((*xv)[base + i] - (*mean)[ci]) * (*inv_std)[ci];
          sum_gy += (*go)[base + i];
          sum_gy_xhat += (*go)[base + i] * xhat;
        }
      }
      gb[ci] += sum_gy;
      gg[ci] += sum_gy_xhat;
      const R gis = gmv[ci] * (*inv_std)[ci];
      if (training) {
        const R mg = sum_gy / static_cast<R>(m);
        const R mgx = sum_gy_xhat / static_cast<R>(m);
        for (int ni = 0; ni < n; ++ni) {
          const int64_t base = (static_cast<int64_t>(ni) * c + ci) * hw;
          for (int64_t i = 0; i < hw; ++i) {
            const R xhat = ((*xv)[base + i] - (*mean)[ci]) * (*inv_std)[ci];
            gx[base + i] += gis * ((*go)[base + i] - mg - xhat * mgx);
          }
        }
      } else {
        for (int ni = 0; ni < n; ++ni) {
          const int64_t base = (static_cast<int64_t>(ni) * c + ci) * hw;
          for (int64_t i = 0; i < hw; ++i) gx[base + i] += gis * (*go)[base + i];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// convolutions
// ---------------------------------------------------------------------------

template <typename R>
Var conv2d(Tape<R>& t, Var x, Var w, const Conv2dGeom& g, ConvImpl impl = ConvImpl::gemm) {
  auto xv = t.val_ptr(x);
  auto wv = t.val_ptr(w);
  auto y = std::make_shared<Tensor<R>>(conv2d_fwd(*xv, *wv, g, impl));
  const int h = xv->dim(2), wd = xv->dim(3);
  return t.emit({y}, [x, w, xv, wv, g, h, wd](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    axpy(tp.grad_acc(x), conv2d_bwd_x(*go, *wv, g, h, wd));
    axpy(tp.grad_acc(w), conv2d_bwd_w(*xv, *go, g, wv->shape));
  });
}

template <typename R>
Var conv_transpose2d(Tape<R>& t, Var x, Var w, int stride, int pad, ConvImpl impl = ConvImpl::gemm) {
  auto xv = t.val_ptr(x);
  auto wv = t.val_ptr(w);
  auto y = std::make_shared<Tensor<R>>(convt2d_fwd(*xv, *wv, stride, pad, impl));
  const int h = xv->dim(2), wd = xv->dim(3);
  return t.emit({y}, [x, w, xv, wv, stride, pad, h, wd](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    axpy(tp.grad_acc(x), convt2d_bwd_x(*go, *wv, stride, pad, h, wd));
    axpy(tp.grad_acc(w), convt2d_bwd_w(*xv, *go, stride, pad, wv->shape));
  });
}

// ---------------------------------------------------------------------------
// reductions used by losses
// ---------------------------------------------------------------------------

template <typename R>
Var sum_all(Tape<R>& t, Var x) {
  const auto& xv = t.val(x);
  R acc = 0;
  for (int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
  auto y = std::make_shared<Tensor<R>>(Tensor<R>::scalar(acc));
  return t.emit({y}, [x](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gx = tp.grad_acc(x);
    const R g = (*go)[0];
    par_for(gx.numel(), [&](int64_t i) { gx[i] += g; });
  });
}

}  // namespace sltnet

#endif  // SLTNET_OPS_HPP
