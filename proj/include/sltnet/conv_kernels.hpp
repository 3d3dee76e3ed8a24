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
#ifndef SLTNET_CONV_KERNELS_HPP
#define SLTNET_CONV_KERNELS_HPP

#include <omp.h>

#include <vector>

#include "sltnet/gemm.hpp"
#include "sltnet/tensor.hpp"

namespace sltnet {

struct Conv2dGeom {
  int stride = 1;
  int pad_h = 0, pad_w = 0;
  int dil_h = 1, dil_w = 1;
  int groups = 1;
};

enum class ConvImpl { gemm, naive };

inline int conv_out_extent(int in, int k, int stride, int pad, int dil) {
  const int eff = dil * (k - 1) + 1;
  return (in + 2 * pad - eff) / stride + 1;
}

namespace detail {

// Gathers a (C*kh*kw) x (OH*OW) patch matrix; out-of-bounds taps read zero.
template <typename R>
void im2col(const R* src, int ch, int h, int w, int kh, int kw, int stride, int pad_h, int pad_w,
            int dil_h, int dil_w, int oh, int ow, R* cols) {
  for (int c = 0; c < ch; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        R* row = cols + (static_cast<size_t>(c) * kh * kw + i * kw + j) * (static_cast<size_t>(oh) * ow);
        for (int y = 0; y < oh; ++y) {
          const int sy = y * stride - pad_h + i * dil_h;
          if (sy < 0 || sy >= h) {
            for (int x = 0; x < ow; ++x) row[static_cast<size_t>(y) * ow + x] = R(0);
            continue;
          }
          const R* src_row = src + (static_cast<size_t>(c) * h + sy) * w;
          for (int x = 0; x < ow; ++x) {
            const int sx = x * stride - pad_w + j * dil_w;
            row[static_cast<size_t>(y) * ow + x] = (sx >= 0 && sx < w) ? src_row[sx] : R(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the (C,h,w) image.
template <typename R>
void col2im(const R* cols, int ch, int h, int w, int kh, int kw, int stride, int pad_h, int pad_w,
            int dil_h, int dil_w, int oh, int ow, R* dst) {
  for (int c = 0; c < ch; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const R* row =
            cols + (static_cast<size_t>(c) * kh * kw + i * kw + j) * (static_cast<size_t>(oh) * ow);
        for (int y = 0; y < oh; ++y) {
          const int sy = y * stride - pad_h + i * dil_h;
          if (sy < 0 || sy >= h) continue;
          R* dst_row = dst + (static_cast<size_t>(c) * h + sy) * w;
          for (int x = 0; x < ow; ++x) {
            const int sx = x * stride - pad_w + j * dil_w;
            if (sx >= 0 && sx < w) dst_row[sx] += row[static_cast<size_t>(y) * ow + x];
          }
        }
      }
    }
  }
}

template <typename R>
std::vector<R>& col_scratch() {
  thread_local std::vector<R> buf;
  return buf;
}

}  // namespace detail

namespace detail {

// 1x1 stride-1 unpadded conv is a plain matrix product per sample.
inline bool is_pointwise(const Conv2dGeom& g, int kh, int kw) {
  return kh == 1 && kw == 1 && g.stride == 1 && g.pad_h == 0 && g.pad_w == 0 && g.groups == 1;
}

// one-filter-per-channel depthwise: direct stencil beats tiny per-group GEMMs
inline bool is_depthwise(const Conv2dGeom& g, int cin, int cout, int wcin) {
  return g.groups == cin && cout == cin && wcin == 1;
}

}  // namespace detail

// x: (N, Cin, H, W); w: (Cout, Cin/groups, kh, kw) -> (N, Cout, OH, OW)
template <typename R>
Tensor<R> conv2d_fwd(const Tensor<R>& x, const Tensor<R>& w, const Conv2dGeom& g,
                     ConvImpl impl = ConvImpl::gemm) {
  require_arg(x.rank() == 4 && w.rank() == 4, "conv2d: expects rank-4 input and weight");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), wcin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  require_arg(g.groups >= 1 && cin % g.groups == 0 && cout % g.groups == 0,
              "conv2d: channels not divisible by groups");
  require_arg(wcin == cin / g.groups, "conv2d: weight input-channel extent mismatch");
  const int oh = conv_out_extent(h, kh, g.stride, g.pad_h, g.dil_h);
  const int ow = conv_out_extent(wd, kw, g.stride, g.pad_w, g.dil_w);
  require_arg(oh > 0 && ow > 0, "conv2d: non-positive output extent");

  Tensor<R> y({n, cout, oh, ow});
  const int icg = cin / g.groups, ocg = cout / g.groups;

  if (impl == ConvImpl::naive) {
#pragma omp parallel for num_threads(worker_threads()) schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      for (int gi = 0; gi < g.groups; ++gi)
        for (int oc = 0; oc < ocg; ++oc)
          for (int yy = 0; yy < oh; ++yy)
            for (int xx = 0; xx < ow; ++xx) {
              R acc = 0;
              for (int ic = 0; ic < icg; ++ic)
                for (int i = 0; i < kh; ++i)
                  for (int j = 0; j < kw; ++j) {
                    const int sy = yy * g.stride - g.pad_h + i * g.dil_h;
                    const int sx = xx * g.stride - g.pad_w + j * g.dil_w;
                    if (sy < 0 || sy >= h || sx < 0 || sx >= wd) continue;
                    acc += x.at4(ni, gi * icg + ic, sy, sx) * w.at4(gi * ocg + oc, ic, i, j);
                  }
              y.at4(ni, gi * ocg + oc, yy, xx) = acc;
            }
    }
    return y;
  }

  if (detail::is_pointwise(g, kh, kw)) {
#pragma omp parallel for num_threads(worker_threads()) schedule(static)
    for (int ni = 0; ni < n; ++ni)
      gemm(false, false, cout, oh * ow, cin, R(1), w.data(), cin,
           x.data() + static_cast<size_t>(ni) * cin * h * wd, oh * ow, R(0),
           y.data() + static_cast<size_t>(ni) * cout * oh * ow, oh * ow);
    return y;
  }

  if (detail::is_depthwise(g, cin, cout, wcin)) {
#pragma omp parallel for num_threads(worker_threads()) schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      for (int c = 0; c < cin; ++c) {
        const R* src = x.data() + (static_cast<size_t>(ni) * cin + c) * h * wd;
        const R* ker = w.data() + static_cast<size_t>(c) * kh * kw;
        R* dst = y.data() + (static_cast<size_t>(ni) * cin + c) * oh * ow;
        for (int yy = 0; yy < oh; ++yy)
          for (int xx = 0; xx < ow; ++xx) {
            R acc = 0;
            for (int i = 0; i < kh; ++i) {
              const int sy = yy * g.stride - g.pad_h + i * g.dil_h;
              if (sy < 0 || sy >= h) continue;
              for (int j = 0; j < kw; ++j) {
                const int sx = xx * g.stride - g.pad_w + j * g.dil_w;
                if (sx < 0 || sx >= wd) continue;
                acc += src[static_cast<size_t>(sy) * wd + sx] * ker[i * kw + j];
              }
            }
            dst[static_cast<size_t>(yy) * ow + xx] = acc;
          }
      }
    }
    return y;
  }

  const size_t cols_sz = static_cast<size_t>(icg) * kh * kw * oh * ow;
#pragma omp parallel num_threads(worker_threads())
  {
    auto& cols = detail::col_scratch<R>();
    cols.resize(cols_sz);
#pragma omp for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      for (int gi = 0; gi < g.groups; ++gi) {
        const R* src = x.data() + (static_cast<size_t>(ni) * cin + gi * icg) * h * wd;
        detail::im2col(src, icg, h, wd, kh, kw, g.stride, g.pad_h, g.pad_w, g.dil_h, g.dil_w, oh,
                       ow, cols.data());
        R* dst = y.data() + (static_cast<size_t>(ni) * cout + gi * ocg) * oh * ow;
        gemm(false, false, ocg, oh * ow, icg * kh * kw, R(1),
             w.data() + static_cast<size_t>(gi) * ocg * icg * kh * kw, icg * kh * kw, cols.data(),
             oh * ow, R(0), dst, oh * ow);
      }
    }
  }
  return y;
}

template <typename R>
Tensor<R> conv2d_bwd_x(const Tensor<R>& gy, const Tensor<R>& w, const Conv2dGeom& g, int h, int wd) {
  const int n = gy.dim(0), cout = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
  const int kh = w.dim(2), kw = w.dim(3);
  const int icg = w.dim(1), ocg = cout / g.groups;
  const int cin = icg * g.groups;
  Tensor<R> gx({n, cin, h, wd});

  if (detail::is_pointwise(g, kh, kw)) {
#pragma omp parallel for num_threads(worker_threads()) schedule(static)
    for (int ni = 0; ni < n; ++ni)
      gemm(true, false, cin, oh * ow, cout, R(1), w.data(), cin,
           gy.data() + static_cast<size_t>(ni) * cout * oh * ow, oh * ow, R(0),
           gx.data() + static_cast<size_t>(ni) * cin * h * wd, oh * ow);
    return gx;
  }

  if (detail::is_depthwise(g, cin, cout, icg)) {
#pragma omp parallel for num_threads(worker_threads()) schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      for (int c = 0; c < cin; ++c) {
        const R* gsrc = gy.data() + (static_cast<size_t>(ni) * cin + c) * oh * ow;
        const R* ker = w.data() + static_cast<size_t>(c) * kh * kw;
        R* dst = gx.data() + (static_cast<size_t>(ni) * cin + c) * h * wd;
        for (int yy = 0; yy < oh; ++yy)
          for (int xx = 0; xx < ow; ++xx) {
            const R gv = gsrc[static_cast<size_t>(yy) * ow + xx];
            if (gv == R(0)) continue;
            for (int i = 0; i < kh; ++i) {
              const int sy = yy * g.stride - g.pad_h + i * g.dil_h;
              if (sy < 0 || sy >= h) continue;
              for (int j = 0; j < kw; ++j) {
                const int sx = xx * g.stride - g.pad_w + j * g.dil_w;
                if (sx < 0 || sx >= wd) continue;
                dst[static_cast<size_t>(sy) * wd + sx] += gv * ker[i * kw + j];
              }
            }
          }
      }
    }
    return gx;
  }

  const size_t cols_sz = static_cast<size_t>(icg) * kh * kw * oh * ow;
#pragma omp parallel num_threads(worker_threads())
  {
    auto& cols = detail::col_scratch<R>();
    cols.resize(cols_sz);
#pragma omp for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      for (int gi = 0; gi < g.groups; ++gi) {
        // cols = W^T * gy
        gemm(true, false, icg * kh * kw, oh * ow, ocg, R(1),
             w.data() + static_cast<size_t>(gi) * ocg * icg * kh * kw, icg * kh * kw,
             gy.data() + (static_cast<size_t>(ni) * cout + gi * ocg) * oh * ow, oh * ow, R(0),
             cols.data(), oh * ow);
        R* dst = gx.data() + (static_cast<size_t>(ni) * cin + gi * icg) * h * wd;
        detail::col2im(cols.data(), icg, h, wd, kh, kw, g.stride, g.pad_h, g.pad_w, g.dil_h,
                       g.dil_w, oh, ow, dst);
      }
    }
  }
  return gx;
}

// Per-sample contributions land in private buffers and reduce in sample order,
// so the result is independent of thread scheduling.
template <typename R>
Tensor<R> conv2d_bwd_w(const Tensor<R>& x, const Tensor<R>& gy, const Conv2dGeom& g,
                       const std::vector<int>& w_shape) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
  const int kh = w_shape[2], kw = w_shape[3];
  const int icg = cin / g.groups, ocg = cout / g.groups;

  std::vector<Tensor<R>> partial(static_cast<size_t>(n));

  if (detail::is_pointwise(g, kh, kw)) {
#pragma omp parallel for num_threads(worker_threads()) schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      Tensor<R> gw(w_shape);
      gemm(false, true, cout, cin, oh * ow, R(1),
           gy.data() + static_cast<size_t>(ni) * cout * oh * ow, oh * ow,
           x.data() + static_cast<size_t>(ni) * cin * h * wd, oh * ow, R(0), gw.data(), cin);
      partial[static_cast<size_t>(ni)] = std::move(gw);
    }
  } else if (detail::is_depthwise(g, cin, cout, icg)) {
#pragma omp parallel for num_threads(worker_threads()) schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      Tensor<R> gw(w_shape);
      for (int c = 0; c < cin; ++c) {
        const R* src = x.data() + (static_cast<size_t>(ni) * cin + c) * h * wd;
        const R* gsrc = gy.data() + (static_cast<size_t>(ni) * cin + c) * oh * ow;
        R* kacc = gw.data() + static_cast<size_t>(c) * kh * kw;
        for (int i = 0; i < kh; ++i)
          for (int j = 0; j < kw; ++j) {
            R acc = 0;
            for (int yy = 0; yy < oh; ++yy) {
              const int sy = yy * g.stride - g.pad_h + i * g.dil_h;
              if (sy < 0 || sy >= h) continue;
              for (int xx = 0; xx < ow; ++xx) {
                const int sx = xx * g.stride - g.pad_w + j * g.dil_w;
                if (sx < 0 || sx >= wd) continue;
                acc += gsrc[static_cast<size_t>(yy) * ow + xx] *
                       src[static_cast<size_t>(sy) * wd + sx];
              }
            }
            kacc[i * kw + j] = acc;
          }
      }
      partial[static_cast<size_t>(ni)] = std::move(gw);
    }
  } else {
    const size_t cols_sz = static_cast<size_t>(icg) * kh * kw * oh * ow;
#pragma omp parallel num_threads(worker_threads())
    {
      auto& cols = detail::col_scratch<R>();
      cols.resize(cols_sz);
#pragma omp for schedule(static)
      for (int ni = 0; ni < n; ++ni) {
        Tensor<R> gw(w_shape);
        for (int gi = 0; gi < g.groups; ++gi) {
          const R* src = x.data() + (static_cast<size_t>(ni) * cin + gi * icg) * h * wd;
          detail::im2col(src, icg, h, wd, kh, kw, g.stride, g.pad_h, g.pad_w, g.dil_h, g.dil_w,
                         oh, ow, cols.data());
          gemm(false, true, ocg, icg * kh * kw, oh * ow, R(1),
               gy.data() + (static_cast<size_t>(ni) * cout + gi * ocg) * oh * ow, oh * ow,
               cols.data(), oh * ow, R(1),
               gw.data() + static_cast<size_t>(gi) * ocg * icg * kh * kw, icg * kh * kw);
        }
        partial[static_cast<size_t>(ni)] = std::move(gw);
      }
    }
  }

  // reduce per-sample contributions in sample order
  Tensor<R> gw(w_shape);
  for (int ni = 0; ni < n; ++ni)
    for (size_t j = 0; j < gw.v.size(); ++j) gw.v[j] += partial[static_cast<size_t>(ni)].v[j];
  return gw;
}

// x: (N, Cin, h, w); w: (Cin, Cout, kh, kw) -> (N, Cout, H, W),
// H = (h-1)*stride - 2*pad + kh. Adjoint of conv2d with the same weight.
template <typename R>
Tensor<R> convt2d_fwd(const Tensor<R>& x, const Tensor<R>& w, int stride, int pad,
                      ConvImpl impl = ConvImpl::gemm) {
  require_arg(x.rank() == 4 && w.rank() == 4, "conv_transpose2d: expects rank-4 input and weight");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  require_arg(w.dim(0) == cin, "conv_transpose2d: weight in-channel mismatch");
  const int cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const int oh = (h - 1) * stride - 2 * pad + kh;
  const int ow = (wd - 1) * stride - 2 * pad + kw;
  require_arg(oh > 0 && ow > 0, "conv_transpose2d: non-positive output extent");

  Tensor<R> y({n, cout, oh, ow});

  if (impl == ConvImpl::naive) {
#pragma omp parallel for num_threads(worker_threads()) schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      for (int ci = 0; ci < cin; ++ci)
        for (int yy = 0; yy < h; ++yy)
          for (int xx = 0; xx < wd; ++xx) {
            const R xv = x.at4(ni, ci, yy, xx);
            if (xv == R(0)) continue;
            for (int co = 0; co < cout; ++co)
              for (int i = 0; i < kh; ++i)
                for (int j = 0; j < kw; ++j) {
                  const int sy = yy * stride - pad + i;
                  const int sx = xx * stride - pad + j;
                  if (sy < 0 || sy >= oh || sx < 0 || sx >= ow) continue;
                  y.at4(ni, co, sy, sx) += xv * w.at4(ci, co, i, j);
                }
          }
    }
    return y;
  }

  const size_t cols_sz = static_cast<size_t>(cout) * kh * kw * h * wd;
#pragma omp parallel num_threads(worker_threads())
  {
    auto& cols = detail::col_scratch<R>();
    cols.resize(cols_sz);
#pragma omp for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      // cols = W_mat^T (Cout*kh*kw x Cin) * x_n (Cin x h*w)
      gemm(true, false, cout * kh * kw, h * wd, cin, R(1), w.data(), cout * kh * kw,
           x.data() + static_cast<size_t>(ni) * cin * h * wd, h * wd, R(0), cols.data(), h * wd);
      R* dst = y.data() + static_cast<size_t>(ni) * cout * oh * ow;
      detail::col2im(cols.data(), cout, oh, ow, kh, kw, stride, pad, pad, 1, 1, h, wd, dst);
    }
  }
  return y;
}

template <typename R>
Tensor<R> convt2d_bwd_x(const Tensor<R>& gy, const Tensor<R>& w, int stride, int pad, int h,
                        int wd) {
  // d/dx of the adjoint is the forward conv with the same kernel.
  Conv2dGeom g;
  g.stride = stride;
  g.pad_h = g.pad_w = pad;
  const int n = gy.dim(0), cout = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
  const int cin = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  Tensor<R> gx({n, cin, h, wd});
  const size_t cols_sz = static_cast<size_t>(cout) * kh * kw * h * wd;
#pragma omp parallel num_threads(worker_threads())
  {
    auto& cols = detail::col_scratch<R>();
    cols.resize(cols_sz);
#pragma omp for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      const R* src = gy.data() + static_cast<size_t>(ni) * cout * oh * ow;
      detail::im2col(src, cout, oh, ow, kh, kw, stride, pad, pad, 1, 1, h, wd, cols.data());
      gemm(false, false, cin, h * wd, cout * kh * kw, R(1), w.data(), cout * kh * kw, cols.data(),
           h * wd, R(0), gx.data() + static_cast<size_t>(ni) * cin * h * wd, h * wd);
    }
  }
  return gx;
}

template <typename R>
Tensor<R> convt2d_bwd_w(const Tensor<R>& x, const Tensor<R>& gy, int stride, int pad,
                        const std::vector<int>& w_shape) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
  const int kh = w_shape[2], kw = w_shape[3];

  std::vector<Tensor<R>> partial(static_cast<size_t>(n));
  const size_t cols_sz = static_cast<size_t>(cout) * kh * kw * h * wd;
#pragma omp parallel num_threads(worker_threads())
  {
    auto& cols = detail::col_scratch<R>();
    cols.resize(cols_sz);
#pragma omp for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      Tensor<R> gw(w_shape);
      const R* src = gy.data() + static_cast<size_t>(ni) * cout * oh * ow;
      detail::im2col(src, cout, oh, ow, kh, kw, stride, pad, pad, 1, 1, h, wd, cols.data());
      gemm(false, true, cin, cout * kh * kw, h * wd, R(1),
           x.data() + static_cast<size_t>(ni) * cin * h * wd, h * wd, cols.data(), h * wd, R(0),
           gw.data(), cout * kh * kw);
      partial[static_cast<size_t>(ni)] = std::move(gw);
    }
  }
  Tensor<R> gw(w_shape);
  for (int ni = 0; ni < n; ++ni)
    for (size_t j = 0; j < gw.v.size(); ++j) gw.v[j] += partial[static_cast<size_t>(ni)].v[j];
  return gw;
}

}  // namespace sltnet

#endif  // SLTNET_CONV_KERNELS_HPP
