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
#ifndef SLTNET_LOSS_HPP
#define SLTNET_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <memory>

#include "sltnet/events.hpp"
#include "sltnet/ops.hpp"

namespace sltnet {

// Batched per-pixel class ids.
struct LabelBatch {
  int n = 0, h = 0, w = 0;
  std::vector<int32_t> v;

  int32_t at(int ni, int y, int x) const {
    return v[(static_cast<size_t>(ni) * h + y) * w + x];
  }
  int64_t numel() const { return static_cast<int64_t>(v.size()); }

  static LabelBatch from(const std::vector<const LabelMap*>& maps) {
    LabelBatch b;
    require_arg(!maps.empty(), "label batch: empty");
    b.n = static_cast<int>(maps.size());
    b.h = maps[0]->height;
    b.w = maps[0]->width;
    b.v.reserve(static_cast<size_t>(b.n) * b.h * b.w);
    for (const LabelMap* m : maps) {
      require_arg(m->height == b.h && m->width == b.w, "label batch: mixed extents");
      for (uint8_t id : m->ids) b.v.push_back(id);
    }
    return b;
  }
};

// Nearest-neighbour (pixel-center) downsampling; preserves class ids.
inline LabelBatch downsample_labels_nearest(const LabelBatch& in, int oh, int ow) {
  LabelBatch out;
  out.n = in.n;
  out.h = oh;
  out.w = ow;
  out.v.resize(static_cast<size_t>(in.n) * oh * ow);
  for (int ni = 0; ni < in.n; ++ni)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const int sy = std::min(in.h - 1, static_cast<int>((y + 0.5) * in.h / oh));
        const int sx = std::min(in.w - 1, static_cast<int>((x + 0.5) * in.w / ow));
        out.v[(static_cast<size_t>(ni) * oh + y) * ow + x] = in.at(ni, sy, sx);
      }
  return out;
}

struct LossConfig {
  double lambda1 = 1.0;
  double lambda2 = 0.4;
  double ohem_k = 0.7;
  int ignore_id = LabelMap::kIgnore;

  void validate() const {
    require_arg(ohem_k > 0.0 && ohem_k <= 1.0, "loss: ohem_k must lie in (0, 1]");
    require_arg(lambda1 >= 0.0 && lambda2 >= 0.0, "loss: lambdas must be non-negative");
  }
};

// Per-pixel softmax cross-entropy; ignored pixels carry loss 0. Softmax is
// recomputed in backward from the saved logits instead of storing probs.
template <typename R>
Var softmax_ce_map(Tape<R>& t, Var logits, std::shared_ptr<LabelBatch> labels, int ignore_id) {
  auto lv = t.val_ptr(logits);
  require_arg(lv->rank() == 4, "ce: logits must be (N, C, H, W)");
  const int n = lv->dim(0), c = lv->dim(1), h = lv->dim(2), w = lv->dim(3);
  require_arg(labels->n == n && labels->h == h && labels->w == w,
              "ce: label extents do not match logits");
  for (int32_t y : labels->v)
    require_valid(y == ignore_id || (y >= 0 && y < c), "ce: label id out of range");

  auto out = std::make_shared<Tensor<R>>(std::vector<int>{n, 1, h, w});
  const int64_t hw = static_cast<int64_t>(h) * w;
  par_for(static_cast<int64_t>(n) * hw, [&](int64_t i) {
    const int64_t ni = i / hw, px = i % hw;
    const int32_t y = labels->v[static_cast<size_t>(i)];
    if (y == ignore_id) return;
    const R* lp = lv->data() + (ni * c) * hw + px;
    R mx = lp[0];
    for (int ci = 1; ci < c; ++ci) mx = std::max(mx, lp[ci * hw]);
    R lse = 0;
    for (int ci = 0; ci < c; ++ci) lse += std::exp(lp[ci * hw] - mx);
    (*out)[i] = std::log(lse) + mx - lp[y * hw];
  });

  return t.emit({out}, [logits, lv, labels, ignore_id, n, c, hw](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gl = tp.grad_acc(logits);
    par_for(static_cast<int64_t>(n) * hw, [&](int64_t i) {
      const int64_t ni = i / hw, px = i % hw;
      const int32_t y = labels->v[static_cast<size_t>(i)];
      if (y == ignore_id) return;
      const R g = (*go)[i];
      if (g == R(0)) return;
      const R* lp = lv->data() + (ni * c) * hw + px;
      R* gp = gl.data() + (ni * c) * hw + px;
      R mx = lp[0];
      for (int ci = 1; ci < c; ++ci) mx = std::max(mx, lp[ci * hw]);
      R lse = 0;
      for (int ci = 0; ci < c; ++ci) lse += std::exp(lp[ci * hw] - mx);
      for (int ci = 0; ci < c; ++ci) {
        const R p = std::exp(lp[ci * hw] - mx) / lse;
        gp[ci * hw] += g * (p - (ci == y ? R(1) : R(0)));
      }
    });
  });
}

// Mean of the ceil(k*M) largest per-pixel losses among the M valid pixels;
// values tied with the selection threshold are all included.
template <typename R>
Var ohem_mean(Tape<R>& t, Var loss_map, std::shared_ptr<LabelBatch> labels, double k,
              int ignore_id) {
  require_arg(k > 0.0 && k <= 1.0, "ohem: k must lie in (0, 1]");
  auto mv = t.val_ptr(loss_map);
  require_arg(mv->numel() == labels->numel(), "ohem: loss map does not match labels");

  std::vector<R> valid;
  valid.reserve(static_cast<size_t>(mv->numel()));
  for (int64_t i = 0; i < mv->numel(); ++i)
    if (labels->v[static_cast<size_t>(i)] != ignore_id) valid.push_back((*mv)[i]);
  require_valid(!valid.empty(), "ohem: no valid pixels under the ignore mask");

  const int64_t m = static_cast<int64_t>(valid.size());
  const int64_t kcount = std::min<int64_t>(
      m, static_cast<int64_t>(std::ceil(k * static_cast<double>(m))));
  std::nth_element(valid.begin(), valid.begin() + (kcount - 1), valid.end(), std::greater<R>());
  const R threshold = valid[static_cast<size_t>(kcount - 1)];

  auto selected = std::make_shared<std::vector<int64_t>>();
  R sum = 0;
  for (int64_t i = 0; i < mv->numel(); ++i) {
    if (labels->v[static_cast<size_t>(i)] == ignore_id) continue;
    if ((*mv)[i] >= threshold) {
      selected->push_back(i);
      sum += (*mv)[i];
    }
  }
  const R mean = sum / static_cast<R>(selected->size());

  auto out = std::make_shared<Tensor<R>>(Tensor<R>::scalar(mean));
  return t.emit({out}, [loss_map, selected](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gm = tp.grad_acc(loss_map);
    const R g = (*go)[0] / static_cast<R>(selected->size());
    for (int64_t i : *selected) gm[i] += g;
  });
}

// Plain mean over non-ignored pixels (the early-loss path).
template <typename R>
Var mean_valid(Tape<R>& t, Var loss_map, std::shared_ptr<LabelBatch> labels, int ignore_id) {
  auto mv = t.val_ptr(loss_map);
  require_arg(mv->numel() == labels->numel(), "mean: loss map does not match labels");
  auto selected = std::make_shared<std::vector<int64_t>>();
  R sum = 0;
  for (int64_t i = 0; i < mv->numel(); ++i)
    if (labels->v[static_cast<size_t>(i)] != ignore_id) {
      selected->push_back(i);
      sum += (*mv)[i];
    }
  require_valid(!selected->empty(), "mean: no valid pixels under the ignore mask");
  const R mean = sum / static_cast<R>(selected->size());
  auto out = std::make_shared<Tensor<R>>(Tensor<R>::scalar(mean));
  return t.emit({out}, [loss_map, selected](Tape<R>& tp, int id) {
    const Tensor<R>* go = tp.grad_of(Var{id, 0});
    if (!go) return;
    Tensor<R>& gm = tp.grad_acc(loss_map);
    const R g = (*go)[0] / static_cast<R>(selected->size());
    for (int64_t i : *selected) gm[i] += g;
  });
}

// Loss = lambda1 * OHEM(CE(P1)) + lambda2 * meanCE(P2 at its native grid);
// P2 is compared against nearest-downsampled labels. Zero lambdas drop the
// corresponding head entirely (the single-loss ablation wirings).
template <typename R>
Var total_loss(Tape<R>& t, Var p1, Var p2, const LabelBatch& labels, const LossConfig& cfg) {
  cfg.validate();
  auto full = std::make_shared<LabelBatch>(labels);
  Var loss;
  if (cfg.lambda1 > 0.0) {
    Var map1 = softmax_ce_map(t, p1, full, cfg.ignore_id);
    Var l1 = ohem_mean(t, map1, full, cfg.ohem_k, cfg.ignore_id);
    loss = scale(t, l1, static_cast<R>(cfg.lambda1));
  }
  if (cfg.lambda2 > 0.0) {
    const auto& p2v = t.val(p2);
    auto ds = std::make_shared<LabelBatch>(
        downsample_labels_nearest(labels, p2v.dim(2), p2v.dim(3)));
    Var map2 = softmax_ce_map(t, p2, ds, cfg.ignore_id);
    Var l2 = scale(t, mean_valid(t, map2, ds, cfg.ignore_id), static_cast<R>(cfg.lambda2));
    loss = loss.valid() ? add(t, loss, l2) : l2;
  }
  if (!loss.valid()) loss = t.leaf(Tensor<R>::scalar(R(0)));
  return loss;
}

}  // namespace sltnet

#endif  // SLTNET_LOSS_HPP
