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
#ifndef SLTNET_OPTIM_HPP
#define SLTNET_OPTIM_HPP

#include <cmath>

#include "sltnet/params.hpp"

namespace sltnet {

struct OptimConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 300;
  int batch = 64;
  int step_size = 5;
  double gamma = 0.92;

  void validate() const {
    require_arg(lr > 0.0, "optim: lr must be positive");
    require_arg(gamma > 0.0 && gamma <= 1.0, "optim: gamma must lie in (0, 1]");
    require_arg(step_size >= 1, "optim: step_size must be >= 1");
    require_arg(epochs >= 1 && batch >= 1, "optim: epochs and batch must be >= 1");
    require_arg(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
                "optim: betas must lie in [0, 1)");
    require_arg(weight_decay >= 0.0, "optim: weight decay must be non-negative");
  }
};

// StepLR: lr0 * gamma^floor(epoch / step_size)
inline double step_lr(int epoch, const OptimConfig& cfg) {
  require_arg(epoch >= 0, "step_lr: epoch must be non-negative");
  return cfg.lr * std::pow(cfg.gamma, static_cast<double>(epoch / cfg.step_size));
}

// Classic Adam with L2 weight decay folded into the gradient; t counts
// optimizer steps starting at 1 for bias correction.
template <typename R>
void adam_update(Tensor<R>& p, const Tensor<R>& g, Tensor<R>& m, Tensor<R>& v, int64_t t,
                 const OptimConfig& cfg, double lr_now) {
  require_arg(t >= 1, "adam: step index must start at 1");
  const R b1 = static_cast<R>(cfg.beta1), b2 = static_cast<R>(cfg.beta2);
  const R wd = static_cast<R>(cfg.weight_decay);
  const R eps = static_cast<R>(cfg.eps);
  const R lr = static_cast<R>(lr_now);
  const R c1 = static_cast<R>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const R c2 = static_cast<R>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  R* pp = p.data();
  const R* gp = g.data();
  R* mp = m.data();
  R* vp = v.data();
  par_for(p.numel(), [&](int64_t i) {
    const R ge = gp[i] + wd * pp[i];
    mp[i] = b1 * mp[i] + (R(1) - b1) * ge;
    vp[i] = b2 * vp[i] + (R(1) - b2) * ge * ge;
    const R mh = mp[i] / c1;
    const R vh = vp[i] / c2;
    pp[i] -= lr * mh / (std::sqrt(vh) + eps);
  });
}

// One optimizer step over every trainable entry; moments are index-aligned
// with the trainable entries in store order.
template <typename R>
void adam_step(ParamStore<R>& store, std::vector<Tensor<R>>& m, std::vector<Tensor<R>>& v,
               int64_t t, const OptimConfig& cfg, double lr_now) {
  size_t k = 0;
  for (auto& e : store.entries()) {
    if (!e.trainable) continue;
    require_arg(k < m.size(), "adam: moment buffers do not match the store");
    adam_update(*e.value, e.grad, m[k], v[k], t, cfg, lr_now);
    ++k;
  }
}

}  // namespace sltnet

#endif  // SLTNET_OPTIM_HPP
