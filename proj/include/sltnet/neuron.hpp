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
#ifndef SLTNET_NEURON_HPP
#define SLTNET_NEURON_HPP

#include <cmath>
#include <string>
#include <utility>

#include "sltnet/ops.hpp"

namespace sltnet {

// Evolutionary LIF neuron constants. tau is the leak factor applied to the
// previous membrane potential; a neuron fires when the accumulated potential
// crosses u_th and hard-resets to u_reset.
template <typename R>
struct NeuronConfig {
  R tau = R(0.25);
  R u_th = R(1.0);
  R u_reset = R(0.0);
  int time_steps = 1;

  void validate() const {
    require_arg(tau >= R(0) && tau <= R(1), "neuron: tau must lie in [0,1]");
    require_arg(u_th > u_reset, "neuron: u_th must exceed u_reset");
    require_arg(time_steps >= 1, "neuron: time_steps must be >= 1");
  }
};

// phi(x) = 0.5*tanh(K*(x - u_th)) + 0.5 — the epoch-scheduled surrogate.
inline double evaf_value(double x, double k, double u_th) {
  return 0.5 * std::tanh(k * (x - u_th)) + 0.5;
}

inline double evaf_derivative(double x, double k, double u_th) {
  const double th = std::tanh(k * (x - u_th));
  return 0.5 * k * (1.0 - th * th);
}

// K(i) = ((10^(i/N) - 1)*k_max + (10 - 10^(i/N))*k_min) / 9 for i in [0, N-1].
inline double evaf_k(int epoch, int total_epochs, double k_min, double k_max) {
  require_arg(total_epochs >= 1, "evaf_k: total epochs must be positive");
  require_arg(epoch >= 0 && epoch <= total_epochs - 1, "evaf_k: epoch index out of range");
  require_arg(k_min > 0 && k_max >= k_min, "evaf_k: require 0 < k_min <= k_max");
  const double p = std::pow(10.0, static_cast<double>(epoch) / total_epochs);
  return ((p - 1.0) * k_max + (10.0 - p) * k_min) / 9.0;
}

enum class SpikeMode { hard, smoothed };

// One ESN step without a tape: M = tau*U_prev + I, S = H(M - u_th) (or phi(M)
// in smoothed mode), U_new = u_reset*S + M*(1-S). Pass an empty u_prev for a
// zero-initialized state.
template <typename R>
std::pair<Tensor<R>, Tensor<R>> esn_forward(const Tensor<R>& input, const Tensor<R>& u_prev,
                                            const NeuronConfig<R>& cfg, R surrogate_k = R(1),
                                            SpikeMode mode = SpikeMode::hard) {
  cfg.validate();
  const bool has_state = !u_prev.v.empty();
  if (has_state) check_same_shape(input, u_prev, "esn_forward");
  Tensor<R> spikes(input.shape);
  Tensor<R> u_new(input.shape);
  const int64_t n = input.numel();
  par_for(n, [&](int64_t i) {
    const R m = has_state ? cfg.tau * u_prev[i] + input[i] : input[i];
    R s;
    if (mode == SpikeMode::hard) {
      s = m >= cfg.u_th ? R(1) : R(0);
    } else {
      s = static_cast<R>(evaf_value(static_cast<double>(m), static_cast<double>(surrogate_k),
                                    static_cast<double>(cfg.u_th)));
    }
    spikes[i] = s;
    u_new[i] = cfg.u_reset * s + m * (R(1) - s);
  });
  return {std::move(spikes), std::move(u_new)};
}

struct EsnVars {
  Var spikes;
  Var u_new;  // invalid when the caller did not request state output
};

// Tape op for one ESN step. The surrogate dS/dM = phi'(M) is used for the
// spike path in both modes; the reset multiplication is detached, so the
// state path carries tau*(1-S) only.
template <typename R>
EsnVars esn_step(Tape<R>& t, Var input, Var u_prev, const NeuronConfig<R>& cfg, R surrogate_k,
                 SpikeMode mode, bool need_state) {
  cfg.validate();
  auto iv = t.val_ptr(input);
  const bool has_state = u_prev.valid();

  std::shared_ptr<Tensor<R>> m;  // pre-spike membrane
  if (has_state) {
    const auto& uv = t.val(u_prev);
    check_same_shape(*iv, uv, "esn_step");
    m = std::make_shared<Tensor<R>>(iv->shape);
    par_for(iv->numel(), [&](int64_t i) { (*m)[i] = cfg.tau * uv[i] + (*iv)[i]; });
  } else {
    m = iv;  // M aliases the input current when the previous state is zero
  }

  auto spikes = std::make_shared<Tensor<R>>(iv->shape);
  const int64_t n = iv->numel();
  par_for(n, [&](int64_t i) {
    if (mode == SpikeMode::hard) {
      (*spikes)[i] = (*m)[i] >= cfg.u_th ? R(1) : R(0);
    } else {
      (*spikes)[i] = static_cast<R>(evaf_value(static_cast<double>((*m)[i]),
                                               static_cast<double>(surrogate_k),
                                               static_cast<double>(cfg.u_th)));
    }
  });

  std::vector<std::shared_ptr<Tensor<R>>> outs{spikes};
  if (need_state) {
    auto u_new = std::make_shared<Tensor<R>>(iv->shape);
    par_for(n, [&](int64_t i) {
      (*u_new)[i] = cfg.u_reset * (*spikes)[i] + (*m)[i] * (R(1) - (*spikes)[i]);
    });
    outs.push_back(u_new);
  }

  Var out = t.emit(std::move(outs), [input, u_prev, m, spikes, cfg, surrogate_k, need_state](
                                        Tape<R>& tp, int id) {
    const Tensor<R>* gs = tp.grad_of(Var{id, 0});
    const Tensor<R>* gu = need_state ? tp.grad_of(Var{id, 1}) : nullptr;
    if (!gs && !gu) return;
    Tensor<R>& gi = tp.grad_acc(input);
    Tensor<R>* gprev = u_prev.valid() ? &tp.grad_acc(u_prev) : nullptr;
    const R k = surrogate_k;
    par_for(gi.numel(), [&](int64_t i) {
      R gm = 0;
      if (gs && (*gs)[i] != R(0))
        gm += (*gs)[i] * static_cast<R>(evaf_derivative(static_cast<double>((*m)[i]),
                                                        static_cast<double>(k),
                                                        static_cast<double>(cfg.u_th)));
      if (gu) gm += (*gu)[i] * (R(1) - (*spikes)[i]);
      gi[i] += gm;
      if (gprev) (*gprev)[i] += cfg.tau * gm;
    });
  });

  EsnVars r;
  r.spikes = out;
  if (need_state) r.u_new = Var{out.node, 1};
  return r;
}

// ---------------------------------------------------------------------------
// shortcut variants (ablation wiring)
// ---------------------------------------------------------------------------

enum class ShortcutKind { ms, vs, sew };

inline const char* shortcut_name(ShortcutKind k) {
  switch (k) {
    case ShortcutKind::ms: return "ms";
    case ShortcutKind::vs: return "vs";
    default: return "sew";
  }
}

template <typename R>
bool is_binary_tensor(const Tensor<R>& x) {
  for (int64_t i = 0; i < x.numel(); ++i)
    if (x[i] != R(0) && x[i] != R(1)) return false;
  return true;
}

// MS adds membrane potentials; VS adds spikes onto a membrane; SEW adds two
// binary spike tensors (ADD semantics, values land in {0,1,2}).
template <typename R>
Var shortcut(Tape<R>& t, ShortcutKind kind, Var trunk_out, Var residual_in) {
  if (kind == ShortcutKind::sew) {
    require_valid(is_binary_tensor(t.val(trunk_out)) && is_binary_tensor(t.val(residual_in)),
                  "sew shortcut: inputs must be binary spike tensors");
  }
  return add(t, trunk_out, residual_in);
}

}  // namespace sltnet

#endif  // SLTNET_NEURON_HPP
