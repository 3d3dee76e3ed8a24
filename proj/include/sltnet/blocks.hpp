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
#ifndef SLTNET_BLOCKS_HPP
#define SLTNET_BLOCKS_HPP

#include <array>
#include <string>
#include <vector>

#include "sltnet/graph.hpp"
#include "sltnet/neuron.hpp"
#include "sltnet/params.hpp"
#include "sltnet/rng.hpp"

namespace sltnet {

// Shared state for one forward step. The membrane stream between components
// is real-valued; each component spikes its own input through an entry ESN.
template <typename R>
struct PassCtx {
  Tape<R>& tape;
  ParamStore<R>& store;
  std::vector<Var>& neuron_state;  // per neuron id, carried across time steps
  NeuronConfig<R> neuron;
  R surrogate_k = R(1);
  SpikeMode mode = SpikeMode::hard;
  bool training = false;
  bool update_bn = false;
  bool folded = false;
  bool last_step = true;  // skip state output on the final time step
  ActivationRecord* rec = nullptr;

  void note_shape(const std::string& name, const Tensor<R>& v) {
    if (rec && rec->record_shapes) rec->shapes.emplace_back(name, v.shape);
  }
};

// Registers parameters, graph records and neuron ids while the network is
// assembled. Parameter initialization draws from the builder rng in creation
// order, so a seed pins every byte.
template <typename R>
struct NetBuilder {
  ParamStore<R>& store;
  LayerGraph& graph;
  std::vector<std::string>& neuron_names;
  Rng rng;

  Tensor<R> kaiming(std::vector<int> shape, int fan_in) {
    Tensor<R> w(std::move(shape));
    const double bound = std::sqrt(6.0 / std::max(1, fan_in));
    for (auto& x : w.v) x = static_cast<R>(rng.uniform(-bound, bound));
    return w;
  }
};

// ---------------------------------------------------------------------------
// primitive layers
// ---------------------------------------------------------------------------

template <typename R>
struct ConvLayer {
  int w_id = -1;
  Conv2dGeom geom;

  Var fwd(PassCtx<R>& ctx, Var x) const {
    return conv2d(ctx.tape, x, ctx.store.var(ctx.tape, w_id), geom);
  }
};

template <typename R>
ConvLayer<R> make_conv(NetBuilder<R>& b, const std::string& name, int cin, int cout, int kh,
                       int kw, Conv2dGeom geom, Domain domain, int level_in, int level_out,
                       const std::vector<std::string>& rate_keys, bool emit_record = true) {
  ConvLayer<R> l;
  l.geom = geom;
  const int fan_in = (cin / geom.groups) * kh * kw;
  l.w_id = b.store.add(name + ".w", b.kaiming({cout, cin / geom.groups, kh, kw}, fan_in));
  if (emit_record) {
    LayerRecord r;
    r.name = name;
    r.kind = LayerKind::conv;
    r.domain = domain;
    r.cin = cin;
    r.cout = cout;
    r.kh = kh;
    r.kw = kw;
    r.groups = geom.groups;
    r.stride = geom.stride;
    r.level_in = level_in;
    r.level_out = level_out;
    r.params = static_cast<int64_t>(cout) * (cin / geom.groups) * kh * kw;
    r.rate_keys = rate_keys;
    b.graph.layers.push_back(std::move(r));
  }
  return l;
}

template <typename R>
struct ConvTransposeLayer {
  int w_id = -1;
  int stride = 2, pad = 1;

  Var fwd(PassCtx<R>& ctx, Var x) const {
    return conv_transpose2d(ctx.tape, x, ctx.store.var(ctx.tape, w_id), stride, pad);
  }
};

template <typename R>
ConvTransposeLayer<R> make_conv_transpose(NetBuilder<R>& b, const std::string& name, int cin,
                                          int cout, int k, int stride, int pad, int level_in,
                                          const std::vector<std::string>& rate_keys) {
  ConvTransposeLayer<R> l;
  l.stride = stride;
  l.pad = pad;
  l.w_id = b.store.add(name + ".w", b.kaiming({cin, cout, k, k}, cin * k * k / (stride * stride)));
  LayerRecord r;
  r.name = name;
  r.kind = LayerKind::conv_transpose;
  r.domain = Domain::spike;
  r.cin = cin;
  r.cout = cout;
  r.kh = r.kw = k;
  r.stride = stride;
  r.level_in = level_in;
  r.level_out = level_in - 1;
  r.params = static_cast<int64_t>(cin) * cout * k * k;
  r.rate_keys = rate_keys;
  b.graph.layers.push_back(std::move(r));
  return l;
}

template <typename R>
struct BnLayer {
  int gamma_id = -1, beta_id = -1, rm_id = -1, rv_id = -1;

  Var fwd(PassCtx<R>& ctx, Var x) const {
    BnArgs<R> a;
    a.training = ctx.training;
    a.update_running = ctx.training && ctx.update_bn;
    return batchnorm2d(ctx.tape, x, ctx.store.var(ctx.tape, gamma_id),
                       ctx.store.var(ctx.tape, beta_id), *ctx.store[rm_id].value,
                       *ctx.store[rv_id].value, a);
  }
};

template <typename R>
BnLayer<R> make_bn(NetBuilder<R>& b, const std::string& name, int c, int level,
                   bool emit_record = true) {
  BnLayer<R> l;
  l.gamma_id = b.store.add(name + ".gamma", Tensor<R>::full({c}, R(1)));
  l.beta_id = b.store.add(name + ".beta", Tensor<R>::zeros({c}));
  l.rm_id = b.store.add(name + ".running_mean", Tensor<R>::zeros({c}), false);
  l.rv_id = b.store.add(name + ".running_var", Tensor<R>::full({c}, R(1)), false);
  if (emit_record) {
    LayerRecord r;
    r.name = name;
    r.kind = LayerKind::bn;
    r.cin = r.cout = c;
    r.level_in = r.level_out = level;
    r.params = 2 * c;
    b.graph.layers.push_back(std::move(r));
  }
  return l;
}

template <typename R>
struct LinearLayer {
  int w_id = -1, b_id = -1;

  Var fwd(PassCtx<R>& ctx, Var x) const {
    return linear(ctx.tape, x, ctx.store.var(ctx.tape, w_id),
                  b_id >= 0 ? ctx.store.var(ctx.tape, b_id) : Var{});
  }
};

template <typename R>
LinearLayer<R> make_linear(NetBuilder<R>& b, const std::string& name, int in, int out,
                           LayerKind kind, Domain domain, int level,
                           const std::vector<std::string>& rate_keys) {
  LinearLayer<R> l;
  l.w_id = b.store.add(name + ".w", b.kaiming({out, in}, in));
  l.b_id = b.store.add(name + ".b", Tensor<R>::zeros({out}));
  LayerRecord r;
  r.name = name;
  r.kind = kind;
  r.domain = domain;
  r.cin = in;
  r.cout = out;
  r.level_in = r.level_out = level;
  r.params = static_cast<int64_t>(out) * in + out;
  r.rate_keys = rate_keys;
  b.graph.layers.push_back(std::move(r));
  return l;
}

template <typename R>
struct EsnLayer {
  int id = -1;
  std::string name;

  Var fwd(PassCtx<R>& ctx, Var input) const {
    Var prev = ctx.neuron_state[static_cast<size_t>(id)];
    auto esn = esn_step(ctx.tape, input, prev, ctx.neuron, ctx.surrogate_k, ctx.mode,
                        /*need_state=*/!ctx.last_step);
    ctx.neuron_state[static_cast<size_t>(id)] = esn.u_new;
    if (ctx.rec && ctx.mode == SpikeMode::hard) {
      auto& stat = ctx.rec->neurons[static_cast<size_t>(id)];
      const Tensor<R>& s = ctx.tape.val(esn.spikes);
      int64_t ones = 0;
      bool binary = true;
      for (int64_t i = 0; i < s.numel(); ++i) {
        if (s[i] == R(1))
          ++ones;
        else if (s[i] != R(0))
          binary = false;
      }
      stat.ones += ones;
      stat.total += s.numel();
      stat.binary = stat.binary && binary;
    }
    return esn.spikes;
  }
};

template <typename R>
EsnLayer<R> make_esn(NetBuilder<R>& b, const std::string& name, int level = 0) {
  EsnLayer<R> l;
  l.name = name;
  l.id = static_cast<int>(b.neuron_names.size());
  b.neuron_names.push_back(name);
  LayerRecord r;
  r.name = name;
  r.kind = LayerKind::esn;
  r.level_in = r.level_out = level;
  b.graph.layers.push_back(std::move(r));
  return l;
}

inline void emit_marker(LayerGraph& g, const std::string& name, LayerKind kind, int c, int level,
                        std::vector<std::string> rate_keys = {}) {
  LayerRecord r;
  r.name = name;
  r.kind = kind;
  r.cin = r.cout = c;
  r.level_in = r.level_out = level;
  r.domain = kind == LayerKind::sdmsa ? Domain::spike : Domain::untagged;
  r.rate_keys = std::move(rate_keys);
  g.layers.push_back(std::move(r));
}

// ---------------------------------------------------------------------------
// channel attention: GAP -> linear C->C/r -> ESN -> linear C/r->C -> sigmoid,
// gates scale the membrane ahead of the next neuron
// ---------------------------------------------------------------------------

template <typename R>
struct ChannelAttention {
  int channels = 0, reduction = 4;
  LinearLayer<R> fc1, fc2;
  EsnLayer<R> sn;

  Var gate(PassCtx<R>& ctx, Var x) const {
    Var g = global_avg_pool(ctx.tape, x);
    g = fc1.fwd(ctx, g);
    g = sn.fwd(ctx, g);
    g = fc2.fwd(ctx, g);
    return sigmoid_op(ctx.tape, g);
  }

  Var fwd(PassCtx<R>& ctx, Var x) const { return mul_channel_gate(ctx.tape, x, gate(ctx, x)); }
};

template <typename R>
ChannelAttention<R> make_channel_attention(NetBuilder<R>& b, const std::string& name, int c,
                                           int reduction, int level) {
  require_arg(reduction >= 1 && c % reduction == 0,
              "channel attention: channels must be divisible by the reduction");
  ChannelAttention<R> ca;
  ca.channels = c;
  ca.reduction = reduction;
  emit_marker(b.graph, name + ".gap", LayerKind::gap, c, level);
  ca.fc1 = make_linear(b, name + ".fc1", c, c / reduction, LayerKind::linear_ca, Domain::real,
                       level, {});
  ca.sn = make_esn(b, name + ".sn", level);
  ca.fc2 = make_linear(b, name + ".fc2", c / reduction, c, LayerKind::linear_ca, Domain::spike,
                       level, {name + ".sn"});
  emit_marker(b.graph, name + ".gate", LayerKind::ca_gate, c, level);
  return ca;
}

// ---------------------------------------------------------------------------
// RepConv: 3x3 + 1x1 + identity branches, each BN'd, summed; folds into a
// single 3x3 kernel plus bias for inference
// ---------------------------------------------------------------------------

template <typename R>
struct RepConv {
  int channels_in = 0, channels_out = 0;
  bool has_identity = false;
  ConvLayer<R> c3, c1;
  BnLayer<R> bn3, bn1, bn_id;
  std::shared_ptr<Tensor<R>> folded_w, folded_b;
  bool folded_ready = false;

  Var fwd(PassCtx<R>& ctx, Var x) const {
    if (ctx.folded) {
      if (!folded_ready) throw StateError("repconv: fold() has not been computed");
      Conv2dGeom g;
      g.pad_h = g.pad_w = 1;
      Var y = conv2d(ctx.tape, x, ctx.tape.leaf(folded_w), g);
      return add_channel_bias(ctx.tape, y, ctx.tape.leaf(folded_b));
    }
    Var y3 = bn3.fwd(ctx, c3.fwd(ctx, x));
    Var y1 = bn1.fwd(ctx, c1.fwd(ctx, x));
    Var y = add(ctx.tape, y3, y1);
    if (has_identity) y = add(ctx.tape, y, bn_id.fwd(ctx, x));
    return y;
  }

  void fold(ParamStore<R>& store) {
    const R eps = R(1e-5);
    folded_w = std::make_shared<Tensor<R>>(
        std::vector<int>{channels_out, channels_in, 3, 3});
    folded_b = std::make_shared<Tensor<R>>(std::vector<int>{channels_out});
    auto fuse = [&](const Tensor<R>& kernel, const BnLayer<R>& bn, int kh, int kw) {
      const Tensor<R>& gamma = *store[bn.gamma_id].value;
      const Tensor<R>& beta = *store[bn.beta_id].value;
      const Tensor<R>& rm = *store[bn.rm_id].value;
      const Tensor<R>& rv = *store[bn.rv_id].value;
      const int off = (3 - kh) / 2;  // center smaller kernels inside 3x3
      for (int o = 0; o < channels_out; ++o) {
        const R s = gamma[o] / std::sqrt(rv[o] + eps);
        for (int i = 0; i < channels_in; ++i)
          for (int a = 0; a < kh; ++a)
            for (int bb = 0; bb < kw; ++bb)
              folded_w->at4(o, i, a + off, bb + off) += s * kernel.at4(o, i, a, bb);
        (*folded_b)[o] += beta[o] - rm[o] * s;
      }
    };
    fuse(*store[c3.w_id].value, bn3, 3, 3);
    fuse(*store[c1.w_id].value, bn1, 1, 1);
    if (has_identity) {
      Tensor<R> eye({channels_out, channels_in, 1, 1});
      for (int c = 0; c < channels_out; ++c) eye.at4(c, c, 0, 0) = R(1);
      fuse(eye, bn_id, 1, 1);
    }
    folded_ready = true;
  }
};

template <typename R>
RepConv<R> make_repconv(NetBuilder<R>& b, const std::string& name, int cin, int cout, int level,
                        const std::vector<std::string>& rate_keys) {
  RepConv<R> rc;
  rc.channels_in = cin;
  rc.channels_out = cout;
  rc.has_identity = cin == cout;
  rc.c3 = make_conv(b, name + ".k3", cin, cout, 3, 3, Conv2dGeom{1, 1, 1, 1, 1, 1}, Domain::spike,
                    level, level, rate_keys, /*emit_record=*/false);
  rc.bn3 = make_bn(b, name + ".k3_bn", cout, level, false);
  rc.c1 = make_conv(b, name + ".k1", cin, cout, 1, 1, Conv2dGeom{}, Domain::spike, level, level,
                    rate_keys, false);
  rc.bn1 = make_bn(b, name + ".k1_bn", cout, level, false);
  int64_t params = static_cast<int64_t>(cout) * cin * 9 + static_cast<int64_t>(cout) * cin +
                   4LL * cout;
  if (rc.has_identity) {
    rc.bn_id = make_bn(b, name + ".id_bn", cout, level, false);
    params += 2LL * cout;
  }
  // one record for the folded-equivalent 3x3 conv; params reflect the stored
  // training-form tensors
  LayerRecord r;
  r.name = name;
  r.kind = LayerKind::conv;
  r.domain = Domain::spike;
  r.cin = cin;
  r.cout = cout;
  r.kh = r.kw = 3;
  r.level_in = r.level_out = level;
  r.params = params;
  r.rate_keys = rate_keys;
  b.graph.layers.push_back(std::move(r));
  return rc;
}

// ---------------------------------------------------------------------------
// Spike-LD: bottleneck with decomposed, dilated and depthwise branches plus
// channel attention and a membrane shortcut
// ---------------------------------------------------------------------------

struct SpikeLDConfig {
  int in_channels = 0;
  int internal = 0;
  int dilation = 1;
  int reduction = 4;

  void validate() const {
    require_arg(in_channels > 0 && internal > 0, "spike-ld: channel extents must be positive");
    require_arg(internal < in_channels, "spike-ld: internal width must stay below in_channels");
    require_arg(dilation >= 1, "spike-ld: dilation must be >= 1");
  }
};

template <typename R>
struct SpikeLD {
  SpikeLDConfig cfg;
  ShortcutKind kind = ShortcutKind::ms;
  EsnLayer<R> in_sn;
  ConvLayer<R> compress;
  BnLayer<R> compress_bn;
  EsnLayer<R> sn1;
  ConvLayer<R> dec_a, dec_b;
  BnLayer<R> dec_bn;
  EsnLayer<R> sn2;
  ConvLayer<R> dw, dw_dil, dw_dec_a, dw_dec_b;
  BnLayer<R> branch_bn;
  ChannelAttention<R> ca;
  EsnLayer<R> sn3;
  ConvLayer<R> expand;
  BnLayer<R> expand_bn;
  EsnLayer<R> out_sn;  // SEW wiring only

  Var fwd(PassCtx<R>& ctx, Var m_in) const {
    require_arg(ctx.tape.val(m_in).dim(1) == cfg.in_channels, "spike-ld: channel mismatch");
    Var s0 = in_sn.fwd(ctx, m_in);
    Var h = compress_bn.fwd(ctx, compress.fwd(ctx, s0));
    Var s1 = sn1.fwd(ctx, h);
    h = dec_bn.fwd(ctx, dec_b.fwd(ctx, dec_a.fwd(ctx, s1)));
    Var s2 = sn2.fwd(ctx, h);
    Var branches = add(ctx.tape, dw.fwd(ctx, s2), dw_dil.fwd(ctx, s2));
    branches = add(ctx.tape, branches, dw_dec_b.fwd(ctx, dw_dec_a.fwd(ctx, s2)));
    Var b = branch_bn.fwd(ctx, branches);
    Var gated = ca.fwd(ctx, b);
    Var s3 = sn3.fwd(ctx, gated);
    Var trunk = expand_bn.fwd(ctx, expand.fwd(ctx, s3));
    switch (kind) {
      case ShortcutKind::ms:
        return shortcut(ctx.tape, kind, trunk, m_in);
      case ShortcutKind::vs:
        return shortcut(ctx.tape, kind, trunk, s0);
      default:
        return shortcut(ctx.tape, kind, out_sn.fwd(ctx, trunk), s0);
    }
  }
};

template <typename R>
SpikeLD<R> make_spike_ld(NetBuilder<R>& b, const std::string& n, const SpikeLDConfig& cfg,
                         ShortcutKind kind, int level) {
  cfg.validate();
  SpikeLD<R> ld;
  ld.cfg = cfg;
  ld.kind = kind;
  const int ci = cfg.internal;
  const int d = cfg.dilation;
  ld.in_sn = make_esn(b, n + ".in_sn", level);
  ld.compress = make_conv(b, n + ".compress", cfg.in_channels, ci, 1, 1, Conv2dGeom{},
                          Domain::spike, level, level, {n + ".in_sn"});
  ld.compress_bn = make_bn(b, n + ".compress_bn", ci, level);
  ld.sn1 = make_esn(b, n + ".sn1", level);
  ld.dec_a = make_conv(b, n + ".dec_a", ci, ci, 1, 3, Conv2dGeom{1, 0, 1, 1, 1, 1}, Domain::spike,
                       level, level, {n + ".sn1"});
  ld.dec_b = make_conv(b, n + ".dec_b", ci, ci, 3, 1, Conv2dGeom{1, 1, 0, 1, 1, 1}, Domain::spike,
                       level, level, {n + ".sn1"});
  ld.dec_bn = make_bn(b, n + ".dec_bn", ci, level);
  ld.sn2 = make_esn(b, n + ".sn2", level);
  ld.dw = make_conv(b, n + ".dw", ci, ci, 3, 3, Conv2dGeom{1, 1, 1, 1, 1, ci}, Domain::spike,
                    level, level, {n + ".sn2"});
  ld.dw_dil = make_conv(b, n + ".dw_dil", ci, ci, 3, 3, Conv2dGeom{1, d, d, d, d, ci},
                        Domain::spike, level, level, {n + ".sn2"});
  ld.dw_dec_a = make_conv(b, n + ".dw_dec_a", ci, ci, 1, 3, Conv2dGeom{1, 0, d, 1, d, ci},
                          Domain::spike, level, level, {n + ".sn2"});
  ld.dw_dec_b = make_conv(b, n + ".dw_dec_b", ci, ci, 3, 1, Conv2dGeom{1, d, 0, d, 1, ci},
                          Domain::spike, level, level, {n + ".sn2"});
  ld.branch_bn = make_bn(b, n + ".branch_bn", ci, level);
  ld.ca = make_channel_attention(b, n + ".ca", ci, cfg.reduction, level);
  ld.sn3 = make_esn(b, n + ".sn3", level);
  ld.expand = make_conv(b, n + ".expand", ci, cfg.in_channels, 1, 1, Conv2dGeom{}, Domain::spike,
                        level, level, {n + ".sn3"});
  ld.expand_bn = make_bn(b, n + ".expand_bn", cfg.in_channels, level);
  if (kind == ShortcutKind::sew) ld.out_sn = make_esn(b, n + ".out_sn", level);
  emit_marker(b.graph, n + ".shortcut", LayerKind::add, cfg.in_channels, level);
  return ld;
}

// Closed-form parameter count for one Spike-LD (tested against the store).
inline int64_t spike_ld_param_count(int in_channels, int internal, int reduction) {
  const int64_t ci = internal;
  int64_t n = 0;
  n += static_cast<int64_t>(in_channels) * ci + 2 * ci;  // compress 1x1 + BN
  n += ci * ci * 3 + ci * ci * 3 + 2 * ci;               // decomposed 1x3 + 3x1 + BN
  n += 9 * ci + 9 * ci;                                  // depthwise 3x3, dilated 3x3
  n += 3 * ci + 3 * ci;                                  // depthwise decomposed 1x3 + 3x1
  n += 2 * ci;                                           // branch-sum BN
  n += (ci / reduction) * ci + ci / reduction;           // CA fc1 + bias
  n += ci * (ci / reduction) + ci;                       // CA fc2 + bias
  n += ci * static_cast<int64_t>(in_channels) + 2 * in_channels;  // expand 1x1 + BN
  return n;
}

// ---------------------------------------------------------------------------
// downsampler: concat(strided conv, 2x2 max pool) -> BN; halves H and W
// ---------------------------------------------------------------------------

template <typename R>
struct Downsample {
  int cin = 0, cout = 0;
  EsnLayer<R> in_sn;
  ConvLayer<R> conv;
  BnLayer<R> bn;

  Var fwd(PassCtx<R>& ctx, Var m_in) const {
    const Tensor<R>& x = ctx.tape.val(m_in);
    require_arg(x.dim(1) == cin, "downsample: channel mismatch");
    require_arg(x.dim(2) % 2 == 0 && x.dim(3) % 2 == 0, "downsample: extents must be even");
    Var s = in_sn.fwd(ctx, m_in);
    Var c = conv.fwd(ctx, s);
    Var p = max_pool2x2(ctx.tape, s);
    return bn.fwd(ctx, concat_channels(ctx.tape, {c, p}));
  }
};

template <typename R>
Downsample<R> make_downsample(NetBuilder<R>& b, const std::string& n, int cin, int cout,
                              int level_in) {
  require_arg(cout > cin, "downsample: output channels must exceed input channels");
  Downsample<R> ds;
  ds.cin = cin;
  ds.cout = cout;
  ds.in_sn = make_esn(b, n + ".in_sn", level_in);
  ds.conv = make_conv(b, n + ".conv", cin, cout - cin, 3, 3, Conv2dGeom{2, 1, 1, 1, 1, 1},
                      Domain::spike, level_in, level_in + 1, {n + ".in_sn"});
  emit_marker(b.graph, n + ".pool", LayerKind::maxpool, cin, level_in, {n + ".in_sn"});
  ds.bn = make_bn(b, n + ".bn", cout, level_in + 1);
  return ds;
}

// ---------------------------------------------------------------------------
// SDMSA: per head, a = sum_c(Q ⊙ K) gates V per position; linear in H*W
// ---------------------------------------------------------------------------

template <typename R>
Var sdmsa(Tape<R>& t, Var q, Var k, Var v, int heads) {
  const Tensor<R>& qv = t.val(q);
  check_same_shape(qv, t.val(k), "sdmsa");
  check_same_shape(qv, t.val(v), "sdmsa");
  require_arg(qv.rank() == 4 && qv.dim(1) % heads == 0,
              "sdmsa: channels must be divisible by head count");
  require_valid(is_binary_tensor(t.val(q)) && is_binary_tensor(t.val(k)) &&
                    is_binary_tensor(t.val(v)),
                "sdmsa: Q, K, V must be binary spike tensors");
  const int ch = qv.dim(1) / heads;
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var qs = slice_channels(t, q, h * ch, (h + 1) * ch);
    Var ks = slice_channels(t, k, h * ch, (h + 1) * ch);
    Var vs = slice_channels(t, v, h * ch, (h + 1) * ch);
    Var att = sum_over_channels(t, hadamard(t, qs, ks));
    outs.push_back(mul_spatial_map(t, vs, att));
  }
  return outs.size() == 1 ? outs[0] : concat_channels(t, outs);
}

// ---------------------------------------------------------------------------
// STB: SDMSA branch and two-layer MLP, both behind membrane shortcuts
// ---------------------------------------------------------------------------

struct StbConfig {
  int channels = 0;
  int heads = 4;
  int mlp_ratio = 4;

  void validate() const {
    require_arg(channels > 0 && heads > 0 && channels % heads == 0,
                "stb: channels must be divisible by heads");
    require_arg(mlp_ratio >= 1, "stb: mlp ratio must be >= 1");
  }
};

template <typename R>
struct Stb {
  StbConfig cfg;
  ShortcutKind kind = ShortcutKind::ms;
  EsnLayer<R> att_sn;
  RepConv<R> rc_q, rc_k, rc_v;
  EsnLayer<R> sn_q, sn_k, sn_v;
  RepConv<R> rc_o;
  EsnLayer<R> att_out_sn;  // SEW only
  EsnLayer<R> mlp_sn1;
  ConvLayer<R> mlp1;
  BnLayer<R> mlp1_bn;
  EsnLayer<R> mlp_sn2;
  ConvLayer<R> mlp2;
  BnLayer<R> mlp2_bn;
  EsnLayer<R> mlp_out_sn;  // SEW only

  Var fwd(PassCtx<R>& ctx, Var m) const {
    require_arg(ctx.tape.val(m).dim(1) == cfg.channels, "stb: channel mismatch");
    Var sa = att_sn.fwd(ctx, m);
    Var q = sn_q.fwd(ctx, rc_q.fwd(ctx, sa));
    Var k = sn_k.fwd(ctx, rc_k.fwd(ctx, sa));
    Var v = sn_v.fwd(ctx, rc_v.fwd(ctx, sa));
    Var att = rc_o.fwd(ctx, sdmsa(ctx.tape, q, k, v, cfg.heads));
    Var m1;
    switch (kind) {
      case ShortcutKind::ms: m1 = shortcut(ctx.tape, kind, att, m); break;
      case ShortcutKind::vs: m1 = shortcut(ctx.tape, kind, att, sa); break;
      default: m1 = shortcut(ctx.tape, kind, att_out_sn.fwd(ctx, att), sa); break;
    }
    Var s1 = mlp_sn1.fwd(ctx, m1);
    Var h = mlp1_bn.fwd(ctx, mlp1.fwd(ctx, s1));
    Var s2 = mlp_sn2.fwd(ctx, h);
    Var h2 = mlp2_bn.fwd(ctx, mlp2.fwd(ctx, s2));
    switch (kind) {
      case ShortcutKind::ms: return shortcut(ctx.tape, kind, h2, m1);
      case ShortcutKind::vs: return shortcut(ctx.tape, kind, h2, s1);
      default: return shortcut(ctx.tape, kind, mlp_out_sn.fwd(ctx, h2), s1);
    }
  }

  void fold(ParamStore<R>& store) {
    rc_q.fold(store);
    rc_k.fold(store);
    rc_v.fold(store);
    rc_o.fold(store);
  }
};

template <typename R>
Stb<R> make_stb(NetBuilder<R>& b, const std::string& n, const StbConfig& cfg, ShortcutKind kind,
                int level) {
  cfg.validate();
  Stb<R> stb;
  stb.cfg = cfg;
  stb.kind = kind;
  const int c = cfg.channels;
  stb.att_sn = make_esn(b, n + ".att_sn", level);
  stb.rc_q = make_repconv(b, n + ".rc_q", c, c, level, {n + ".att_sn"});
  stb.sn_q = make_esn(b, n + ".sn_q", level);
  stb.rc_k = make_repconv(b, n + ".rc_k", c, c, level, {n + ".att_sn"});
  stb.sn_k = make_esn(b, n + ".sn_k", level);
  stb.rc_v = make_repconv(b, n + ".rc_v", c, c, level, {n + ".att_sn"});
  stb.sn_v = make_esn(b, n + ".sn_v", level);
  emit_marker(b.graph, n + ".sdmsa", LayerKind::sdmsa, c, level,
              {n + ".sn_q", n + ".sn_k", n + ".sn_v"});
  stb.rc_o = make_repconv(b, n + ".rc_o", c, c, level, {n + ".sn_v"});
  if (kind == ShortcutKind::sew) stb.att_out_sn = make_esn(b, n + ".att_out_sn", level);
  emit_marker(b.graph, n + ".shortcut1", LayerKind::add, c, level);
  stb.mlp_sn1 = make_esn(b, n + ".mlp_sn1", level);
  stb.mlp1 = make_conv(b, n + ".mlp1", c, c * cfg.mlp_ratio, 1, 1, Conv2dGeom{}, Domain::spike,
                       level, level, {n + ".mlp_sn1"});
  stb.mlp1_bn = make_bn(b, n + ".mlp1_bn", c * cfg.mlp_ratio, level);
  stb.mlp_sn2 = make_esn(b, n + ".mlp_sn2", level);
  stb.mlp2 = make_conv(b, n + ".mlp2", c * cfg.mlp_ratio, c, 1, 1, Conv2dGeom{}, Domain::spike,
                       level, level, {n + ".mlp_sn2"});
  stb.mlp2_bn = make_bn(b, n + ".mlp2_bn", c, level);
  if (kind == ShortcutKind::sew) stb.mlp_out_sn = make_esn(b, n + ".mlp_out_sn", level);
  emit_marker(b.graph, n + ".shortcut2", LayerKind::add, c, level);
  return stb;
}

// ---------------------------------------------------------------------------
// feature enhancement on encoder skips: ESN -> DW 3x3 -> PW 1x1 -> BN, gated
// by channel attention; projects the skip onto the decoder width
// ---------------------------------------------------------------------------

template <typename R>
struct FeatureEnhance {
  int cin = 0, cout = 0;
  bool minimal = false;  // ablation: bare ESN -> 1x1 -> BN projector
  EsnLayer<R> in_sn;
  ConvLayer<R> dw, pw;
  BnLayer<R> bn;
  ChannelAttention<R> ca;

  Var fwd(PassCtx<R>& ctx, Var skip) const {
    require_arg(ctx.tape.val(skip).dim(1) == cin, "feature_enhance: skip width mismatch");
    Var s = in_sn.fwd(ctx, skip);
    Var h = minimal ? pw.fwd(ctx, s) : pw.fwd(ctx, dw.fwd(ctx, s));
    h = bn.fwd(ctx, h);
    return minimal ? h : ca.fwd(ctx, h);
  }
};

template <typename R>
FeatureEnhance<R> make_feature_enhance(NetBuilder<R>& b, const std::string& n, int cin, int cout,
                                       int reduction, bool minimal, int level) {
  FeatureEnhance<R> fe;
  fe.cin = cin;
  fe.cout = cout;
  fe.minimal = minimal;
  fe.in_sn = make_esn(b, n + ".in_sn", level);
  if (!minimal)
    fe.dw = make_conv(b, n + ".dw", cin, cin, 3, 3, Conv2dGeom{1, 1, 1, 1, 1, cin}, Domain::spike,
                      level, level, {n + ".in_sn"});
  fe.pw = make_conv(b, n + ".pw", cin, cout, 1, 1, Conv2dGeom{}, Domain::spike, level, level,
                    {n + ".in_sn"});
  fe.bn = make_bn(b, n + ".bn", cout, level);
  if (!minimal) fe.ca = make_channel_attention(b, n + ".ca", cout, reduction, level);
  return fe;
}

// ---------------------------------------------------------------------------
// segmentation head: ESN -> 3x3 conv -> BN -> ESN -> 1x1 conv to logits
// ---------------------------------------------------------------------------

template <typename R>
struct SegHead {
  EsnLayer<R> in_sn;
  ConvLayer<R> conv;
  BnLayer<R> bn;
  EsnLayer<R> sn;
  ConvLayer<R> logits;
  int bias_id = -1;

  Var fwd(PassCtx<R>& ctx, Var f) const {
    Var s = in_sn.fwd(ctx, f);
    Var h = bn.fwd(ctx, conv.fwd(ctx, s));
    Var s2 = sn.fwd(ctx, h);
    Var y = logits.fwd(ctx, s2);
    return add_channel_bias(ctx.tape, y, ctx.store.var(ctx.tape, bias_id));
  }
};

template <typename R>
SegHead<R> make_seg_head(NetBuilder<R>& b, const std::string& n, int c, int classes, int level) {
  SegHead<R> head;
  head.in_sn = make_esn(b, n + ".in_sn", level);
  head.conv = make_conv(b, n + ".conv", c, c, 3, 3, Conv2dGeom{1, 1, 1, 1, 1, 1}, Domain::spike,
                        level, level, {n + ".in_sn"});
  head.bn = make_bn(b, n + ".bn", c, level);
  head.sn = make_esn(b, n + ".sn", level);
  head.logits = make_conv(b, n + ".logits", c, classes, 1, 1, Conv2dGeom{}, Domain::spike, level,
                          level, {n + ".sn"});
  head.bias_id = b.store.add(n + ".logits.b", Tensor<R>::zeros({classes}));
  b.graph.layers.back().params += classes;
  return head;
}

}  // namespace sltnet

#endif  // SLTNET_BLOCKS_HPP
