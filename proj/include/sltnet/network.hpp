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
#ifndef SLTNET_NETWORK_HPP
#define SLTNET_NETWORK_HPP

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "sltnet/blocks.hpp"

namespace sltnet {

// Four encoder stages (three SCB stages of downsample + 3 Spike-LD, then two
// STBs on channels narrowed to C), a three-stage decoder with FE-enhanced
// skips, and two segmentation heads.
struct NetworkConfig {
  int base_channels = 24;  // C; stage plan is C, 2C, 4C, 8C
  int input_bins = 5;      // K
  int num_classes = 6;
  int time_steps = 1;
  int ca_reduction = 4;
  int stb_heads = 4;
  int stb_mlp_ratio = 4;
  std::array<int, 3> dilations_stage1{1, 2, 5};
  std::array<int, 3> dilations_stage2{1, 2, 5};
  std::array<int, 3> dilations_stage3{2, 5, 9};
  std::array<int, 3> dilations_decoder{1, 1, 1};
  ShortcutKind shortcut = ShortcutKind::ms;
  bool enable_fe = true;
  bool enable_stb = true;
  bool enable_skip_fusion = true;
  double tau = 0.25;
  double u_th = 1.0;
  double u_reset = 0.0;
  double k_min = 1.0;
  double k_max = 10.0;

  void validate() const {
    if (base_channels < 8) throw ConfigError("network: base_channels must be at least 8");
    if (base_channels % ca_reduction != 0)
      throw ConfigError("network: base_channels must be divisible by ca_reduction");
    if (base_channels % stb_heads != 0)
      throw ConfigError("network: base_channels must be divisible by stb_heads");
    if (input_bins < 1) throw ConfigError("network: input_bins must be positive");
    if (num_classes < 2) throw ConfigError("network: need at least two classes");
    if (time_steps < 1) throw ConfigError("network: time_steps must be >= 1");
    for (auto& d : {dilations_stage1, dilations_stage2, dilations_stage3, dilations_decoder})
      for (int x : d)
        if (x < 1) throw ConfigError("network: dilation rates must be >= 1");
  }

  // Bottleneck width: C/4 rounded up to the CA reduction, kept below C.
  int internal_width(int c) const {
    int v = ((c / 4 + ca_reduction - 1) / ca_reduction) * ca_reduction;
    v = std::max(v, ca_reduction);
    if (v >= c) v = ca_reduction;
    return v;
  }
};

template <typename R>
struct ForwardOptions {
  bool training = false;
  bool update_bn = false;
  R surrogate_k = R(1);
  SpikeMode mode = SpikeMode::hard;
  bool folded = false;
};

struct ForwardOut {
  Var p1;  // logits at input resolution
  Var p2;  // logits at the early (H/4) resolution
};

template <typename R>
class Network {
 public:
  Network(const NetworkConfig& config, uint64_t seed) : cfg(config) {
    cfg.validate();
    NetBuilder<R> b{store, graph, neuron_names, Rng(seed)};
    const int c = cfg.base_channels;
    const int r = cfg.ca_reduction;

    // initial block: three 3x3 conv stages at full resolution
    init_conv1 = make_conv(b, "init.conv1", cfg.input_bins, c, 3, 3, Conv2dGeom{1, 1, 1, 1, 1, 1},
                           Domain::real, 0, 0, {});
    init_bn1 = make_bn(b, "init.bn1", c, 0);
    init_sn1 = make_esn(b, "init.sn1", 0);
    init_conv2 = make_conv(b, "init.conv2", c, c, 3, 3, Conv2dGeom{1, 1, 1, 1, 1, 1},
                           Domain::spike, 0, 0, {"init.sn1"});
    init_bn2 = make_bn(b, "init.bn2", c, 0);
    init_sn2 = make_esn(b, "init.sn2", 0);
    init_conv3 = make_conv(b, "init.conv3", c, c, 3, 3, Conv2dGeom{1, 1, 1, 1, 1, 1},
                           Domain::spike, 0, 0, {"init.sn2"});
    init_bn3 = make_bn(b, "init.bn3", c, 0);

    const std::array<int, 4> widths{c, 2 * c, 4 * c, 8 * c};
    const std::array<std::array<int, 3>, 3> dils{cfg.dilations_stage1, cfg.dilations_stage2,
                                                 cfg.dilations_stage3};
    for (int s = 0; s < 3; ++s) {
      const std::string sn = "enc" + std::to_string(s + 1);
      downsamplers[s] = make_downsample(b, sn + ".down", widths[s], widths[s + 1], s);
      for (int i = 0; i < 3; ++i) {
        SpikeLDConfig lc;
        lc.in_channels = widths[s + 1];
        lc.internal = cfg.internal_width(widths[s + 1]);
        lc.dilation = dils[s][i];
        lc.reduction = r;
        stage_lds[s][i] =
            make_spike_ld(b, sn + ".ld" + std::to_string(i), lc, cfg.shortcut, s + 1);
      }
    }

    narrow_sn = make_esn(b, "narrow.in_sn", 3);
    narrow_conv = make_conv(b, "narrow.conv", 8 * c, c, 1, 1, Conv2dGeom{}, Domain::spike, 3, 3,
                            {"narrow.in_sn"});
    narrow_bn = make_bn(b, "narrow.bn", c, 3);

    if (cfg.enable_stb) {
      StbConfig sc;
      sc.channels = c;
      sc.heads = cfg.stb_heads;
      sc.mlp_ratio = cfg.stb_mlp_ratio;
      for (int i = 0; i < 2; ++i)
        stbs.push_back(make_stb(b, "stage4.stb" + std::to_string(i), sc, cfg.shortcut, 3));
    } else {
      // ablation: a fully convolutional stage 4
      for (int i = 0; i < 3; ++i) {
        SpikeLDConfig lc;
        lc.in_channels = c;
        lc.internal = cfg.internal_width(c);
        lc.dilation = cfg.dilations_stage3[static_cast<size_t>(i)];
        lc.reduction = r;
        stage4_lds.push_back(
            make_spike_ld(b, "stage4.ld" + std::to_string(i), lc, cfg.shortcut, 3));
      }
    }

    // decoder: skips from stage 3, 2, 1 fused at levels 3, 2, 1
    for (int d = 0; d < 3; ++d) {
      const std::string dn = "dec" + std::to_string(d + 1);
      const int level = 3 - d;
      const int skip_c = widths[static_cast<size_t>(3 - d)];
      Decoder& dec = decoder[d];
      if (cfg.enable_skip_fusion) {
        dec.fe = make_feature_enhance(b, dn + ".fe", skip_c, c, r, !cfg.enable_fe, level);
        emit_marker(b.graph, dn + ".fuse", LayerKind::add, c, level);
      }
      SpikeLDConfig lc;
      lc.in_channels = c;
      lc.internal = cfg.internal_width(c);
      lc.dilation = cfg.dilations_decoder[static_cast<size_t>(d)];
      lc.reduction = r;
      dec.ld = make_spike_ld(b, dn + ".ld", lc, cfg.shortcut, level);
      dec.up_sn = make_esn(b, dn + ".up_sn", level);
      dec.up = make_conv_transpose(b, dn + ".up", c, c, 4, 2, 1, level, {dn + ".up_sn"});
      dec.up_bn = make_bn(b, dn + ".up_bn", c, level - 1);
    }

    head_p1 = make_seg_head(b, "head_p1", c, cfg.num_classes, 0);
    head_p2 = make_seg_head(b, "head_p2", c, cfg.num_classes, 2);
  }

  // steps: one (N, K, H, W) tensor per time step; H, W divisible by 8.
  ForwardOut forward(Tape<R>& tape, const std::vector<std::shared_ptr<Tensor<R>>>& steps,
                     const ForwardOptions<R>& opt, ActivationRecord* rec = nullptr) {
    require_arg(!steps.empty(), "forward: need at least one time step");
    for (const auto& s : steps) {
      require_arg(s->rank() == 4 && s->dim(1) == cfg.input_bins,
                  "forward: step tensors must be (N, K, H, W) with K = input_bins");
      require_arg(s->dim(2) % 8 == 0 && s->dim(3) % 8 == 0,
                  "forward: spatial extents must be divisible by 8");
    }

    std::vector<Var> state(neuron_names.size());
    NeuronConfig<R> ncfg;
    ncfg.tau = static_cast<R>(cfg.tau);
    ncfg.u_th = static_cast<R>(cfg.u_th);
    ncfg.u_reset = static_cast<R>(cfg.u_reset);
    ncfg.time_steps = static_cast<int>(steps.size());

    Var p1_acc, p2_acc;
    for (size_t t = 0; t < steps.size(); ++t) {
      PassCtx<R> ctx{tape,
                     store,
                     state,
                     ncfg,
                     opt.surrogate_k,
                     opt.mode,
                     opt.training,
                     opt.update_bn,
                     opt.folded,
                     t + 1 == steps.size(),
                     rec};
      ForwardOut step_out = forward_step(ctx, tape.leaf(steps[t]));
      p1_acc = p1_acc.valid() ? add(tape, p1_acc, step_out.p1) : step_out.p1;
      p2_acc = p2_acc.valid() ? add(tape, p2_acc, step_out.p2) : step_out.p2;
    }
    if (steps.size() > 1) {
      const R inv = R(1) / static_cast<R>(steps.size());
      p1_acc = scale(tape, p1_acc, inv);
      p2_acc = scale(tape, p2_acc, inv);
    }
    return {p1_acc, p2_acc};
  }

  ActivationRecord make_record(bool record_shapes = false) const {
    ActivationRecord rec;
    rec.record_shapes = record_shapes;
    for (const auto& n : neuron_names) rec.neurons.push_back({n, 0, 0, true});
    return rec;
  }

  void fold_repconvs() {
    for (auto& stb : stbs) stb.fold(store);
    folded_available = true;
  }

  NetworkConfig cfg;
  ParamStore<R> store;
  LayerGraph graph;
  std::vector<std::string> neuron_names;
  bool folded_available = false;

 private:
  struct Decoder {
    FeatureEnhance<R> fe;
    SpikeLD<R> ld;
    EsnLayer<R> up_sn;
    ConvTransposeLayer<R> up;
    BnLayer<R> up_bn;
  };

  ForwardOut forward_step(PassCtx<R>& ctx, Var x) {
    Tape<R>& t = ctx.tape;
    Var m = init_bn1.fwd(ctx, init_conv1.fwd(ctx, x));
    m = init_bn2.fwd(ctx, init_conv2.fwd(ctx, init_sn1.fwd(ctx, m)));
    m = init_bn3.fwd(ctx, init_conv3.fwd(ctx, init_sn2.fwd(ctx, m)));
    ctx.note_shape("init.out", t.val(m));

    std::array<Var, 3> skips;
    for (int s = 0; s < 3; ++s) {
      m = downsamplers[static_cast<size_t>(s)].fwd(ctx, m);
      for (int i = 0; i < 3; ++i) m = stage_lds[static_cast<size_t>(s)][static_cast<size_t>(i)].fwd(ctx, m);
      skips[static_cast<size_t>(s)] = m;
      ctx.note_shape("enc" + std::to_string(s + 1) + ".out", t.val(m));
    }

    m = narrow_bn.fwd(ctx, narrow_conv.fwd(ctx, narrow_sn.fwd(ctx, m)));
    ctx.note_shape("narrow.out", t.val(m));

    if (cfg.enable_stb)
      for (auto& stb : stbs) m = stb.fwd(ctx, m);
    else
      for (auto& ld : stage4_lds) m = ld.fwd(ctx, m);
    ctx.note_shape("stage4.out", t.val(m));

    Var f2;
    for (int d = 0; d < 3; ++d) {
      Decoder& dec = decoder[static_cast<size_t>(d)];
      if (cfg.enable_skip_fusion)
        m = add(t, m, dec.fe.fwd(ctx, skips[static_cast<size_t>(2 - d)]));
      m = dec.ld.fwd(ctx, m);
      if (d == 1) f2 = m;  // second-to-last Spike-LD feeds the early head
      m = dec.up_bn.fwd(ctx, dec.up.fwd(ctx, dec.up_sn.fwd(ctx, m)));
      ctx.note_shape("dec" + std::to_string(d + 1) + ".out", t.val(m));
    }

    ForwardOut out;
    out.p1 = head_p1.fwd(ctx, m);
    out.p2 = head_p2.fwd(ctx, f2);
    ctx.note_shape("p1", t.val(out.p1));
    ctx.note_shape("p2", t.val(out.p2));
    return out;
  }

  ConvLayer<R> init_conv1, init_conv2, init_conv3;
  BnLayer<R> init_bn1, init_bn2, init_bn3;
  EsnLayer<R> init_sn1, init_sn2;
  std::array<Downsample<R>, 3> downsamplers;
  std::array<std::array<SpikeLD<R>, 3>, 3> stage_lds;
  EsnLayer<R> narrow_sn;
  ConvLayer<R> narrow_conv;
  BnLayer<R> narrow_bn;
  std::vector<Stb<R>> stbs;
  std::vector<SpikeLD<R>> stage4_lds;
  std::array<Decoder, 3> decoder;
  SegHead<R> head_p1, head_p2;
};

// Wraps a single-sample event tensor (T, K, H, W) into per-step batch slices.
template <typename R>
std::vector<std::shared_ptr<Tensor<R>>> event_tensor_steps(const Tensor<R>& e) {
  require_arg(e.rank() == 4, "event tensor must be (T, K, H, W)");
  std::vector<std::shared_ptr<Tensor<R>>> steps;
  const int64_t slice = static_cast<int64_t>(e.dim(1)) * e.dim(2) * e.dim(3);
  for (int st = 0; st < e.dim(0); ++st) {
    auto s = std::make_shared<Tensor<R>>(std::vector<int>{1, e.dim(1), e.dim(2), e.dim(3)});
    std::copy(e.v.begin() + st * slice, e.v.begin() + (st + 1) * slice, s->v.begin());
    steps.push_back(std::move(s));
  }
  return steps;
}

}  // namespace sltnet

#endif  // SLTNET_NETWORK_HPP
