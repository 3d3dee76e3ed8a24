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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "sltnet/blocks.hpp"

using namespace sltnet;
using oracles::random_binary;
using oracles::random_tensor;

namespace {

template <typename R>
struct Harness {
  ParamStore<R> store;
  LayerGraph graph;
  std::vector<std::string> names;
  NetBuilder<R> builder;
  Tape<R> tape;
  std::vector<Var> state;

  explicit Harness(uint64_t seed = 5) : builder{store, graph, names, Rng(seed)} {}

  PassCtx<R> ctx(bool training = true) {
    state.assign(names.size(), Var{});
    return PassCtx<R>{tape,  store, state, NeuronConfig<R>{}, R(4), SpikeMode::hard,
                      training, false, false, true, nullptr};
  }

  void zero_all_trainable() {
    for (auto& e : store.entries())
      if (e.trainable) e.value->fill(R(0));
  }
};

}  // namespace

TEST_CASE("spike-ld: zeroed weights give an exact membrane identity") {
  Harness<float> h;
  SpikeLDConfig cfg{64, 16, 2, 4};
  auto ld = make_spike_ld(h.builder, "ld", cfg, ShortcutKind::ms, 0);
  h.zero_all_trainable();
  auto ctx = h.ctx();
  Rng rng(3);
  auto m = random_tensor<float>({2, 64, 8, 8}, rng);
  Var out = ld.fwd(ctx, h.tape.leaf(m));
  CHECK(h.tape.val(out).v == m.v);
}

TEST_CASE("spike-ld: stored parameter count matches the closed-form sum") {
  Harness<float> h;
  SpikeLDConfig cfg{64, 16, 2, 4};
  make_spike_ld(h.builder, "ld", cfg, ShortcutKind::ms, 0);
  int64_t stored = 0;
  for (const auto& e : h.store.entries())
    if (e.trainable) stored += e.value->numel();
  CHECK(stored == spike_ld_param_count(64, 16, 4));
  // graph records carry the same totals (BN running stats are not parameters)
  CHECK(h.graph.total_params() == stored);
}

TEST_CASE("spike-ld: all post-ESN activations stay binary") {
  Harness<float> h;
  SpikeLDConfig cfg{32, 8, 2, 4};
  auto ld = make_spike_ld(h.builder, "ld", cfg, ShortcutKind::ms, 0);
  auto ctx = h.ctx();
  ActivationRecord rec;
  for (const auto& n : h.names) rec.neurons.push_back({n, 0, 0, true});
  ctx.rec = &rec;
  Rng rng(9);
  ld.fwd(ctx, h.tape.leaf(random_tensor<float>({2, 32, 8, 8}, rng)));
  for (const auto& n : rec.neurons) {
    CHECK(n.binary);
    CHECK(n.total > 0);
  }
}

TEST_CASE("spike-ld: vs and sew shortcut wiring") {
  Rng rng(11);
  for (ShortcutKind kind : {ShortcutKind::vs, ShortcutKind::sew}) {
    Harness<float> h;
    SpikeLDConfig cfg{16, 8, 2, 4};
    auto ld = make_spike_ld(h.builder, "ld", cfg, kind, 0);
    auto ctx = h.ctx();
    auto m = random_tensor<float>({1, 16, 8, 8}, rng);
    Var out = ld.fwd(ctx, h.tape.leaf(m));
    const auto& ov = h.tape.val(out);
    if (kind == ShortcutKind::sew)
      for (float v : ov.v) CHECK((v == 0.f || v == 1.f || v == 2.f));
    CHECK(ov.shape == std::vector<int>{1, 16, 8, 8});
  }
}

TEST_CASE("channel attention: saturated gate is the identity; symmetry; reference") {
  SUBCASE("bias-saturated gate passes the membrane through") {
    Harness<float> h;
    auto ca = make_channel_attention(h.builder, "ca", 8, 4, 0);
    (*h.store[ca.fc2.b_id].value).fill(50.f);  // sigmoid -> 1
    auto ctx = h.ctx();
    Rng rng(5);
    auto x = random_tensor<float>({2, 8, 4, 4}, rng);
    Var out = ca.fwd(ctx, h.tape.leaf(x));
    for (int64_t i = 0; i < x.numel(); ++i)
      CHECK(h.tape.val(out)[i] == doctest::Approx(x[i]).epsilon(1e-5));
  }
  SUBCASE("uniform channels with uniform weights give uniform gates") {
    Harness<float> h;
    auto ca = make_channel_attention(h.builder, "ca", 8, 4, 0);
    (*h.store[ca.fc1.w_id].value).fill(0.11f);
    (*h.store[ca.fc2.w_id].value).fill(-0.07f);
    auto ctx = h.ctx();
    Tensor<float> x({1, 8, 4, 4});
    for (int c = 0; c < 8; ++c)
      for (int i = 0; i < 16; ++i) x.v[static_cast<size_t>(c) * 16 + i] = 0.3f * (i % 3);
    Var g = ca.gate(ctx, h.tape.leaf(x));
    const auto& gv = h.tape.val(g);
    for (int c = 1; c < 8; ++c) CHECK(gv[c] == gv[0]);
  }
  SUBCASE("random input equals the direct per-channel formula") {
    Harness<float> h;
    auto ca = make_channel_attention(h.builder, "ca", 8, 4, 0);
    auto ctx = h.ctx();
    Rng rng(13);
    auto x = random_tensor<float>({2, 8, 5, 5}, rng);
    Var out = ca.fwd(ctx, h.tape.leaf(x));

    // straightforward reference with plain loops
    const auto& w1 = *h.store[ca.fc1.w_id].value;
    const auto& b1 = *h.store[ca.fc1.b_id].value;
    const auto& w2 = *h.store[ca.fc2.w_id].value;
    const auto& b2 = *h.store[ca.fc2.b_id].value;
    for (int n = 0; n < 2; ++n) {
      std::vector<double> g(8, 0.0);
      for (int c = 0; c < 8; ++c) {
        double acc = 0;
        for (int i = 0; i < 25; ++i) acc += x.v[(static_cast<size_t>(n) * 8 + c) * 25 + i];
        g[static_cast<size_t>(c)] = acc / 25.0;
      }
      std::vector<double> hmid(2, 0.0);
      for (int o = 0; o < 2; ++o) {
        double acc = b1[o];
        for (int c = 0; c < 8; ++c) acc += w1.at2(o, c) * g[static_cast<size_t>(c)];
        hmid[static_cast<size_t>(o)] = acc >= 1.0 ? 1.0 : 0.0;  // hard ESN, zero state
      }
      for (int c = 0; c < 8; ++c) {
        double acc = b2[c];
        for (int o = 0; o < 2; ++o) acc += w2.at2(c, o) * hmid[static_cast<size_t>(o)];
        const double gate = 1.0 / (1.0 + std::exp(-acc));
        for (int i = 0; i < 25; ++i) {
          const float expect =
              static_cast<float>(gate) * x.v[(static_cast<size_t>(n) * 8 + c) * 25 + i];
          CHECK(h.tape.val(out).v[(static_cast<size_t>(n) * 8 + c) * 25 + i] ==
                doctest::Approx(expect).epsilon(1e-5));
        }
      }
    }
  }
  SUBCASE("reduction must divide the channel count") {
    Harness<float> h;
    CHECK_THROWS_AS(make_channel_attention(h.builder, "ca", 6, 4, 0), ArgumentError);
  }
}

TEST_CASE("downsample: geometry, pooling oracle, binarity, odd extents rejected") {
  Harness<float> h;
  auto ds = make_downsample(h.builder, "down", 16, 32, 0);
  auto ctx = h.ctx();
  Rng rng(17);
  auto m = random_tensor<float>({1, 16, 64, 64}, rng);
  Var out = ds.fwd(ctx, h.tape.leaf(m));
  CHECK(h.tape.val(out).shape == std::vector<int>{1, 32, 32, 32});

  // pooled half: recompute entry spikes and pool them with a plain loop
  NeuronConfig<float> ncfg;
  auto [spk, unused] = esn_forward(m, Tensor<float>{}, ncfg);
  (void)unused;
  Tape<float> t2;
  Var p = max_pool2x2(t2, t2.leaf(spk));
  const auto& pv = t2.val(p);
  for (int c = 0; c < 16; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        float expect = 0.f;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            expect = std::max(expect, spk.at4(0, c, 2 * y + dy, 2 * x + dx));
        CHECK(pv.at4(0, c, y, x) == expect);
        CHECK((pv.at4(0, c, y, x) == 0.f || pv.at4(0, c, y, x) == 1.f));
      }

  // trailing neuron (the next component's entry ESN) emits binary spikes
  auto [s_out, u2] = esn_forward(h.tape.val(out), Tensor<float>{}, ncfg);
  (void)u2;
  for (float v : s_out.v) CHECK((v == 0.f || v == 1.f));

  auto odd = random_tensor<float>({1, 16, 63, 64}, rng);
  auto ctx2 = h.ctx();
  CHECK_THROWS_AS(ds.fwd(ctx2, h.tape.leaf(odd)), ArgumentError);
}

TEST_CASE("repconv: fold algebra") {
  SUBCASE("zero 3x3 + zero 1x1 + identity folds to the identity kernel") {
    Harness<float> h;
    auto rc = make_repconv(h.builder, "rc", 4, 4, 0, {});
    h.store[rc.c3.w_id].value->fill(0.f);
    h.store[rc.c1.w_id].value->fill(0.f);
    rc.fold(h.store);
    for (int o = 0; o < 4; ++o)
      for (int i = 0; i < 4; ++i)
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) {
            const float expect = (o == i && a == 1 && b == 1) ? 1.f : 0.f;
            CHECK(rc.folded_w->at4(o, i, a, b) == doctest::Approx(expect).epsilon(1e-4));
          }
    for (float v : rc.folded_b->v) CHECK(std::abs(v) < 1e-6f);
  }
  SUBCASE("folded and multi-branch outputs agree in eval mode") {
    Rng rng(23);
    Harness<float> h;
    auto rc = make_repconv(h.builder, "rc", 8, 8, 0, {});
    // randomize branch BN statistics so the fold is non-trivial
    for (const BnLayer<float>* bn : {&rc.bn3, &rc.bn1, &rc.bn_id}) {
      for (auto& v : h.store[bn->gamma_id].value->v) v = static_cast<float>(rng.uniform(0.5, 1.5));
      for (auto& v : h.store[bn->beta_id].value->v) v = static_cast<float>(rng.uniform(-0.3, 0.3));
      for (auto& v : h.store[bn->rm_id].value->v) v = static_cast<float>(rng.uniform(-0.2, 0.2));
      for (auto& v : h.store[bn->rv_id].value->v) v = static_cast<float>(rng.uniform(0.5, 1.5));
    }
    rc.fold(h.store);
    for (int it = 0; it < 30; ++it) {
      auto x = random_tensor<float>({1, 8, 6, 6}, rng, 0.0, 1.0);
      auto ctx = h.ctx(false);
      Var a = rc.fwd(ctx, h.tape.leaf(x));
      ctx.folded = true;
      Var b = rc.fwd(ctx, h.tape.leaf(x));
      for (int64_t i = 0; i < h.tape.val(a).numel(); ++i)
        CHECK(std::abs(h.tape.val(a)[i] - h.tape.val(b)[i]) <= 1e-5f);
    }
  }
  SUBCASE("using the folded path before fold() is a state error") {
    Harness<float> h;
    auto rc = make_repconv(h.builder, "rc", 4, 4, 0, {});
    auto ctx = h.ctx(false);
    ctx.folded = true;
    Rng rng(3);
    auto x = random_tensor<float>({1, 4, 4, 4}, rng);
    CHECK_THROWS_AS(rc.fwd(ctx, h.tape.leaf(x)), StateError);
  }
}

TEST_CASE("sdmsa: saturation, annihilation, brute-force oracle, validation") {
  Tape<float> t;
  SUBCASE("all-ones with 4 channels per head saturates at 4") {
    Var q = t.leaf(Tensor<float>::full({1, 4, 3, 3}, 1.f));
    Var out = sdmsa(t, q, q, q, 1);
    for (float v : t.val(out).v) CHECK(v == 4.f);
  }
  SUBCASE("zero query annihilates the output") {
    Var q = t.leaf(Tensor<float>::zeros({1, 4, 3, 3}));
    Var kv = t.leaf(Tensor<float>::full({1, 4, 3, 3}, 1.f));
    Var out = sdmsa(t, q, kv, kv, 2);
    for (float v : t.val(out).v) CHECK(v == 0.f);
  }
  SUBCASE("random binary tensors equal the double-loop evaluation exactly") {
    Rng rng(31);
    const int c = 8, hh = 4, ww = 4, heads = 2, chead = c / heads;
    for (int it = 0; it < 20; ++it) {
      auto q = random_binary<float>({1, c, hh, ww}, rng);
      auto k = random_binary<float>({1, c, hh, ww}, rng);
      auto v = random_binary<float>({1, c, hh, ww}, rng);
      Var out = sdmsa(t, t.leaf(q), t.leaf(k), t.leaf(v), heads);
      for (int head = 0; head < heads; ++head)
        for (int y = 0; y < hh; ++y)
          for (int x = 0; x < ww; ++x) {
            int att = 0;
            for (int ci = 0; ci < chead; ++ci)
              att += static_cast<int>(q.at4(0, head * chead + ci, y, x)) *
                     static_cast<int>(k.at4(0, head * chead + ci, y, x));
            CHECK(att >= 0);
            CHECK(att <= chead);
            for (int ci = 0; ci < chead; ++ci) {
              const float expect =
                  static_cast<float>(att) * v.at4(0, head * chead + ci, y, x);
              CHECK(t.val(out).at4(0, head * chead + ci, y, x) == expect);
            }
          }
    }
  }
  SUBCASE("non-binary inputs are rejected") {
    Var q = t.leaf(Tensor<float>::full({1, 4, 2, 2}, 0.5f));
    Var b = t.leaf(Tensor<float>::full({1, 4, 2, 2}, 1.f));
    CHECK_THROWS_AS(sdmsa(t, q, b, b, 1), ValidationError);
  }
}

TEST_CASE("stb: zeroed weights give an exact double membrane identity") {
  Harness<float> h;
  StbConfig cfg{16, 4, 4};
  auto stb = make_stb(h.builder, "stb", cfg, ShortcutKind::ms, 0);
  h.zero_all_trainable();
  auto ctx = h.ctx();
  Rng rng(37);
  auto m = random_tensor<float>({2, 16, 4, 4}, rng);
  Var out = stb.fwd(ctx, h.tape.leaf(m));
  CHECK(h.tape.val(out).v == m.v);
}

TEST_CASE("stb: binary activations at every SN output") {
  Harness<float> h;
  StbConfig cfg{16, 4, 2};
  auto stb = make_stb(h.builder, "stb", cfg, ShortcutKind::ms, 0);
  auto ctx = h.ctx();
  ActivationRecord rec;
  for (const auto& n : h.names) rec.neurons.push_back({n, 0, 0, true});
  ctx.rec = &rec;
  Rng rng(41);
  stb.fwd(ctx, h.tape.leaf(random_tensor<float>({1, 16, 6, 6}, rng)));
  for (const auto& n : rec.neurons) CHECK(n.binary);
}

TEST_CASE("feature enhance: zero skip, projection geometry, minimal variant") {
  Harness<float> h;
  auto fe = make_feature_enhance(h.builder, "fe", 64, 16, 4, false, 0);
  auto ctx = h.ctx();
  Var out = fe.fwd(ctx, h.tape.leaf(Tensor<float>::zeros({2, 64, 8, 8})));
  CHECK(h.tape.val(out).shape == std::vector<int>{2, 16, 8, 8});
  for (float v : h.tape.val(out).v) CHECK(v == 0.f);

  Harness<float> h2;
  auto fe_min = make_feature_enhance(h2.builder, "fe", 64, 16, 4, true, 0);
  auto ctx2 = h2.ctx();
  Rng rng(43);
  Var out2 = fe_min.fwd(ctx2, h2.tape.leaf(random_tensor<float>({1, 64, 8, 8}, rng)));
  CHECK(h2.tape.val(out2).shape == std::vector<int>{1, 16, 8, 8});
  // the minimal projector carries no DW kernel and no channel attention
  for (const auto& e : h2.store.entries()) CHECK(e.name.find(".dw") == std::string::npos);
  for (const auto& e : h2.store.entries()) CHECK(e.name.find(".ca") == std::string::npos);
}
