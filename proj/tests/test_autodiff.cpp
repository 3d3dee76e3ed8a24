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
#include "sltnet/ops.hpp"

using namespace sltnet;
using oracles::check_gradients;
using oracles::close_rel;
using oracles::conv2d_ref;
using oracles::max_rel_diff;
using oracles::random_tensor;

namespace {

// loss = <out, proj> turns any op output into a scalar functional.
template <typename Op>
auto projected(Tensor<double> proj, Op op) {
  return [proj = std::move(proj), op](Tape<double>& t, const std::vector<Var>& vars,
                                      bool do_backward) {
    Var out = op(t, vars);
    Var loss = sum_all(t, hadamard(t, out, t.leaf(proj)));
    if (do_backward) t.backward(loss);
    return t.val(loss)[0];
  };
}

}  // namespace

TEST_CASE("conv2d: all-ones 3x3 with padding, hand count") {
  Tape<float> t;
  Var x = t.leaf(Tensor<float>::full({1, 1, 3, 3}, 1.f));
  Var w = t.leaf(Tensor<float>::full({1, 1, 3, 3}, 1.f));
  Conv2dGeom g;
  g.pad_h = g.pad_w = 1;
  Var y = conv2d(t, x, w, g);
  const auto& yv = t.val(y);
  CHECK(yv.shape == std::vector<int>{1, 1, 3, 3});
  CHECK(yv.at4(0, 0, 1, 1) == doctest::Approx(9.f));
  CHECK(yv.at4(0, 0, 0, 0) == doctest::Approx(4.f));
  CHECK(yv.at4(0, 0, 0, 1) == doctest::Approx(6.f));
}

TEST_CASE("conv2d: dilated random case matches six-loop reference") {
  Rng rng(7);
  auto x = random_tensor<double>({2, 4, 8, 8}, rng);
  auto w = random_tensor<double>({6, 4, 3, 3}, rng);
  Conv2dGeom g;
  g.pad_h = g.pad_w = 2;
  g.dil_h = g.dil_w = 2;
  const auto ref = conv2d_ref(x, w, 1, 2, 2, 2, 2, 1);
  for (ConvImpl impl : {ConvImpl::gemm, ConvImpl::naive}) {
    const auto y = conv2d_fwd(x, w, g, impl);
    REQUIRE(y.shape == ref.shape);
    CHECK(oracles::scale_rel_diff(y, ref) < 1e-12);
  }
}

TEST_CASE("conv2d: depthwise equals per-channel convolutions") {
  Rng rng(11);
  const int c = 5;
  auto x = random_tensor<float>({2, c, 6, 6}, rng);
  auto w = random_tensor<float>({c, 1, 3, 3}, rng);
  Conv2dGeom g;
  g.pad_h = g.pad_w = 1;
  g.groups = c;
  const auto y = conv2d_fwd(x, w, g);
  for (int ci = 0; ci < c; ++ci) {
    Tensor<float> xc({2, 1, 6, 6}), wc({1, 1, 3, 3});
    for (int ni = 0; ni < 2; ++ni)
      for (int i = 0; i < 36; ++i)
        xc.v[static_cast<size_t>(ni) * 36 + i] = x.v[(static_cast<size_t>(ni) * c + ci) * 36 + i];
    for (int i = 0; i < 9; ++i) wc.v[static_cast<size_t>(i)] = w.v[static_cast<size_t>(ci) * 9 + i];
    const auto yc = conv2d_ref(xc, wc, 1, 1, 1, 1, 1, 1);
    for (int ni = 0; ni < 2; ++ni)
      for (int i = 0; i < 36; ++i)
        CHECK(y.v[(static_cast<size_t>(ni) * c + ci) * 36 + i] ==
              doctest::Approx(yc.v[static_cast<size_t>(ni) * 36 + i]).epsilon(1e-5));
  }
}

TEST_CASE("conv2d: naive and gemm paths agree to 1e-6 relative") {
  Rng rng(13);
  struct Case {
    std::vector<int> xs, ws;
    Conv2dGeom g;
  };
  std::vector<Case> cases;
  cases.push_back({{2, 3, 9, 7}, {4, 3, 3, 3}, {2, 1, 1, 1, 1, 1}});
  cases.push_back({{1, 6, 8, 8}, {6, 1, 3, 3}, {1, 2, 2, 2, 2, 6}});
  cases.push_back({{2, 4, 10, 6}, {8, 2, 1, 3}, {1, 0, 1, 1, 1, 2}});
  for (const auto& c : cases) {
    auto x = random_tensor<float>(c.xs, rng);
    auto w = random_tensor<float>(c.ws, rng);
    const auto a = conv2d_fwd(x, w, c.g, ConvImpl::gemm);
    const auto b = conv2d_fwd(x, w, c.g, ConvImpl::naive);
    REQUIRE(a.shape == b.shape);
    CHECK(oracles::scale_rel_diff(a, b) < 1e-6);
    // and bitwise-tight in double precision
    auto xd = x.template cast<double>();
    auto wd = w.template cast<double>();
    CHECK(max_rel_diff(conv2d_fwd(xd, wd, c.g, ConvImpl::gemm),
                       conv2d_fwd(xd, wd, c.g, ConvImpl::naive), 1e-9) < 1e-6);
  }
}

TEST_CASE("conv2d: shape algebra holds over random geometries") {
  Rng rng(17);
  for (int it = 0; it < 50; ++it) {
    const int kh = 1 + static_cast<int>(rng.below(3));
    const int kw = 1 + static_cast<int>(rng.below(3));
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int pad_h = static_cast<int>(rng.below(3));
    const int pad_w = static_cast<int>(rng.below(3));
    const int dil_h = 1 + static_cast<int>(rng.below(3));
    const int dil_w = 1 + static_cast<int>(rng.below(3));
    const int h = 6 + static_cast<int>(rng.below(6));
    const int w = 6 + static_cast<int>(rng.below(6));
    const int oh = (h + 2 * pad_h - dil_h * (kh - 1) - 1) / stride + 1;
    const int ow = (w + 2 * pad_w - dil_w * (kw - 1) - 1) / stride + 1;
    if (oh <= 0 || ow <= 0) continue;
    auto x = random_tensor<float>({1, 2, h, w}, rng);
    auto wt = random_tensor<float>({3, 2, kh, kw}, rng);
    Conv2dGeom g{stride, pad_h, pad_w, dil_h, dil_w, 1};
    const auto y = conv2d_fwd(x, wt, g);
    CHECK(y.shape == std::vector<int>{1, 3, oh, ow});
  }
}

TEST_CASE("conv2d: shape mismatch raises argument error") {
  Tape<float> t;
  Var x = t.leaf(Tensor<float>::zeros({1, 3, 4, 4}));
  Var w = t.leaf(Tensor<float>::zeros({2, 4, 3, 3}));
  CHECK_THROWS_AS(conv2d(t, x, w, Conv2dGeom{}), ArgumentError);
}

TEST_CASE("conv_transpose2d: stride-2 geometry and zero input") {
  Tape<float> t;
  Rng rng(3);
  Var x = t.leaf(random_tensor<float>({1, 1, 4, 4}, rng));
  Var w = t.leaf(random_tensor<float>({1, 1, 4, 4}, rng));
  Var y = conv_transpose2d(t, x, w, 2, 1);
  CHECK(t.val(y).shape == std::vector<int>{1, 1, 8, 8});

  Var xz = t.leaf(Tensor<float>::zeros({1, 2, 5, 5}));
  Var wz = t.leaf(random_tensor<float>({2, 3, 4, 4}, rng));
  Var yz = conv_transpose2d(t, xz, wz, 2, 1);
  for (float v : t.val(yz).v) CHECK(v == 0.f);
}

TEST_CASE("conv/conv_transpose adjoint identity <conv(x,w),y> == <x,convT(y,w)>") {
  Rng rng(23);
  for (int it = 0; it < 10; ++it) {
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int pad = static_cast<int>(rng.below(2));
    const int k = 2 + static_cast<int>(rng.below(3));
    auto x = random_tensor<double>({2, 3, 8, 8}, rng);
    auto w = random_tensor<double>({4, 3, k, k}, rng);
    Conv2dGeom g{stride, pad, pad, 1, 1, 1};
    const auto cx = conv2d_fwd(x, w, g);
    auto y = random_tensor<double>(cx.shape, rng);
    // convT wants weight as (Cin=4 of y, Cout=3, k, k): that is conv2d's W with
    // the first two axes swapped.
    Tensor<double> wt({4, 3, k, k});
    for (int o = 0; o < 4; ++o)
      for (int i = 0; i < 3; ++i)
        for (int a = 0; a < k; ++a)
          for (int b = 0; b < k; ++b) wt.at4(o, i, a, b) = w.at4(o, i, a, b);
    const auto ty = convt2d_fwd(y, wt, stride, pad);
    REQUIRE(ty.shape == x.shape);
    double lhs = 0, rhs = 0;
    for (int64_t i = 0; i < cx.numel(); ++i) lhs += cx[i] * y[i];
    for (int64_t i = 0; i < x.numel(); ++i) rhs += x[i] * ty[i];
    CHECK(close_rel(lhs, rhs, 1e-9, 1e-9));
  }
}

TEST_CASE("conv_transpose2d: naive and gemm paths agree") {
  Rng rng(29);
  auto x = random_tensor<float>({2, 3, 5, 6}, rng);
  auto w = random_tensor<float>({3, 4, 4, 4}, rng);
  const auto a = convt2d_fwd(x, w, 2, 1, ConvImpl::gemm);
  const auto b = convt2d_fwd(x, w, 2, 1, ConvImpl::naive);
  REQUIRE(a.shape == b.shape);
  CHECK(oracles::scale_rel_diff(a, b) < 1e-6);
}

TEST_CASE("gradients: conv2d vs central differences") {
  Rng rng(31);
  auto x = random_tensor<double>({2, 3, 6, 6}, rng);
  auto w = random_tensor<double>({4, 3, 3, 3}, rng);
  auto proj = random_tensor<double>({2, 4, 6, 6}, rng);
  Conv2dGeom g;
  g.pad_h = g.pad_w = 1;
  auto res = check_gradients({&x, &w}, projected(proj, [g](Tape<double>& t, auto& v) {
                               return conv2d(t, v[0], v[1], g);
                             }));
  CHECK(res.worst_rel < 1e-4);
}

TEST_CASE("gradients: grouped dilated conv2d vs central differences") {
  Rng rng(37);
  auto x = random_tensor<double>({1, 4, 6, 6}, rng);
  auto w = random_tensor<double>({4, 1, 3, 3}, rng);
  Conv2dGeom g;
  g.pad_h = g.pad_w = 2;
  g.dil_h = g.dil_w = 2;
  g.groups = 4;
  auto proj = random_tensor<double>({1, 4, 6, 6}, rng);
  auto res = check_gradients({&x, &w}, projected(proj, [g](Tape<double>& t, auto& v) {
                               return conv2d(t, v[0], v[1], g);
                             }));
  CHECK(res.worst_rel < 1e-4);
}

TEST_CASE("gradients: conv_transpose2d vs central differences") {
  Rng rng(41);
  auto x = random_tensor<double>({1, 3, 4, 4}, rng);
  auto w = random_tensor<double>({3, 2, 4, 4}, rng);
  auto proj = random_tensor<double>({1, 2, 8, 8}, rng);
  auto res = check_gradients({&x, &w}, projected(proj, [](Tape<double>& t, auto& v) {
                               return conv_transpose2d(t, v[0], v[1], 2, 1);
                             }));
  CHECK(res.worst_rel < 1e-4);
}

TEST_CASE("gradients: elementwise and shape suite vs central differences") {
  Rng rng(43);

  SUBCASE("sigmoid/tanh/scale/add/hadamard") {
    auto a = random_tensor<double>({2, 3, 4, 4}, rng);
    auto b = random_tensor<double>({2, 3, 4, 4}, rng);
    auto proj = random_tensor<double>({2, 3, 4, 4}, rng);
    auto res = check_gradients({&a, &b}, projected(proj, [](Tape<double>& t, auto& v) {
                                 Var s = sigmoid_op(t, v[0]);
                                 Var th = tanh_op(t, v[1]);
                                 Var h = hadamard(t, s, th);
                                 return add(t, scale(t, h, 0.7), v[0]);
                               }));
    CHECK(res.worst_rel < 1e-4);
  }

  SUBCASE("global_avg_pool + linear") {
    auto x = random_tensor<double>({2, 4, 4, 4}, rng);
    auto w = random_tensor<double>({3, 4}, rng);
    auto b = random_tensor<double>({3}, rng);
    auto proj = random_tensor<double>({2, 3}, rng);
    auto res = check_gradients({&x, &w, &b}, projected(proj, [](Tape<double>& t, auto& v) {
                                 return linear(t, global_avg_pool(t, v[0]), v[1], v[2]);
                               }));
    CHECK(res.worst_rel < 1e-4);
  }

  SUBCASE("max_pool2x2") {
    auto x = random_tensor<double>({2, 3, 6, 6}, rng);
    auto proj = random_tensor<double>({2, 3, 3, 3}, rng);
    auto res = check_gradients({&x}, projected(proj, [](Tape<double>& t, auto& v) {
                                 return max_pool2x2(t, v[0]);
                               }));
    CHECK(res.worst_rel < 1e-4);
  }

  SUBCASE("sum_over_channels + mul_spatial_map") {
    auto x = random_tensor<double>({2, 3, 4, 4}, rng);
    auto y = random_tensor<double>({2, 3, 4, 4}, rng);
    auto proj = random_tensor<double>({2, 3, 4, 4}, rng);
    auto res = check_gradients({&x, &y}, projected(proj, [](Tape<double>& t, auto& v) {
                                 Var m = sum_over_channels(t, v[0]);
                                 return mul_spatial_map(t, v[1], m);
                               }));
    CHECK(res.worst_rel < 1e-4);
  }

  SUBCASE("mul_channel_gate + add_channel_bias") {
    auto x = random_tensor<double>({2, 3, 4, 4}, rng);
    auto g = random_tensor<double>({2, 3}, rng);
    auto b = random_tensor<double>({3}, rng);
    auto proj = random_tensor<double>({2, 3, 4, 4}, rng);
    auto res = check_gradients({&x, &g, &b}, projected(proj, [](Tape<double>& t, auto& v) {
                                 return add_channel_bias(t, mul_channel_gate(t, v[0], v[1]), v[2]);
                               }));
    CHECK(res.worst_rel < 1e-4);
  }

  SUBCASE("concat + slice") {
    auto a = random_tensor<double>({1, 2, 3, 3}, rng);
    auto b = random_tensor<double>({1, 3, 3, 3}, rng);
    auto proj = random_tensor<double>({1, 3, 3, 3}, rng);
    auto res = check_gradients({&a, &b}, projected(proj, [](Tape<double>& t, auto& v) {
                                 Var c = concat_channels(t, {v[0], v[1]});
                                 return slice_channels(t, c, 1, 4);
                               }));
    CHECK(res.worst_rel < 1e-4);
  }

  SUBCASE("bilinear_upsample") {
    auto x = random_tensor<double>({1, 2, 3, 4}, rng);
    auto proj = random_tensor<double>({1, 2, 6, 8}, rng);
    auto res = check_gradients({&x}, projected(proj, [](Tape<double>& t, auto& v) {
                                 return bilinear_upsample(t, v[0], 6, 8);
                               }));
    CHECK(res.worst_rel < 1e-4);
  }
}

TEST_CASE("hadamard with all-ones is the identity") {
  Tape<float> t;
  Rng rng(3);
  auto x = random_tensor<float>({2, 3, 4, 4}, rng);
  Var y = hadamard(t, t.leaf(x), t.leaf(Tensor<float>::full({2, 3, 4, 4}, 1.f)));
  CHECK(t.val(y).v == x.v);
}

TEST_CASE("sum_over_channels of C=3 ones is 3 everywhere") {
  Tape<float> t;
  Var y = sum_over_channels(t, t.leaf(Tensor<float>::full({1, 3, 4, 4}, 1.f)));
  for (float v : t.val(y).v) CHECK(v == 3.f);
}

TEST_CASE("batchnorm2d: training statistics and eval identity") {
  SUBCASE("constant input normalizes to zero before affine") {
    Tape<float> t;
    Tensor<float> rm({4}), rv = Tensor<float>::full({4}, 1.f);
    Var x = t.leaf(Tensor<float>::full({2, 4, 3, 3}, 5.f));
    Var g = t.leaf(Tensor<float>::full({4}, 1.f));
    Var b = t.leaf(Tensor<float>::zeros({4}));
    Var y = batchnorm2d(t, x, g, b, rm, rv, BnArgs<float>{});
    for (float v : t.val(y).v) CHECK(std::abs(v) < 1e-6f);
  }
  SUBCASE("eval with unit running stats is near-identity") {
    Tape<float> t;
    Rng rng(5);
    Tensor<float> rm({3}), rv = Tensor<float>::full({3}, 1.f);
    auto xv = random_tensor<float>({2, 3, 4, 4}, rng);
    Var x = t.leaf(xv);
    Var g = t.leaf(Tensor<float>::full({3}, 1.f));
    Var b = t.leaf(Tensor<float>::zeros({3}));
    BnArgs<float> a;
    a.training = false;
    Var y = batchnorm2d(t, x, g, b, rm, rv, a);
    CHECK(max_rel_diff(t.val(y), xv, 1e-3) < 1e-4);
  }
  SUBCASE("random batch is normalized per channel") {
    Tape<float> t;
    Rng rng(9);
    Tensor<float> rm({3}), rv = Tensor<float>::full({3}, 1.f);
    Var x = t.leaf(random_tensor<float>({4, 3, 8, 8}, rng));
    Var g = t.leaf(Tensor<float>::full({3}, 1.f));
    Var b = t.leaf(Tensor<float>::zeros({3}));
    Var y = batchnorm2d(t, x, g, b, rm, rv, BnArgs<float>{});
    const auto& yv = t.val(y);
    const int64_t m = 4 * 8 * 8;
    for (int c = 0; c < 3; ++c) {
      double mu = 0, var = 0;
      for (int n = 0; n < 4; ++n)
        for (int i = 0; i < 64; ++i) mu += yv.at4(n, c, i / 8, i % 8);
      mu /= static_cast<double>(m);
      for (int n = 0; n < 4; ++n)
        for (int i = 0; i < 64; ++i) {
          const double d = yv.at4(n, c, i / 8, i % 8) - mu;
          var += d * d;
        }
      var /= static_cast<double>(m);
      CHECK(std::abs(mu) < 1e-5);
      CHECK(std::abs(var - 1.0) < 1e-3);
    }
  }
  SUBCASE("zero batch raises") {
    Tape<float> t;
    Tensor<float> rm({2}), rv({2});
    Var x = t.leaf(Tensor<float>::zeros({0, 2, 4, 4}));
    Var g = t.leaf(Tensor<float>::full({2}, 1.f));
    Var b = t.leaf(Tensor<float>::zeros({2}));
    CHECK_THROWS_AS(batchnorm2d(t, x, g, b, rm, rv, BnArgs<float>{}), ArgumentError);
  }
}

TEST_CASE("gradients: batchnorm2d train and eval modes") {
  Rng rng(47);
  auto x = random_tensor<double>({3, 2, 4, 4}, rng);
  auto g = random_tensor<double>({2}, rng, 0.5, 1.5);
  auto b = random_tensor<double>({2}, rng);
  auto proj = random_tensor<double>({3, 2, 4, 4}, rng);
  Tensor<double> rm = random_tensor<double>({2}, rng, -0.3, 0.3);
  Tensor<double> rv = random_tensor<double>({2}, rng, 0.6, 1.4);
  for (bool training : {true, false}) {
    auto rm_c = rm, rv_c = rv;
    auto res = check_gradients(
        {&x, &g, &b}, projected(proj, [&rm_c, &rv_c, training](Tape<double>& t, auto& v) {
          BnArgs<double> a;
          a.training = training;
          a.update_running = false;
          return batchnorm2d(t, v[0], v[1], v[2], rm_c, rv_c, a);
        }));
    CHECK(res.worst_rel < 1e-4);
  }
}

TEST_CASE("backward contracts") {
  SUBCASE("loss = sum(w ⊙ x) gives grad(w) = x") {
    Tape<double> t;
    Rng rng(51);
    auto xv = random_tensor<double>({3, 3}, rng);
    Tensor<double> gw({3, 3});
    Var x = t.leaf(xv);
    Var w = t.param(std::make_shared<Tensor<double>>(Tensor<double>::full({3, 3}, 0.5)), &gw);
    Var loss = sum_all(t, hadamard(t, w, x));
    t.backward(loss);
    for (int64_t i = 0; i < 9; ++i) CHECK(gw[i] == doctest::Approx(xv[i]));

    // second backward without zeroing doubles the sink
    t.backward(loss);
    for (int64_t i = 0; i < 9; ++i) CHECK(gw[i] == doctest::Approx(2 * xv[i]));
  }
  SUBCASE("backward on an empty tape is a state error") {
    Tape<double> t;
    CHECK_THROWS_AS(t.backward(Var{}), StateError);
  }
  SUBCASE("non-scalar loss is rejected") {
    Tape<double> t;
    Var x = t.leaf(Tensor<double>::zeros({2, 2}));
    CHECK_THROWS_AS(t.backward(x), ArgumentError);
  }
  SUBCASE("two-layer conv+sigmoid network matches finite differences") {
    Rng rng(53);
    auto x = random_tensor<double>({1, 2, 5, 5}, rng);
    auto w1 = random_tensor<double>({3, 2, 3, 3}, rng, -0.8, 0.8);
    auto w2 = random_tensor<double>({2, 3, 3, 3}, rng, -0.8, 0.8);
    auto proj = random_tensor<double>({1, 2, 5, 5}, rng);
    Conv2dGeom g;
    g.pad_h = g.pad_w = 1;
    auto res = check_gradients({&x, &w1, &w2}, projected(proj, [g](Tape<double>& t, auto& v) {
                                 Var h = sigmoid_op(t, conv2d(t, v[0], v[1], g));
                                 return conv2d(t, h, v[2], g);
                               }));
    CHECK(res.worst_rel < 1e-4);
  }
}
