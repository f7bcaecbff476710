// Copyright (c) 2026 MCSAE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mcsae/attention.h"
#include "mcsae/errors.h"
#include "mcsae/masking.h"
#include "mcsae/rng.h"
#include "mcsae/tensor.h"

using namespace mcsae;

namespace {

constexpr double kGradTol = 1e-4;

Tensor RandT(std::vector<size_t> shape, Rng* rng, bool requires_grad = false,
             double scale = 1.0) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng->Normal();
  return Tensor::FromVector(std::move(shape), std::move(v), requires_grad);
}

std::vector<double> RandWeights(size_t n, Rng* rng) {
  std::vector<double> w(n);
  for (double& x : w) x = rng->Normal();
  return w;
}

// Plain-loop reference for softmax(Q K^T / sqrt(d)) V.
std::vector<double> AttentionOracle(const std::vector<double>& q,
                                    const std::vector<double>& k,
                                    const std::vector<double>& v, size_t n,
                                    size_t d, size_t dv) {
  std::vector<double> out(n * dv, 0.0);
  double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> scores(n);
    double mx = -1e300;
    for (size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (size_t c = 0; c < d; ++c) s += q[i * d + c] * k[j * d + c];
      scores[j] = s * scale;
      mx = std::max(mx, scores[j]);
    }
    double z = 0.0;
    for (double& s : scores) {
      s = std::exp(s - mx);
      z += s;
    }
    for (size_t j = 0; j < n; ++j)
      for (size_t c = 0; c < dv; ++c)
        out[i * dv + c] += scores[j] / z * v[j * dv + c];
  }
  return out;
}

double CosineOf(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("scaled dot attention") {
  Rng rng(41);

  SUBCASE("single frame passes its value through") {
    Tensor q = RandT({1, 5}, &rng);
    Tensor k = RandT({1, 5}, &rng);
    Tensor v = RandT({1, 3}, &rng);
    Tensor y = ScaledDotAttention(q, k, v);
    REQUIRE(y.Shape() == std::vector<size_t>{1, 3});
    for (size_t j = 0; j < 3; ++j)
      CHECK(y.Data()[j] == doctest::Approx(v.Data()[j]).epsilon(1e-12));
  }

  SUBCASE("zero queries average the values uniformly") {
    Tensor q = Tensor::Zeros({4, 6});
    Tensor k = RandT({4, 6}, &rng);
    Tensor v = RandT({4, 2}, &rng);
    Tensor y = ScaledDotAttention(q, k, v);
    for (size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (size_t j = 0; j < 4; ++j) mean += v.Data()[j * 2 + c];
      mean /= 4.0;
      for (size_t i = 0; i < 4; ++i)
        CHECK(y.Data()[i * 2 + c] == doctest::Approx(mean).epsilon(1e-12));
    }
  }

  SUBCASE("matches a plain-loop oracle") {
    Tensor q = RandT({3, 4}, &rng);
    Tensor k = RandT({3, 4}, &rng);
    Tensor v = RandT({3, 5}, &rng);
    Tensor y = ScaledDotAttention(q, k, v);
    std::vector<double> want =
        AttentionOracle(q.Data(), k.Data(), v.Data(), 3, 4, 5);
    REQUIRE(y.Numel() == want.size());
    for (size_t i = 0; i < want.size(); ++i)
      CHECK(y.Data()[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }

  SUBCASE("rejects mismatched operands") {
    CHECK_THROWS_AS(ScaledDotAttention(RandT({3, 4}, &rng), RandT({3, 5}, &rng),
                                       RandT({3, 2}, &rng)),
                    DimensionError);
    CHECK_THROWS_AS(ScaledDotAttention(RandT({3, 4}, &rng), RandT({2, 4}, &rng),
                                       RandT({3, 2}, &rng)),
                    DimensionError);
    CHECK_THROWS_AS(ScaledDotAttention(RandT({3, 4}, &rng), RandT({3, 4}, &rng),
                                       RandT({2, 2}, &rng)),
                    DimensionError);
  }

  SUBCASE("gradcheck through the full block") {
    Tensor q = RandT({3, 4}, &rng, true);
    Tensor k = RandT({3, 4}, &rng, true);
    Tensor v = RandT({3, 5}, &rng, true);
    std::vector<double> w = RandWeights(15, &rng);
    auto fn = [&] { return SumAll(MulMask(ScaledDotAttention(q, k, v), w)); };
    CHECK(GradCheck(fn, q).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, k).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, v).max_rel_err < kGradTol);
  }
}

TEST_CASE("sap weights and pooling") {
  Rng rng(42);

  SUBCASE("log-ratio scores give exact weights") {
    Tensor h = Tensor::FromVector({2, 1}, {0.0, std::log(3.0)});
    Tensor u = Tensor::FromVector({1}, {1.0});
    Tensor w = SapWeights(h, u);
    REQUIRE(w.Shape() == std::vector<size_t>{2});
    CHECK(w.Data()[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(w.Data()[1] == doctest::Approx(0.75).epsilon(1e-12));
  }

  SUBCASE("identical frames weigh uniformly") {
    std::vector<double> row = RandWeights(6, &rng);
    std::vector<double> flat;
    for (int i = 0; i < 5; ++i) flat.insert(flat.end(), row.begin(), row.end());
    Tensor h = Tensor::FromVector({5, 6}, std::move(flat));
    Tensor u = RandT({6}, &rng);
    Tensor w = SapWeights(h, u);
    for (size_t l = 0; l < 5; ++l)
      CHECK(w.Data()[l] == doctest::Approx(0.2).epsilon(1e-12));
  }

  SUBCASE("weights always sum to one") {
    Tensor h = RandT({7, 4}, &rng, false, 3.0);
    Tensor u = RandT({4}, &rng);
    Tensor w = SapWeights(h, u);
    double sum = 0.0;
    for (double x : w.Data()) sum += x;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("shifting every score equally leaves weights unchanged") {
    Tensor h = RandT({6, 3}, &rng);
    Tensor u = RandT({3}, &rng);
    Tensor w0 = SapWeights(h, u);
    // Add the same offset vector to every frame; each score moves by the
    // identical amount delta . u, which softmax cancels.
    std::vector<double> delta = RandWeights(3, &rng);
    std::vector<double> shifted = h.Data();
    for (size_t l = 0; l < 6; ++l)
      for (size_t c = 0; c < 3; ++c) shifted[l * 3 + c] += delta[c];
    Tensor w1 = SapWeights(Tensor::FromVector({6, 3}, std::move(shifted)), u);
    for (size_t l = 0; l < 6; ++l)
      CHECK(w1.Data()[l] == doctest::Approx(w0.Data()[l]).epsilon(1e-9));
  }

  SUBCASE("one-hot weights pick a single frame") {
    Tensor x = RandT({4, 5}, &rng);
    Tensor w = Tensor::FromVector({4}, {0.0, 0.0, 1.0, 0.0});
    Tensor pooled = SapPool(x, w);
    REQUIRE(pooled.Shape() == std::vector<size_t>{5});
    for (size_t c = 0; c < 5; ++c)
      CHECK(pooled.Data()[c] == doctest::Approx(x.Data()[2 * 5 + c]));
  }

  SUBCASE("uniform weights average the frames") {
    Tensor x = RandT({5, 3}, &rng);
    Tensor w = Tensor::Full({5}, 0.2);
    Tensor pooled = SapPool(x, w);
    for (size_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (size_t l = 0; l < 5; ++l) mean += x.Data()[l * 3 + c];
      mean /= 5.0;
      CHECK(pooled.Data()[c] == doctest::Approx(mean).epsilon(1e-12));
    }
  }

  SUBCASE("random weights match the loop oracle") {
    Tensor x = RandT({6, 4}, &rng);
    Tensor w = RandT({6}, &rng);
    Tensor pooled = SapPool(x, w);
    for (size_t c = 0; c < 4; ++c) {
      double want = 0.0;
      for (size_t l = 0; l < 6; ++l) want += w.Data()[l] * x.Data()[l * 4 + c];
      CHECK(pooled.Data()[c] == doctest::Approx(want).epsilon(1e-12));
    }
  }

  SUBCASE("shape validation") {
    CHECK_THROWS_AS(SapWeights(RandT({4}, &rng), RandT({4}, &rng)),
                    DimensionError);
    CHECK_THROWS_AS(SapWeights(RandT({4, 3}, &rng), RandT({4}, &rng)),
                    DimensionError);
    CHECK_THROWS_AS(SapPool(RandT({4, 3}, &rng), RandT({3}, &rng)),
                    DimensionError);
  }

  SUBCASE("gradcheck through weights and pooling") {
    Tensor h = RandT({5, 3}, &rng, true);
    Tensor u = RandT({3}, &rng, true);
    std::vector<double> w = RandWeights(5, &rng);
    auto fn = [&] { return SumAll(MulMask(SapWeights(h, u), w)); };
    CHECK(GradCheck(fn, h).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, u).max_rel_err < kGradTol);

    Tensor x = RandT({5, 3}, &rng, true);
    Tensor pw = RandT({5}, &rng, true);
    std::vector<double> w2 = RandWeights(3, &rng);
    auto fp = [&] { return SumAll(MulMask(SapPool(x, pw), w2)); };
    CHECK(GradCheck(fp, x).max_rel_err < kGradTol);
    CHECK(GradCheck(fp, pw).max_rel_err < kGradTol);
  }
}

TEST_CASE("sap head") {
  Rng rng(43);
  SapHead head;
  head.Init(6, &rng);

  SUBCASE("parameters come out shaped and trainable") {
    CHECK(head.weight.Shape() == std::vector<size_t>{6, 6});
    CHECK(head.bias.Shape() == std::vector<size_t>{6});
    CHECK(head.u.Shape() == std::vector<size_t>{6});
    CHECK(head.weight.RequiresGrad());
    CHECK(head.bias.RequiresGrad());
    CHECK(head.u.RequiresGrad());
    for (double b : head.bias.Data()) CHECK(b == 0.0);
  }

  SUBCASE("pooled output stays inside the per-column frame range") {
    Tensor x = RandT({9, 6}, &rng);
    Tensor y = head.Forward(x);
    REQUIRE(y.Shape() == std::vector<size_t>{1, 6});
    for (size_t c = 0; c < 6; ++c) {
      double lo = 1e300, hi = -1e300;
      for (size_t l = 0; l < 9; ++l) {
        lo = std::min(lo, x.Data()[l * 6 + c]);
        hi = std::max(hi, x.Data()[l * 6 + c]);
      }
      CHECK(y.Data()[c] >= lo - 1e-12);
      CHECK(y.Data()[c] <= hi + 1e-12);
    }
  }

  SUBCASE("collect names the three parameters") {
    std::vector<NamedTensor> params;
    head.Collect("model.sap", &params);
    REQUIRE(params.size() == 3);
    CHECK(params[0].name == "model.sap.weight");
    CHECK(params[1].name == "model.sap.bias");
    CHECK(params[2].name == "model.sap.u");
  }

  SUBCASE("gradcheck through the head") {
    Tensor x = RandT({4, 6}, &rng, true);
    std::vector<double> w = RandWeights(6, &rng);
    auto fn = [&] { return SumAll(MulMask(head.Forward(x), w)); };
    CHECK(GradCheck(fn, x).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, head.weight).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, head.bias).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, head.u).max_rel_err < kGradTol);
  }
}

TEST_CASE("transform layer") {
  Rng rng(44);

  SUBCASE("identity scale and shift reduce to the activation") {
    Tensor p = Tensor::FromVector({1, 4}, {-2.0, -0.5, 0.5, 2.0});
    Tensor w = Tensor::Scalar(1.0);
    Tensor b = Tensor::Scalar(0.0);
    Tensor y = TransformLayer(p, w, b, 0.1);
    CHECK(y.Data()[0] == doctest::Approx(-0.2));
    CHECK(y.Data()[1] == doctest::Approx(-0.05));
    CHECK(y.Data()[2] == doctest::Approx(0.5));
    CHECK(y.Data()[3] == doctest::Approx(2.0));
  }

  SUBCASE("non-negative pre-activations make it affine") {
    Tensor p = Tensor::FromVector({1, 3}, {0.0, 1.0, 4.0});
    Tensor w = Tensor::Scalar(2.0);
    Tensor b = Tensor::Scalar(3.0);
    Tensor y = TransformLayer(p, w, b, 0.01);
    CHECK(y.Data()[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(y.Data()[1] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(y.Data()[2] == doctest::Approx(11.0).epsilon(1e-12));
  }

  SUBCASE("gradcheck including the scalar knobs") {
    Tensor p = RandT({1, 6}, &rng, true);
    Tensor w = Tensor::Scalar(0.7, true);
    Tensor b = Tensor::Scalar(-0.3, true);
    std::vector<double> wts = RandWeights(6, &rng);
    auto fn = [&] { return SumAll(MulMask(TransformLayer(p, w, b, 0.01), wts)); };
    CHECK(GradCheck(fn, p).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, w).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, b).max_rel_err < kGradTol);
  }
}

TEST_CASE("cross branch") {
  Rng rng(45);

  SUBCASE("zero query averages the key-value entries") {
    Tensor q = Tensor::Zeros({1, 5});
    Tensor kv = RandT({1, 7}, &rng);
    Tensor y = CrossBranch(q, kv);
    REQUIRE(y.Shape() == std::vector<size_t>{5, 1});
    double mean = 0.0;
    for (double v : kv.Data()) mean += v;
    mean /= 7.0;
    for (double v : y.Data()) CHECK(v == doctest::Approx(mean).epsilon(1e-12));
  }

  SUBCASE("single key-value entry passes through") {
    Tensor q = Tensor::FromVector({1, 1}, {2.5});
    Tensor kv = Tensor::FromVector({1, 1}, {-3.75});
    Tensor y = CrossBranch(q, kv);
    REQUIRE(y.Shape() == std::vector<size_t>{1, 1});
    CHECK(y.Data()[0] == doctest::Approx(-3.75).epsilon(1e-12));
  }

  SUBCASE("output width follows the query, rows collapse to one") {
    Tensor q = RandT({1, 32}, &rng);
    Tensor kv = RandT({1, 64}, &rng);
    Tensor y = CrossBranch(q, kv);
    CHECK(y.Shape() == std::vector<size_t>{32, 1});
  }

  SUBCASE("every output is a convex mix of the key-value entries") {
    Tensor q = RandT({1, 6}, &rng, false, 2.0);
    Tensor kv = RandT({1, 9}, &rng, false, 2.0);
    double lo = 1e300, hi = -1e300;
    for (double v : kv.Data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    Tensor y = CrossBranch(q, kv);
    for (double v : y.Data()) {
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    }
  }

  SUBCASE("rejects multi-row inputs") {
    CHECK_THROWS_AS(CrossBranch(RandT({2, 4}, &rng), RandT({1, 4}, &rng)),
                    DimensionError);
    CHECK_THROWS_AS(CrossBranch(RandT({1, 4}, &rng), RandT({2, 4}, &rng)),
                    DimensionError);
    CHECK_THROWS_AS(CrossBranch(RandT({4}, &rng), RandT({1, 4}, &rng)),
                    DimensionError);
  }

  SUBCASE("gradcheck") {
    Tensor q = RandT({1, 4}, &rng, true);
    Tensor kv = RandT({1, 6}, &rng, true);
    std::vector<double> w = RandWeights(4, &rng);
    auto fn = [&] { return SumAll(MulMask(CrossBranch(q, kv), w)); };
    CHECK(GradCheck(fn, q).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, kv).max_rel_err < kGradTol);
  }
}

TEST_CASE("mcsae stage") {
  Rng rng(46);
  RandomMask gate;
  gate.Init(0.5, 99);

  SUBCASE("output joins the two tap widths") {
    McsaeStage stage;
    stage.Init(1, 0.01, &gate);
    Tensor p1 = RandT({1, 32}, &rng);
    Tensor p2 = RandT({1, 64}, &rng);
    Tensor z = stage.Forward(p1, p2, false);
    CHECK(z.Shape() == std::vector<size_t>{32, 64});

    McsaeStage wide;
    wide.Init(2, 0.01, &gate);
    Tensor z2 = wide.Forward(RandT({1, 64}, &rng), RandT({1, 128}, &rng), false);
    CHECK(z2.Shape() == std::vector<size_t>{64, 128});
  }

  SUBCASE("stage output is an outer product, numerically rank one") {
    McsaeStage stage;
    stage.Init(1, 0.01, &gate);
    Tensor z = stage.Forward(RandT({1, 12}, &rng), RandT({1, 20}, &rng), false);
    auto [s1, s2] = TopTwoSingularValues(z);
    CHECK(s1 > 0.0);
    CHECK(s2 <= 1e-8 * s1);
  }

  SUBCASE("eval mode is deterministic") {
    McsaeStage stage;
    stage.Init(1, 0.01, &gate);
    Tensor p1 = RandT({1, 8}, &rng);
    Tensor p2 = RandT({1, 10}, &rng);
    Tensor a = stage.Forward(p1, p2, false);
    Tensor b = stage.Forward(p1, p2, false);
    CHECK(a.Data() == b.Data());
  }

  SUBCASE("training with a zero masking rate matches eval") {
    RandomMask open;
    open.Init(0.0, 7);
    McsaeStage stage;
    stage.Init(1, 0.01, &open);
    Tensor p1 = RandT({1, 8}, &rng);
    Tensor p2 = RandT({1, 10}, &rng);
    Tensor train = stage.Forward(p1, p2, true);
    Tensor eval = stage.Forward(p1, p2, false);
    REQUIRE(train.Numel() == eval.Numel());
    for (size_t i = 0; i < train.Numel(); ++i)
      CHECK(train.Data()[i] == doctest::Approx(eval.Data()[i]).epsilon(1e-12));
  }

  SUBCASE("collect names the four transform scalars") {
    McsaeStage stage;
    stage.Init(3, 0.01, &gate);
    std::vector<NamedTensor> params;
    stage.Collect("model.mcsae.stage3", &params);
    REQUIRE(params.size() == 4);
    CHECK(params[0].name == "model.mcsae.stage3.w1");
    CHECK(params[1].name == "model.mcsae.stage3.b1");
    CHECK(params[2].name == "model.mcsae.stage3.w2");
    CHECK(params[3].name == "model.mcsae.stage3.b2");
  }

  SUBCASE("shape validation names the stage") {
    McsaeStage stage;
    stage.Init(2, 0.01, &gate);
    try {
      stage.Forward(RandT({2, 8}, &rng), RandT({1, 10}, &rng), false);
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      CHECK(std::string(e.what()).find("stage 2") != std::string::npos);
    }
  }

  SUBCASE("gradcheck through a full stage in eval mode") {
    McsaeStage stage;
    stage.Init(1, 0.01, &gate);
    Tensor p1 = RandT({1, 4}, &rng, true);
    Tensor p2 = RandT({1, 6}, &rng, true);
    std::vector<double> w = RandWeights(24, &rng);
    auto fn = [&] { return SumAll(MulMask(stage.Forward(p1, p2, false), w)); };
    CHECK(GradCheck(fn, p1).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, p2).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, stage.w1).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, stage.b1).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, stage.w2).max_rel_err < kGradTol);
    CHECK(GradCheck(fn, stage.b2).max_rel_err < kGradTol);
  }

  SUBCASE("training run reaches the gate factor and transforms") {
    RandomMask half;
    half.Init(0.5, 1234);
    McsaeStage stage;
    stage.Init(1, 0.01, &half);
    Tensor p1 = RandT({1, 16}, &rng, true);
    Tensor p2 = RandT({1, 16}, &rng, true);
    Tensor loss = SumAll(stage.Forward(p1, p2, true));
    Backward(loss);
    double gsum = 0.0;
    for (double g : half.Factor().Grad()) gsum += std::abs(g);
    CHECK(gsum > 0.0);
    CHECK(std::abs(stage.w1.Grad()[0]) > 0.0);
    CHECK(std::abs(stage.w2.Grad()[0]) > 0.0);
  }
}

TEST_CASE("attention matrix chain") {
  Rng rng(47);

  SUBCASE("left fold matches manual composition") {
    Tensor p1 = RandT({1, 4}, &rng);
    Tensor s1 = RandT({4, 6}, &rng);
    Tensor s2 = RandT({6, 3}, &rng);
    Tensor z = BuildAttentionMatrix(p1, {s1, s2});
    REQUIRE(z.Shape() == std::vector<size_t>{1, 3});
    // p1 s1 first, then times s2, all by hand.
    std::vector<double> mid(6, 0.0);
    for (size_t j = 0; j < 6; ++j)
      for (size_t c = 0; c < 4; ++c)
        mid[j] += p1.Data()[c] * s1.Data()[c * 6 + j];
    for (size_t j = 0; j < 3; ++j) {
      double want = 0.0;
      for (size_t c = 0; c < 6; ++c) want += mid[c] * s2.Data()[c * 3 + j];
      CHECK(z.Data()[j] == doctest::Approx(want).epsilon(1e-12));
    }
  }

  SUBCASE("identity segment is a no-op") {
    Tensor p1 = RandT({1, 5}, &rng);
    std::vector<double> eye(25, 0.0);
    for (size_t i = 0; i < 5; ++i) eye[i * 5 + i] = 1.0;
    Tensor z = BuildAttentionMatrix(p1, {Tensor::FromVector({5, 5}, eye)});
    CHECK(z.Data() == p1.Data());
  }

  SUBCASE("no segments returns the input row") {
    Tensor p1 = RandT({1, 5}, &rng);
    Tensor z = BuildAttentionMatrix(p1, {});
    CHECK(z.Data() == p1.Data());
  }

  SUBCASE("result of a stage chain is collinear with the last branch") {
    RandomMask gate;
    gate.Init(0.5, 5);
    McsaeStage stage;
    stage.Init(1, 0.01, &gate);
    Tensor p1 = RandT({1, 10}, &rng);
    Tensor p2 = RandT({1, 14}, &rng);
    Tensor z = BuildAttentionMatrix(p1, {stage.Forward(p1, p2, false)});
    // The stage output factors as branch1 branch2^T, so the folded row is
    // (p1 . branch1) branch2^T and must align with branch2.
    Tensor q2 = TransformLayer(p2, stage.w2, stage.b2, stage.slope);
    Tensor branch2 = CrossBranch(q2, p1);
    std::vector<double> b2col = branch2.Data();
    CHECK(std::abs(CosineOf(z.Data(), b2col)) >= 1.0 - 1e-9);
  }

  SUBCASE("broken chain reports the failing segment") {
    Tensor p1 = RandT({1, 4}, &rng);
    Tensor good = RandT({4, 6}, &rng);
    Tensor bad = RandT({5, 3}, &rng);
    try {
      BuildAttentionMatrix(p1, {good, bad});
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      CHECK(std::string(e.what()).find("segment 2") != std::string::npos);
    }
    CHECK_THROWS_AS(BuildAttentionMatrix(RandT({2, 4}, &rng), {}),
                    DimensionError);
  }
}

TEST_CASE("embedding concatenation") {
  Rng rng(48);

  SUBCASE("halves land side by side") {
    Tensor z = RandT({1, 3}, &rng);
    Tensor p5 = RandT({1, 3}, &rng);
    Tensor e = ConcatEmbedding(z, p5);
    REQUIRE(e.Shape() == std::vector<size_t>{1, 6});
    for (size_t i = 0; i < 3; ++i) {
      CHECK(e.Data()[i] == z.Data()[i]);
      CHECK(e.Data()[3 + i] == p5.Data()[i]);
    }
  }

  SUBCASE("width mismatch is rejected") {
    CHECK_THROWS_AS(ConcatEmbedding(RandT({1, 3}, &rng), RandT({1, 4}, &rng)),
                    DimensionError);
    CHECK_THROWS_AS(ConcatEmbedding(RandT({3}, &rng), RandT({1, 3}, &rng)),
                    DimensionError);
  }

  SUBCASE("gradient splits back into the halves") {
    Tensor z = RandT({1, 3}, &rng, true);
    Tensor p5 = RandT({1, 3}, &rng, true);
    std::vector<double> w = {1, 2, 3, 4, 5, 6};
    Backward(SumAll(MulMask(ConcatEmbedding(z, p5), w)));
    CHECK(z.Grad() == std::vector<double>{1, 2, 3});
    CHECK(p5.Grad() == std::vector<double>{4, 5, 6});
  }
}

TEST_CASE("top two singular values") {
  SUBCASE("diagonal matrix reads off directly") {
    Tensor m = Tensor::FromVector({2, 2}, {3.0, 0.0, 0.0, 2.0});
    auto [s1, s2] = TopTwoSingularValues(m);
    CHECK(s1 == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(s2 == doctest::Approx(2.0).epsilon(1e-9));
  }

  SUBCASE("classic 2x2 against the closed form") {
    Tensor m = Tensor::FromVector({2, 2}, {1.0, 2.0, 3.0, 4.0});
    // Eigenvalues of M^T M = [[10,14],[14,20]] from the quadratic formula.
    double tr = 30.0, det = 10.0 * 20.0 - 14.0 * 14.0;
    double disc = std::sqrt(tr * tr - 4.0 * det);
    double want1 = std::sqrt((tr + disc) / 2.0);
    double want2 = std::sqrt((tr - disc) / 2.0);
    auto [s1, s2] = TopTwoSingularValues(m);
    CHECK(s1 == doctest::Approx(want1).epsilon(1e-9));
    CHECK(s2 == doctest::Approx(want2).epsilon(1e-9));
  }

  SUBCASE("outer products certify as rank one") {
    Rng rng(49);
    Tensor a = RandT({7, 1}, &rng);
    Tensor b = RandT({1, 9}, &rng);
    auto [s1, s2] = TopTwoSingularValues(MatMul(a, b));
    CHECK(s1 > 0.0);
    CHECK(s2 <= 1e-10 * s1);
  }

  SUBCASE("zero matrix yields zeros") {
    auto [s1, s2] = TopTwoSingularValues(Tensor::Zeros({3, 4}));
    CHECK(s1 == 0.0);
    CHECK(s2 == 0.0);
  }

  SUBCASE("rank two rectangular matrix") {
    // Two orthogonal rank-one pieces with known strengths.
    std::vector<double> m(3 * 4, 0.0);
    m[0 * 4 + 0] = 5.0;  // 5 e1 f1^T
    m[1 * 4 + 1] = 1.5;  // 1.5 e2 f2^T
    auto [s1, s2] = TopTwoSingularValues(Tensor::FromVector({3, 4}, m));
    CHECK(s1 == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(s2 == doctest::Approx(1.5).epsilon(1e-9));
  }
}
