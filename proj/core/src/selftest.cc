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

#include "mcsae/selftest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <utility>

#include "mcsae/attention.h"
#include "mcsae/backbone.h"
#include "mcsae/errors.h"
#include "mcsae/evaluation.h"
#include "mcsae/features.h"
#include "mcsae/masking.h"
#include "mcsae/rng.h"
#include "mcsae/tensor.h"
#include "mcsae/training.h"

namespace mcsae {

namespace {

constexpr double kGradTol = 1e-4;

// Collects the first failure; later checks still run so a suite's cost is
// independent of where it breaks.
class Suite {
 public:
  void Check(bool ok, const std::string& what) {
    if (!ok && detail_.empty()) detail_ = what;
    passed_ = passed_ && ok;
  }

  void CheckNear(double got, double want, double tol, const std::string& what) {
    bool ok = std::isfinite(got) && std::fabs(got - want) <= tol;
    if (!ok && detail_.empty()) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s (got %.12g, want %.12g +- %g)",
                    what.c_str(), got, want, tol);
      detail_ = buf;
    }
    passed_ = passed_ && ok;
  }

  void CheckGrad(const GradCheckReport& r, const std::string& what) {
    bool ok = r.max_rel_err <= kGradTol;
    if (!ok && detail_.empty()) {
      char buf[200];
      std::snprintf(buf, sizeof(buf),
                    "%s (rel err %.3g at %zu: analytic %.6g vs numeric %.6g)",
                    what.c_str(), r.max_rel_err, r.worst_index, r.analytic,
                    r.numeric);
      detail_ = buf;
    }
    passed_ = passed_ && ok;
  }

  SelftestResult Result(const std::string& name) const {
    return {name, passed_, detail_};
  }

 private:
  bool passed_ = true;
  std::string detail_;
};

Tensor RandT(std::vector<size_t> shape, Rng* rng, double lo, double hi,
             bool requires_grad) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng->Uniform() * (hi - lo) + lo;
  return Tensor::FromVector(std::move(shape), std::move(v), requires_grad);
}

double MaxAbsDiff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

SelftestResult TensorGradients() {
  Suite s;
  Rng rng(101);

  {
    Tensor a = RandT({2, 3}, &rng, -1.0, 1.0, true);
    Tensor b = RandT({3, 4}, &rng, -1.0, 1.0, false);
    Tensor w = RandT({2, 4}, &rng, 0.2, 1.2, false);
    auto fn = [&]() { return SumAll(Mul(Softmax(MatMul(a, b), 1), w)); };
    s.CheckGrad(GradCheck(fn, a), "matmul+softmax gradient");
  }

  {
    // Offsets keep every activation away from the leaky-relu kink.
    Tensor x = RandT({2, 2, 4, 4}, &rng, 0.3, 1.3, true);
    Tensor w = RandT({3, 2, 3, 3}, &rng, -0.4, 0.4, true);
    Tensor bias = RandT({3}, &rng, 0.2, 0.5, true);
    auto fn = [&]() {
      Tensor y = LeakyRelu(Conv2d(x, w, bias, 1, 1), 0.01);
      return SumAll(Mul(y, y));
    };
    s.CheckGrad(GradCheck(fn, x), "conv input gradient");
    s.CheckGrad(GradCheck(fn, w), "conv weight gradient");
    s.CheckGrad(GradCheck(fn, bias), "conv bias gradient");
  }

  {
    Tensor x = RandT({2, 3, 2, 2}, &rng, -1.0, 1.0, true);
    Tensor gamma = RandT({3}, &rng, 0.8, 1.2, true);
    Tensor beta = RandT({3}, &rng, -0.2, 0.2, true);
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    auto fn = [&]() {
      std::vector<double> m = rm, v = rv;  // keep probes from drifting them
      Tensor y = BatchNorm2d(x, gamma, beta, &m, &v, true);
      return SumAll(Mul(y, AddScalar(y, 0.5)));
    };
    s.CheckGrad(GradCheck(fn, x), "batch-norm input gradient");
    s.CheckGrad(GradCheck(fn, gamma), "batch-norm gamma gradient");
  }

  {
    Tensor logits = RandT({3, 4}, &rng, -1.5, 1.5, true);
    std::vector<int> labels = {0, 2, 3};
    auto fn = [&]() { return CrossEntropy(logits, labels); };
    s.CheckGrad(GradCheck(fn, logits), "cross-entropy gradient");
  }

  {
    Tensor x = RandT({1, 5}, &rng, 0.2, 1.0, false);
    Tensor w = Tensor::Scalar(1.3, true);
    Tensor b = Tensor::Scalar(-0.2, true);
    auto fn = [&]() { return SumAll(Mul(ShiftBy(ScaleBy(x, w), b),
                                        ShiftBy(ScaleBy(x, w), b))); };
    s.CheckGrad(GradCheck(fn, w), "scalar scale gradient");
    s.CheckGrad(GradCheck(fn, b), "scalar shift gradient");
  }

  return s.Result("tensor-gradients");
}

SelftestResult AttentionAlgebra() {
  Suite s;
  NoGradGuard inference;
  Rng rng(202);
  const std::vector<size_t> widths = {8, 8, 16, 32, 64};

  std::vector<Tensor> p(5);
  for (size_t i = 0; i < 5; ++i)
    p[i] = RandT({1, widths[i]}, &rng, 0.1, 1.5, false);

  std::vector<RandomMask> gates(4);
  std::vector<McsaeStage> stages(4);
  for (size_t i = 0; i < 4; ++i) {
    gates[i].Init(0.3, 900 + i);
    stages[i].Init(i + 1, 0.01, &gates[i]);
  }

  std::vector<Tensor> segs;
  for (size_t i = 0; i < 4; ++i) {
    Tensor z = stages[i].Forward(p[i], p[i + 1], false);
    s.Check(z.Rank() == 2 && z.Dim(0) == widths[i] && z.Dim(1) == widths[i + 1],
            "segment " + std::to_string(i + 1) + " shape");
    auto [s1, s2] = TopTwoSingularValues(z);
    s.Check(s2 <= 1e-8 * s1 + 1e-14,
            "segment " + std::to_string(i + 1) + " numerical rank one");
    Tensor again = stages[i].Forward(p[i], p[i + 1], false);
    s.Check(MaxAbsDiff(z.Data(), again.Data()) == 0.0,
            "eval-mode stage determinism");
    segs.push_back(z);
  }

  {
    // Convex-combination bound on a branch output.
    Tensor q = TransformLayer(p[0], stages[0].w1, stages[0].b1, 0.01);
    Tensor col = CrossBranch(q, p[1]);
    double lo = 1e300, hi = -1e300;
    for (double v : p[1].Data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    bool inside = true;
    for (double v : col.Data())
      inside = inside && v >= lo - 1e-12 && v <= hi + 1e-12;
    s.Check(inside, "branch output stays inside the key range");
  }

  Tensor z_chain = BuildAttentionMatrix(p[0], segs);
  s.Check(z_chain.Rank() == 2 && z_chain.Dim(0) == 1 &&
              z_chain.Dim(1) == widths[4],
          "folded chain width");

  {
    // The chain of rank-one segments must align with the last stage's
    // second branch direction.
    Tensor q = TransformLayer(p[4], stages[3].w2, stages[3].b2, 0.01);
    Tensor b2 = CrossBranch(q, p[3]);  // [c5, 1]
    double dot = 0.0, nz = 0.0, nb = 0.0;
    for (size_t i = 0; i < widths[4]; ++i) {
      dot += z_chain.Data()[i] * b2.Data()[i];
      nz += z_chain.Data()[i] * z_chain.Data()[i];
      nb += b2.Data()[i] * b2.Data()[i];
    }
    s.Check(nz > 0.0 && nb > 0.0, "chain and branch are nonzero");
    if (nz > 0.0 && nb > 0.0) {
      double cosine = std::fabs(dot) / std::sqrt(nz * nb);
      s.Check(cosine >= 1.0 - 1e-9, "chain collinear with last branch");
    }
  }

  {
    Tensor c = ConcatEmbedding(z_chain, p[4]);
    s.Check(c.Rank() == 2 && c.Dim(1) == 2 * widths[4], "concat width");
    bool halves = true;
    for (size_t i = 0; i < widths[4]; ++i) {
      halves = halves && c.Data()[i] == z_chain.Data()[i];
      halves = halves && c.Data()[widths[4] + i] == p[4].Data()[i];
    }
    s.Check(halves, "concat halves bit-exact");
  }

  {
    Tensor h = RandT({5, 4}, &rng, -1.0, 1.0, false);
    Tensor u = RandT({4}, &rng, -1.0, 1.0, false);
    Tensor w = SapWeights(h, u);
    double sum = 0.0;
    for (double v : w.Data()) sum += v;
    s.CheckNear(sum, 1.0, 1e-9, "attention weights sum to one");

    // Shifting every score by the same constant leaves the weights alone.
    double uu = 0.0;
    for (double v : u.Data()) uu += v * v;
    std::vector<double> shifted = h.Data();
    for (size_t l = 0; l < 5; ++l)
      for (size_t j = 0; j < 4; ++j)
        shifted[l * 4 + j] += 0.8 * u.Data()[j] / uu;
    Tensor w2 = SapWeights(Tensor::FromVector({5, 4}, std::move(shifted)), u);
    s.Check(MaxAbsDiff(w.Data(), w2.Data()) <= 1e-12,
            "weights invariant to a uniform score shift");
  }

  {
    Tensor q = RandT({1, 4}, &rng, -1.0, 1.0, false);
    Tensor k = RandT({1, 4}, &rng, -1.0, 1.0, false);
    Tensor v = RandT({1, 4}, &rng, -1.0, 1.0, false);
    Tensor out = ScaledDotAttention(q, k, v);
    s.Check(MaxAbsDiff(out.Data(), v.Data()) <= 1e-12,
            "single-key attention returns the value row");
  }

  return s.Result("attention-algebra");
}

SelftestResult Masking() {
  Suite s;

  {
    RandomMask gate;
    gate.Init(0.0, 11);
    Tensor x = Tensor::FromVector({1, 8}, {1, 2, 3, 4, 5, 6, 7, 8});
    Tensor y = MaskGate(x, &gate, true);
    s.Check(MaxAbsDiff(x.Data(), y.Data()) == 0.0, "rate zero keeps all");
  }

  {
    RandomMask gate;
    gate.Init(1.0, 12);
    Tensor x = Tensor::FromVector({1, 8}, {1, 2, 3, 4, 5, 6, 7, 8});
    Tensor y = MaskGate(x, &gate, true);
    double mx = 0.0;
    for (double v : y.Data()) mx = std::max(mx, std::fabs(v));
    s.Check(mx == 0.0, "rate one masks all");
  }

  {
    RandomMask gate;
    gate.Init(0.5, 13);
    Tensor x = Tensor::FromVector({1, 8}, {1, 2, 3, 4, 5, 6, 7, 8});
    Tensor y = MaskGate(x, &gate, false);
    s.Check(MaxAbsDiff(x.Data(), y.Data()) == 0.0, "eval mode is identity");
  }

  for (double p : {0.2, 0.5, 0.8}) {
    Rng rng(1400 + static_cast<uint64_t>(p * 10));
    std::vector<double> m = SampleMask(100000, p, &rng);
    size_t zeros = 0;
    for (double v : m) zeros += v == 0.0 ? 1 : 0;
    double rate = static_cast<double>(zeros) / static_cast<double>(m.size());
    s.CheckNear(rate, p, 0.02, "empirical mask rate");
  }

  {
    RandomMask gate;
    gate.Init(0.5, 14);
    Tensor x = Tensor::FromVector({1, 8}, {1, 2, 3, 4, 5, 6, 7, 8}, true);
    Tensor y = MaskGate(x, &gate, true);
    Backward(SumAll(y));
    s.Check(gate.Factor().Grad()[0] != 0.0,
            "train-mode gradient reaches the factor");

    gate.Factor().ZeroGrad();
    Backward(SumAll(MaskGate(x, &gate, false)));
    s.Check(gate.Factor().Grad()[0] == 0.0,
            "eval-mode gradient to the factor is zero");
  }

  return s.Result("masking");
}

SelftestResult BackboneShapes() {
  Suite s;
  NoGradGuard inference;

  ModelConfig cfg;  // production widths: 64 mel bins, 1200 frames
  cfg.speakers = 8;
  Rng rng(1);
  McsaeModel model;
  model.Init(cfg, &rng);

  Rng data_rng(2);
  Tensor x = RandT({1, cfg.mel_bins, cfg.frames}, &data_rng, -1.0, 1.0, false);

  StageOutputs out = model.ForwardFeatures(x, false);
  const std::vector<size_t> tap_widths = {32, 32, 64, 128, 256};
  s.Check(out.taps.size() == 5, "five pooled taps");
  for (size_t i = 0; i < out.taps.size(); ++i)
    s.Check(out.taps[i].Rank() == 2 && out.taps[i].Dim(0) == 1 &&
                out.taps[i].Dim(1) == tap_widths[i],
            "tap " + std::to_string(i + 1) + " width");

  std::vector<RandomMask> gates(4);
  std::vector<McsaeStage> stages(4);
  std::vector<Tensor> segs;
  for (size_t i = 0; i < 4; ++i) {
    gates[i].Init(0.5, 700 + i);
    stages[i].Init(i + 1, 0.01, &gates[i]);
    Tensor z = stages[i].Forward(out.taps[i], out.taps[i + 1], false);
    s.Check(z.Dim(0) == tap_widths[i] && z.Dim(1) == tap_widths[i + 1],
            "segment " + std::to_string(i + 1) + " dims");
    segs.push_back(z);
  }

  Tensor z_chain = BuildAttentionMatrix(out.taps[0], segs);
  s.Check(z_chain.Dim(0) == 1 && z_chain.Dim(1) == 256, "chain is 1x256");

  Tensor c = ConcatEmbedding(z_chain, out.taps[4]);
  s.Check(c.Dim(0) == 1 && c.Dim(1) == 512, "concat is 1x512");

  Tensor enc = model.Encode(out, false);
  s.Check(enc.Rank() == 2 && enc.Dim(0) == 1 &&
              enc.Dim(1) == model.PreHeadWidth() && enc.Dim(1) == 512,
          "encoded row width");

  Tensor se = model.EmbeddingHead(enc);
  s.Check(se.Rank() == 2 && se.Dim(0) == 1 && se.Dim(1) == 512,
          "embedding length 512");

  Tensor single = model.ExtractEmbedding(x);
  s.Check(single.Rank() == 1 && single.Dim(0) == 512,
          "extracted embedding length");

  return s.Result("backbone-shapes");
}

SelftestResult Frontend() {
  Suite s;

  {
    std::vector<double> w = HannWindow(16);
    s.CheckNear(w[0], 0.0, 1e-12, "window starts at zero");
    bool sym = true;
    for (size_t i = 0; i < 16; ++i)
      sym = sym && std::fabs(w[i] - w[15 - i]) <= 1e-12;
    s.Check(sym, "window symmetry");
  }

  {
    // Radix-2 transform against the direct quadratic-time sum.
    Rng rng(33);
    size_t n = 16;
    std::vector<double> re(n), im(n, 0.0);
    for (double& v : re) v = rng.Uniform() * 2.0 - 1.0;
    std::vector<double> fre = re, fim = im;
    Fft(&fre, &fim);
    for (size_t k = 0; k < n; ++k) {
      double sr = 0.0, si = 0.0;
      for (size_t t = 0; t < n; ++t) {
        double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t) /
                     static_cast<double>(n);
        sr += re[t] * std::cos(ang);
        si += re[t] * std::sin(ang);
      }
      s.CheckNear(fre[k], sr, 1e-10, "transform real bin");
      s.CheckNear(fim[k], si, 1e-10, "transform imag bin");
    }
  }

  {
    const size_t bands = 8, nfft = 256;
    const double rate = 16000.0;
    std::vector<double> fb = MelFilterbank(bands, nfft, rate);
    size_t cols = nfft / 2 + 1;
    // Between the outermost triangle peaks, responses tile to one; outside
    // they only taper off.
    double mel_hi = HzToMel(rate / 2.0);
    double first_peak = MelToHz(mel_hi * 1.0 / (bands + 1.0));
    double last_peak = MelToHz(mel_hi * bands / (bands + 1.0));
    size_t covered = 0;
    for (size_t j = 0; j < cols; ++j) {
      double f = static_cast<double>(j) * rate / static_cast<double>(nfft);
      double sum = 0.0;
      for (size_t b = 0; b < bands; ++b) {
        s.Check(fb[b * cols + j] >= 0.0, "filterbank responses nonnegative");
        sum += fb[b * cols + j];
      }
      s.Check(sum <= 1.0 + 1e-9, "filterbank responses never overshoot");
      if (f > first_peak && f < last_peak) {
        ++covered;
        s.CheckNear(sum, 1.0, 1e-9, "filterbank tiles to one");
      }
    }
    s.Check(covered > bands, "filterbank covers the analysis band");
  }

  {
    Rng rng(34);
    std::vector<double> samples(1600);
    for (double& v : samples) v = rng.Uniform() * 0.2 - 0.1;
    FeatureMatrix f = LogMel(samples, 16000, 16);
    s.Check(f.bins == 16, "mel bin count");
    // 25 ms window / 10 ms hop at 16 kHz: 400 samples, hop 160.
    s.Check(f.frames == 1 + (1600 - 400) / 160, "frame count");
    bool finite = true;
    for (double v : f.values) finite = finite && std::isfinite(v);
    s.Check(finite, "log energies finite");

    FeatureMatrix norm = CmvnSliding(f, 300);
    for (size_t d = 0; d < norm.bins; ++d) {
      double mean = 0.0;
      for (size_t t = 0; t < norm.frames; ++t) mean += norm.At(d, t);
      mean /= static_cast<double>(norm.frames);
      s.CheckNear(mean, 0.0, 1e-9, "normalized bin mean");
    }

    FeatureMatrix crop = FixLength(f, 5, nullptr);
    size_t off = (f.frames - 5) / 2;
    bool match = true;
    for (size_t d = 0; d < f.bins; ++d)
      for (size_t t = 0; t < 5; ++t)
        match = match && crop.At(d, t) == f.At(d, off + t);
    s.Check(match, "centered crop slice");

    FeatureMatrix wrap = FixLength(crop, 12, nullptr);
    bool wrapped = true;
    for (size_t d = 0; d < wrap.bins; ++d)
      for (size_t t = 0; t < 12; ++t)
        wrapped = wrapped && wrap.At(d, t) == crop.At(d, t % 5);
    s.Check(wrapped, "short input wraps around");
  }

  return s.Result("frontend");
}

SelftestResult TrainingMechanics() {
  Suite s;

  {
    Tensor w = Tensor::FromVector({1}, {1.0}, true);
    std::vector<NamedTensor> params = {{"w", w}};
    w.Grad()[0] = 0.5;
    OptimState st;
    st.weight_decay = 0.0;
    SgdStep(&params, &st);
    s.CheckNear(w.Data()[0], 0.95, 1e-15, "single optimizer step");
    s.CheckNear(st.velocity[0][0], 0.5, 1e-15, "velocity after one step");

    w.ZeroGrad();
    w.Grad()[0] = 0.5;
    SgdStep(&params, &st);
    // v = 0.9*0.5 + 0.5, w = 0.95 - 0.1*v
    s.CheckNear(w.Data()[0], 0.95 - 0.1 * 0.95, 1e-15, "momentum recursion");
  }

  {
    Tensor w = Tensor::FromVector({2}, {1.0, -2.0}, true);
    std::vector<NamedTensor> params = {{"w", w}};
    w.Grad()[0] = std::numeric_limits<double>::quiet_NaN();
    OptimState st;
    bool threw = false;
    try {
      SgdStep(&params, &st);
    } catch (const TrainingError&) {
      threw = true;
    }
    s.Check(threw, "non-finite gradient rejected");
    s.Check(w.Data()[0] == 1.0 && w.Data()[1] == -2.0,
            "parameters untouched after rejection");
  }

  {
    OptimState optim;
    SchedulerState sched;
    for (double m : {1.0, 0.9, 0.8}) PlateauStep(&sched, &optim, m);
    s.CheckNear(optim.lr, 0.1, 1e-15, "improving metric keeps the rate");
    for (int i = 0; i < 6; ++i) PlateauStep(&sched, &optim, 0.8);
    s.CheckNear(optim.lr, 0.01, 1e-15, "stagnation decays one decade");
    for (int i = 0; i < 60; ++i) PlateauStep(&sched, &optim, 0.8);
    s.Check(optim.lr == 1e-8, "decay stops at the floor");
  }

  {
    SynthSpec spec;
    spec.speakers = 4;
    spec.utts_per_speaker = 3;
    spec.mel_bins = 8;
    spec.frames = 16;
    spec.noise = 0.1;
    spec.seed = 77;
    Dataset a = GenSynthetic(spec);
    Dataset b = GenSynthetic(spec);
    s.Check(a.utterances.size() == 12 && a.labels == b.labels,
            "generator determinism (labels)");
    bool same = a.utterances.size() == b.utterances.size();
    for (size_t i = 0; same && i < a.utterances.size(); ++i)
      same = MaxAbsDiff(a.utterances[i].values, b.utterances[i].values) == 0.0;
    s.Check(same, "generator determinism (values)");

    auto dist = [&](size_t i, size_t j) {
      double acc = 0.0;
      const auto& u = a.utterances[i].values;
      const auto& v = a.utterances[j].values;
      for (size_t k = 0; k < u.size(); ++k) acc += (u[k] - v[k]) * (u[k] - v[k]);
      return std::sqrt(acc);
    };
    double max_within = 0.0, min_between = 1e300;
    for (size_t i = 0; i < a.utterances.size(); ++i)
      for (size_t j = i + 1; j < a.utterances.size(); ++j) {
        if (a.labels[i] == a.labels[j])
          max_within = std::max(max_within, dist(i, j));
        else
          min_between = std::min(min_between, dist(i, j));
      }
    s.Check(min_between > max_within, "speakers separate in feature space");
  }

  return s.Result("training-mechanics");
}

// Every achievable operating point, by brute force over midpoint
// thresholds; counts compared in integers exactly like the production
// sweep is expected to behave.
void OracleMetrics(const ScoreSet& set, double p_target, double* eer,
                   double* mdcf) {
  std::vector<double> sorted = set.scores;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> cands;
  cands.push_back(sorted.front() - 1.0);
  for (size_t i = 0; i + 1 < sorted.size(); ++i)
    cands.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  for (double v : sorted) cands.push_back(v);
  cands.push_back(sorted.back() + 1.0);

  size_t tg = 0, nt = 0;
  for (int l : set.labels) (l == 1 ? tg : nt) += 1;

  double best_gap = 1e300, best_eer = 1.0;
  double best_dcf = 1e300;
  double norm = std::min(p_target, 1.0 - p_target);
  for (double t : cands) {
    size_t fa = 0, fr = 0;
    for (size_t i = 0; i < set.scores.size(); ++i) {
      if (set.labels[i] == 1) {
        if (set.scores[i] < t) ++fr;
      } else {
        if (set.scores[i] >= t) ++fa;
      }
    }
    double far = static_cast<double>(fa) / static_cast<double>(nt);
    double frr = static_cast<double>(fr) / static_cast<double>(tg);
    double gap = std::fabs(static_cast<double>(fa) * static_cast<double>(tg) -
                           static_cast<double>(fr) * static_cast<double>(nt));
    if (gap < best_gap) {
      best_gap = gap;
      best_eer = 0.5 * (far + frr);
    }
    double dcf = (frr * p_target + far * (1.0 - p_target)) / norm;
    best_dcf = std::min(best_dcf, dcf);
  }
  *eer = best_eer;
  *mdcf = best_dcf;
}

SelftestResult MetricOracles() {
  Suite s;

  {
    ScoreSet set;
    set.scores = {0.9, 0.8, 0.2, 0.1};
    set.labels = {1, 1, 0, 0};
    s.CheckNear(ComputeEer(set).value, 0.0, 0.0, "separable set error rate");
    s.CheckNear(ComputeMinDcf(set, 0.01, 1, 1).value, 0.0, 0.0,
                "separable set detection cost");

    ScoreSet inv;
    inv.scores = {0.9, 0.8, 0.2, 0.1};
    inv.labels = {0, 0, 1, 1};
    s.CheckNear(ComputeEer(inv).value, 1.0, 0.0, "inverted set error rate");
    s.Check(ComputeMinDcf(inv, 0.01, 1, 1).value == 1.0,
            "inverted set cost saturates at one");
  }

  Rng rng(505);
  for (int trial = 0; trial < 25; ++trial) {
    size_t tg = 5 + rng.UniformInt(0, 40);
    size_t nt = 5 + rng.UniformInt(0, 40);
    ScoreSet set;
    for (size_t i = 0; i < tg; ++i) {
      double raw = rng.Normal() * 0.5 + 0.6;
      set.scores.push_back(std::round(raw * 25.0) / 25.0);  // force ties
      set.labels.push_back(1);
    }
    for (size_t i = 0; i < nt; ++i) {
      double raw = rng.Normal() * 0.5 - 0.2;
      set.scores.push_back(std::round(raw * 25.0) / 25.0);
      set.labels.push_back(0);
    }
    double oe, od;
    OracleMetrics(set, 0.05, &oe, &od);
    MetricResult eer = ComputeEer(set);
    MetricResult dcf = ComputeMinDcf(set, 0.05, 1, 1);
    s.CheckNear(eer.value, oe, 1e-12, "error rate matches the oracle");
    s.CheckNear(dcf.value, od, 1e-12, "detection cost matches the oracle");
    s.Check(eer.value >= 0.0 && eer.value <= 1.0, "error rate in range");
    s.Check(dcf.value >= 0.0 && dcf.value <= 1.0 + 1e-12,
            "detection cost in range");
  }

  return s.Result("metric-oracles");
}

}  // namespace

std::vector<SelftestResult> RunSelftest() {
  const std::pair<const char*, SelftestResult (*)()> suites[] = {
      {"tensor-gradients", TensorGradients},
      {"attention-algebra", AttentionAlgebra},
      {"masking", Masking},
      {"backbone-shapes", BackboneShapes},
      {"frontend", Frontend},
      {"training-mechanics", TrainingMechanics},
      {"metric-oracles", MetricOracles},
  };
  std::vector<SelftestResult> results;
  for (const auto& [name, suite] : suites) {
    try {
      results.push_back(suite());
    } catch (const std::exception& e) {
      results.push_back({name, false, std::string("threw: ") + e.what()});
    }
  }
  return results;
}

size_t RunSelftestReport(std::ostream& os) {
  size_t failures = 0;
  for (const SelftestResult& r : RunSelftest()) {
    if (r.passed) {
      os << r.suite << ": pass\n";
    } else {
      os << r.suite << ": FAIL (" << r.detail << ")\n";
      ++failures;
    }
  }
  return failures;
}

}  // namespace mcsae
