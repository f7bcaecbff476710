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

#include "mcsae/attention.h"

#include <cmath>

#include "mcsae/errors.h"

namespace mcsae {

Tensor ScaledDotAttention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.Rank() != 2 || k.Rank() != 2 || v.Rank() != 2)
    throw DimensionError("ScaledDotAttention: inputs must be rank 2");
  if (q.Dim(1) != k.Dim(1))
    throw DimensionError("ScaledDotAttention: query/key widths differ");
  if (q.Dim(0) != k.Dim(0) || k.Dim(0) != v.Dim(0))
    throw DimensionError("ScaledDotAttention: row counts differ");
  double scale = 1.0 / std::sqrt(static_cast<double>(k.Dim(1)));
  Tensor scores = MulScalar(MatMul(q, Transpose(k)), scale);
  return MatMul(Softmax(scores, 1), v);
}

Tensor SapWeights(const Tensor& h, const Tensor& u) {
  if (h.Rank() != 2) throw DimensionError("SapWeights: h must be [L, d]");
  if (u.Rank() != 1 || u.Dim(0) != h.Dim(1))
    throw DimensionError("SapWeights: context vector width must match h");
  size_t d = h.Dim(1);
  Tensor scores = MatMul(h, Reshape(u, {d, 1}));  // [L, 1]
  return Reshape(Softmax(scores, 0), {h.Dim(0)});
}

Tensor SapPool(const Tensor& x, const Tensor& w) {
  if (x.Rank() != 2) throw DimensionError("SapPool: x must be [L, d]");
  if (w.Rank() != 1 || w.Dim(0) != x.Dim(0))
    throw DimensionError("SapPool: weight length must match frame count");
  size_t l = x.Dim(0);
  return Reshape(MatMul(Transpose(x), Reshape(w, {l, 1})), {x.Dim(1)});
}

void SapHead::Init(size_t dim, Rng* rng) {
  std::vector<double> wv(dim * dim);
  double std = std::sqrt(2.0 / static_cast<double>(dim));
  for (double& v : wv) v = std * rng->Normal();
  weight = Tensor::FromVector({dim, dim}, std::move(wv), true);
  bias = Tensor::Zeros({dim}, true);
  // Context vector scaled so initial scores stay O(1).
  std::vector<double> uv(dim);
  double ustd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : uv) v = ustd * rng->Normal();
  u = Tensor::FromVector({dim}, std::move(uv), true);
}

Tensor SapHead::Forward(const Tensor& x) const {
  Tensor h = AddBias(MatMul(x, weight), bias);
  Tensor w = SapWeights(h, u);
  return Reshape(SapPool(x, w), {1, x.Dim(1)});
}

void SapHead::Collect(const std::string& prefix,
                      std::vector<NamedTensor>* out) {
  out->push_back({prefix + ".weight", weight});
  out->push_back({prefix + ".bias", bias});
  out->push_back({prefix + ".u", u});
}

Tensor TransformLayer(const Tensor& p, const Tensor& w, const Tensor& b,
                      double slope) {
  return LeakyRelu(ShiftBy(ScaleBy(p, w), b), slope);
}

Tensor CrossBranch(const Tensor& q, const Tensor& kv) {
  if (q.Rank() != 2 || q.Dim(0) != 1)
    throw DimensionError("CrossBranch: q must be [1, d_q]");
  if (kv.Rank() != 2 || kv.Dim(0) != 1)
    throw DimensionError("CrossBranch: kv must be [1, d_k]");
  size_t dk = kv.Dim(1);
  double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  // [d_q, d_k] similarity grid, each row softmaxed over the keys.
  Tensor grid = MulScalar(MatMul(Transpose(q), kv), scale);
  Tensor weights = Softmax(grid, 1);
  return MatMul(weights, Transpose(kv));  // [d_q, 1]
}

void McsaeStage::Init(size_t stage_index, double leaky_slope,
                      RandomMask* mask_gate) {
  index = stage_index;
  slope = leaky_slope;
  gate = mask_gate;
  // Identity transform at start: the stage begins as plain cross attention.
  w1 = Tensor::Scalar(1.0, true);
  b1 = Tensor::Scalar(0.0, true);
  w2 = Tensor::Scalar(1.0, true);
  b2 = Tensor::Scalar(0.0, true);
}

Tensor McsaeStage::Forward(const Tensor& p_i, const Tensor& p_next,
                           bool training) const {
  if (p_i.Rank() != 2 || p_i.Dim(0) != 1 || p_next.Rank() != 2 ||
      p_next.Dim(0) != 1)
    throw DimensionError("mcsae stage " + std::to_string(index) +
                         ": pooled inputs must be [1, d] rows");
  Tensor q1 = TransformLayer(MaskGate(p_i, gate, training), w1, b1, slope);
  Tensor branch1 = CrossBranch(q1, p_next);  // [d_i, 1]
  Tensor q2 = TransformLayer(MaskGate(p_next, gate, training), w2, b2, slope);
  Tensor branch2 = CrossBranch(q2, p_i);     // [d_{i+1}, 1]
  return MatMul(branch1, Transpose(branch2));
}

void McsaeStage::Collect(const std::string& prefix,
                         std::vector<NamedTensor>* out) {
  out->push_back({prefix + ".w1", w1});
  out->push_back({prefix + ".b1", b1});
  out->push_back({prefix + ".w2", w2});
  out->push_back({prefix + ".b2", b2});
}

Tensor BuildAttentionMatrix(const Tensor& p1,
                            const std::vector<Tensor>& segments) {
  if (p1.Rank() != 2 || p1.Dim(0) != 1)
    throw DimensionError("BuildAttentionMatrix: P1 must be [1, c1]");
  size_t cols = p1.Dim(1);
  for (size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].Rank() != 2 || segments[i].Dim(0) != cols)
      throw DimensionError(
          "BuildAttentionMatrix: chain breaks entering segment " +
          std::to_string(i + 1) + " (have width " + std::to_string(cols) +
          ", segment expects " + std::to_string(segments[i].Dim(0)) + ")");
    cols = segments[i].Dim(1);
  }
  Tensor z = p1;
  for (const Tensor& seg : segments) z = MatMul(z, seg);
  return z;
}

Tensor ConcatEmbedding(const Tensor& z, const Tensor& p5) {
  if (z.Rank() != 2 || z.Dim(0) != 1 || p5.Rank() != 2 || p5.Dim(0) != 1)
    throw DimensionError("ConcatEmbedding: inputs must be [1, c] rows");
  if (z.Dim(1) != p5.Dim(1))
    throw DimensionError("ConcatEmbedding: widths differ");
  return Concat({z, p5}, 1);
}

std::pair<double, double> TopTwoSingularValues(const Tensor& m,
                                               size_t iterations) {
  if (m.Rank() != 2) throw DimensionError("TopTwoSingularValues: rank 2 only");
  NoGradGuard guard;
  size_t rows = m.Dim(0), cols = m.Dim(1);
  const std::vector<double>& a = m.Data();

  // Power iteration over the Gram matrix applied implicitly: v <- A^T A v.
  auto gram_apply = [&](const std::vector<double>& v, std::vector<double>* out,
                        const std::vector<double>* deflate_u,
                        const std::vector<double>* deflate_v, double sigma) {
    std::vector<double> av(rows, 0.0);
    for (size_t i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < cols; ++j) acc += a[i * cols + j] * v[j];
      av[i] = acc;
    }
    if (deflate_u) {
      // Work with B = A - sigma u v^T without materializing it.
      double vdot = 0.0;
      for (size_t j = 0; j < cols; ++j) vdot += (*deflate_v)[j] * v[j];
      for (size_t i = 0; i < rows; ++i) av[i] -= sigma * (*deflate_u)[i] * vdot;
    }
    out->assign(cols, 0.0);
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < cols; ++j) (*out)[j] += a[i * cols + j] * av[i];
    if (deflate_u) {
      double udot = 0.0;
      for (size_t i = 0; i < rows; ++i) udot += (*deflate_u)[i] * av[i];
      for (size_t j = 0; j < cols; ++j)
        (*out)[j] -= sigma * (*deflate_v)[j] * udot;
    }
  };

  auto normalize = [](std::vector<double>* v) {
    double n = 0.0;
    for (double x : *v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0)
      for (double& x : *v) x /= n;
    return n;
  };

  auto top_singular = [&](const std::vector<double>* du,
                          const std::vector<double>* dv, double sigma,
                          std::vector<double>* u_out,
                          std::vector<double>* v_out) {
    std::vector<double> v(cols);
    // Deterministic, slightly uneven start so we are never orthogonal to
    // the dominant direction by accident of symmetry.
    for (size_t j = 0; j < cols; ++j) v[j] = 1.0 + 0.01 * (j % 7);
    normalize(&v);
    std::vector<double> next;
    double lambda = 0.0;
    for (size_t it = 0; it < iterations; ++it) {
      gram_apply(v, &next, du, dv, sigma);
      lambda = normalize(&next);
      v.swap(next);
    }
    // sigma = |B v|, u = B v / sigma.
    std::vector<double> bv(rows, 0.0);
    for (size_t i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < cols; ++j) acc += a[i * cols + j] * v[j];
      bv[i] = acc;
    }
    if (du) {
      double vdot = 0.0;
      for (size_t j = 0; j < cols; ++j) vdot += (*dv)[j] * v[j];
      for (size_t i = 0; i < rows; ++i) bv[i] -= sigma * (*du)[i] * vdot;
    }
    double s = normalize(&bv);
    *u_out = bv;
    *v_out = v;
    (void)lambda;
    return s;
  };

  std::vector<double> u1, v1, u2, v2;
  double s1 = top_singular(nullptr, nullptr, 0.0, &u1, &v1);
  if (s1 == 0.0) return {0.0, 0.0};
  double s2 = top_singular(&u1, &v1, s1, &u2, &v2);
  return {s1, s2};
}

}  // namespace mcsae
