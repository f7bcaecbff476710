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

#ifndef MCSAE_ATTENTION_H_
#define MCSAE_ATTENTION_H_

#include <string>
#include <utility>
#include <vector>

#include "mcsae/masking.h"
#include "mcsae/rng.h"
#include "mcsae/tensor.h"

namespace mcsae {

// softmax(Q K^T / sqrt(d)) V with each query row normalized over the keys.
Tensor ScaledDotAttention(const Tensor& q, const Tensor& k, const Tensor& v);

// Attention weights over a frame sequence: w_l = softmax_l(h_l . u).
// h is [L, d], u is [d]; result is [L], positive, summing to one.
Tensor SapWeights(const Tensor& h, const Tensor& u);

// Weighted sum over frames: e = sum_l w_l x_l. x is [L, d], w is [L].
Tensor SapPool(const Tensor& x, const Tensor& w);

// Self-attentive pooling head: a linear d->d projection produces the
// hidden sequence scored against the context vector u.
struct SapHead {
  Tensor weight;  // [d, d]
  Tensor bias;    // [d]
  Tensor u;       // [d]

  void Init(size_t dim, Rng* rng);
  // x is [L, d]; returns the pooled [1, d] utterance vector.
  Tensor Forward(const Tensor& x) const;
  void Collect(const std::string& prefix, std::vector<NamedTensor>* out);
};

// Elementwise h = max{slope*(w*p + b), w*p + b} with scalar w and b.
Tensor TransformLayer(const Tensor& p, const Tensor& w, const Tensor& b,
                      double slope);

// One cross-attention branch: q is [1, d_q], kv is [1, d_k]; the column
// softmax(q^T kv / sqrt(d_k)) kv^T of shape [d_q, 1]. Every output entry
// is a convex combination of kv entries.
Tensor CrossBranch(const Tensor& q, const Tensor& kv);

// One encoding stage: two masked+transformed cross-attention branches whose
// outer product forms the rank-one segment matrix z_i.
struct McsaeStage {
  size_t index = 0;   // 1-based, for error messages
  Tensor w1, b1;      // branch-1 transform scalars (query side P_i)
  Tensor w2, b2;      // branch-2 transform scalars (query side P_{i+1})
  double slope = 0.01;
  RandomMask* gate = nullptr;  // shared per-stage masking gate

  void Init(size_t stage_index, double leaky_slope, RandomMask* mask_gate);
  // p_i is [1, d_i], p_next is [1, d_{i+1}]; returns [d_i, d_{i+1}].
  Tensor Forward(const Tensor& p_i, const Tensor& p_next, bool training) const;
  void Collect(const std::string& prefix, std::vector<NamedTensor>* out);
};

// Z = P1 x z1 x ... x z4, a [1, d_last] row. Validates the chain and names
// the failing link on mismatch.
Tensor BuildAttentionMatrix(const Tensor& p1, const std::vector<Tensor>& segments);

// C = [Z || P5]: both [1, c], concatenated to [1, 2c] with Z first.
Tensor ConcatEmbedding(const Tensor& z, const Tensor& p5);

// Largest two singular values, via power iteration on M^T M with one
// deflation step. Used to certify numerical rank one.
std::pair<double, double> TopTwoSingularValues(const Tensor& m,
                                               size_t iterations = 300);

}  // namespace mcsae

#endif  // MCSAE_ATTENTION_H_
