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

#ifndef MCSAE_BACKBONE_H_
#define MCSAE_BACKBONE_H_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mcsae/attention.h"
#include "mcsae/config.h"
#include "mcsae/masking.h"
#include "mcsae/rng.h"
#include "mcsae/tensor.h"

namespace mcsae {

// Structural description of the encoder: a four-stage residual trunk with
// per-stage pooled taps, one of four encoding modes on top, and the
// embedding head and classifier widths.
struct ModelConfig {
  size_t mel_bins = 64;
  size_t frames = 1200;
  std::vector<size_t> widths = {32, 64, 128, 256};
  std::vector<size_t> blocks = {3, 4, 6, 3};
  std::string mode = "mcsae";  // gap | sap | mla-sap | mcsae
  size_t embedding_dim = 512;
  size_t speakers = 8;
  double leaky_slope = 0.01;
  double mask_initial_factor = 0.5;
};

// Pulls the model.* keys out of a resolved configuration; model.speakers=0
// defers to data.speakers.
ModelConfig MakeModelConfig(const Config& cfg);

struct ConvLayer {
  Tensor weight;  // [Cout, Cin, K, K]
  Tensor bias;    // undefined when the layer feeds a batch norm
  size_t stride = 1;
  size_t pad = 0;

  void Init(size_t cout, size_t cin, size_t k, size_t stride_, size_t pad_,
            bool with_bias, Rng* rng);
  Tensor Forward(const Tensor& x) const;
  void Collect(const std::string& prefix, std::vector<NamedTensor>* out);
};

struct BatchNormLayer {
  Tensor gamma, beta;
  std::vector<double> running_mean, running_var;

  void Init(size_t channels);
  Tensor Forward(const Tensor& x, bool training);
  void Collect(const std::string& prefix, std::vector<NamedTensor>* out);
  void CollectBuffers(
      const std::string& prefix,
      std::vector<std::pair<std::string, std::vector<double>*>>* out);
};

struct LinearLayer {
  Tensor weight;  // [in, out], applied as x W + b
  Tensor bias;    // [out]

  void Init(size_t in, size_t out, Rng* rng);
  Tensor Forward(const Tensor& x) const;
  void Collect(const std::string& prefix, std::vector<NamedTensor>* out);
};

// conv-bn-lrelu-conv-bn plus shortcut, then lrelu. The first block of a
// downsampling stage strides by two and projects the shortcut with a
// 1x1 stride-2 convolution.
struct ResidualBlock {
  ConvLayer conv1, conv2, proj;
  BatchNormLayer bn1, bn2;
  bool downsample = false;
  double slope = 0.01;

  void Init(size_t cin, size_t cout, bool downsample_, double slope_,
            Rng* rng);
  Tensor Forward(const Tensor& x, bool training);
  void Collect(const std::string& prefix, std::vector<NamedTensor>* out);
  void CollectBuffers(
      const std::string& prefix,
      std::vector<std::pair<std::string, std::vector<double>*>>* out);
};

// F0..F4 feature maps and their pooled rows P1..P5 ([B, c] each).
struct StageOutputs {
  std::vector<Tensor> maps;
  std::vector<Tensor> taps;
};

class McsaeModel {
 public:
  // Validates the structural invariants (dims divisible by 8, widths
  // doubling across exactly four stages, known mode) and initializes all
  // parameters from rng in a fixed order.
  void Init(const ModelConfig& cfg, Rng* rng);

  // x is [1, D, L] for one utterance or [B, 1, D, L] for a batch.
  StageOutputs ForwardFeatures(const Tensor& x, bool training);

  // Mode-dependent pre-head encoding, [B, pre-head width].
  Tensor Encode(const StageOutputs& s, bool training);

  Tensor EmbeddingHead(const Tensor& c) const;  // [B, embedding_dim]
  Tensor Classify(const Tensor& se) const;      // [B, speakers]

  // Full training-path forward to logits.
  Tensor Forward(const Tensor& x, bool training);

  // Eval-mode, graph-free embedding; [E] for a single utterance input,
  // [B, E] for a batch.
  Tensor ExtractEmbedding(const Tensor& x);

  size_t PreHeadWidth() const;
  const ModelConfig& Config() const { return cfg_; }

  // Trainable tensors, in a stable order.
  std::vector<NamedTensor> Parameters();
  // Parameters plus copies of the batch-norm running buffers.
  std::vector<NamedTensor> SaveState();
  // Restores everything SaveState captured; entries must match exactly.
  void LoadState(const std::vector<NamedTensor>& entries);

  std::vector<RandomMask>& Gates() { return gates_; }
  void ReseedGates(uint64_t seed);

 private:
  Tensor EncodeSapRow(const Tensor& map, size_t item, SapHead* head) const;

  ModelConfig cfg_;
  ConvLayer conv1_;
  BatchNormLayer bn1_;
  std::vector<std::vector<ResidualBlock>> stages_;
  std::vector<RandomMask> gates_;    // one per encoding stage (mcsae)
  std::vector<McsaeStage> mcsae_;    // four stages (mcsae)
  std::vector<SapHead> sap_heads_;   // one (sap) or five (mla-sap)
  LinearLayer fc1_, fc2_, fc3_;
  LinearLayer classifier_;
};

// Checkpoint = text header holding the ModelConfig plus all state tensors.
void SaveModel(const std::string& path, McsaeModel* model);
McsaeModel LoadModel(const std::string& path);

}  // namespace mcsae

#endif  // MCSAE_BACKBONE_H_
