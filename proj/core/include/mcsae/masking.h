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

#ifndef MCSAE_MASKING_H_
#define MCSAE_MASKING_H_

#include <cstdint>
#include <vector>

#include "mcsae/rng.h"
#include "mcsae/tensor.h"

namespace mcsae {

// Keep/drop map of independent Bernoulli(1-p) entries: 1 keeps a value,
// 0 masks it, so p is the masking probability.
std::vector<double> SampleMask(size_t count, double p, Rng* rng);

// Random masking gate with a trainable scaling factor controlling the
// masking rate. The factor is clamped to [0,1] for sampling but kept raw
// in the graph so gradient can push it anywhere.
class RandomMask {
 public:
  RandomMask() : rng_(0) {}

  void Init(double initial_factor, uint64_t seed);
  void Reseed(uint64_t seed) { rng_.Reseed(seed); }

  Tensor& Factor() { return factor_; }
  const Tensor& Factor() const { return factor_; }
  double EffectiveRate() const;
  Rng* Stream() { return &rng_; }

 private:
  Tensor factor_;
  Rng rng_;
};

// Train mode: masks x with a fresh sample and multiplies by a surrogate
// factor of value one that routes gradient to the mask's trainable scalar
// (the sampled map itself is a constant). Eval mode: identity.
Tensor MaskGate(const Tensor& x, RandomMask* mask, bool training);

struct SpecAugmentConfig {
  size_t max_freq_width = 8;   // F: widest mel-band mask
  size_t max_time_width = 100; // T: widest frame-span mask
  size_t freq_masks = 1;       // mF
  size_t time_masks = 1;       // mT
};

// Zeroes mF random mel bands of width <= F and mT random frame spans of
// width <= T inside a bin-major D x L feature matrix, in place.
void ApplySpecAugment(std::vector<double>* features, size_t bins,
                      size_t frames, const SpecAugmentConfig& cfg, Rng* rng);

}  // namespace mcsae

#endif  // MCSAE_MASKING_H_
