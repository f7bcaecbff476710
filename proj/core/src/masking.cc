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

#include "mcsae/masking.h"

#include <algorithm>

#include "mcsae/errors.h"

namespace mcsae {

std::vector<double> SampleMask(size_t count, double p, Rng* rng) {
  if (p < 0.0 || p > 1.0)
    throw ContractError("SampleMask: p must lie in [0, 1]");
  std::vector<double> mask(count);
  for (double& m : mask) m = rng->Bernoulli(p) ? 0.0 : 1.0;
  return mask;
}

void RandomMask::Init(double initial_factor, uint64_t seed) {
  factor_ = Tensor::Scalar(initial_factor, true);
  rng_.Reseed(seed);
}

double RandomMask::EffectiveRate() const {
  return std::clamp(factor_.Data()[0], 0.0, 1.0);
}

Tensor MaskGate(const Tensor& x, RandomMask* mask, bool training) {
  if (!training) return x;
  if (!mask->Factor().Defined())
    throw ContractError("MaskGate: mask factor not initialized");
  std::vector<double> keep =
      SampleMask(x.Numel(), mask->EffectiveRate(), mask->Stream());
  Tensor masked = MulMask(x, keep);
  // 1 + p - detach(p): worth exactly one, so values pass through untouched,
  // while the graph sees d(surrogate)/dp = 1 and the factor learns.
  const Tensor& p = mask->Factor();
  Tensor surrogate = AddScalar(Sub(p, Detach(p)), 1.0);
  return ScaleBy(masked, surrogate);
}

void ApplySpecAugment(std::vector<double>* features, size_t bins,
                      size_t frames, const SpecAugmentConfig& cfg, Rng* rng) {
  if (features->size() != bins * frames)
    throw DimensionError("ApplySpecAugment: feature size mismatch");
  if (cfg.max_freq_width > bins)
    throw ConfigError("ApplySpecAugment: freq mask width exceeds mel bins");
  if (cfg.max_time_width > frames)
    throw ConfigError("ApplySpecAugment: time mask width exceeds frames");
  double* data = features->data();
  for (size_t n = 0; n < cfg.freq_masks; ++n) {
    size_t width = static_cast<size_t>(
        rng->UniformInt(0, static_cast<int>(cfg.max_freq_width)));
    size_t start = static_cast<size_t>(
        rng->UniformInt(0, static_cast<int>(bins - width)));
    for (size_t d = start; d < start + width; ++d)
      std::fill(data + d * frames, data + (d + 1) * frames, 0.0);
  }
  for (size_t n = 0; n < cfg.time_masks; ++n) {
    size_t width = static_cast<size_t>(
        rng->UniformInt(0, static_cast<int>(cfg.max_time_width)));
    size_t start = static_cast<size_t>(
        rng->UniformInt(0, static_cast<int>(frames - width)));
    for (size_t d = 0; d < bins; ++d)
      std::fill(data + d * frames + start, data + d * frames + start + width,
                0.0);
  }
}

}  // namespace mcsae
