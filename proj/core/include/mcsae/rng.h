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

#ifndef MCSAE_RNG_H_
#define MCSAE_RNG_H_

#include <cstdint>
#include <random>

namespace mcsae {

// Deterministic random stream. All distributions are mapped by hand on top
// of mt19937_64 so that a given seed produces the same draws on every
// platform and compiler; std::*_distribution is implementation-defined and
// would break bit-exact reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  void Reseed(uint64_t seed) {
    engine_.seed(seed);
    has_spare_ = false;
  }

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [lo, hi], both ends inclusive.
  int UniformInt(int lo, int hi);

  // Standard normal via Box-Muller, one spare cached.
  double Normal();

  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Derives an independent sub-stream seed, for per-worker or per-stage
  // streams that must not share state.
  static uint64_t Fork(uint64_t seed, uint64_t stream_id);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 finalizer; used for seed derivation.
uint64_t SplitMix64(uint64_t x);

}  // namespace mcsae

#endif  // MCSAE_RNG_H_
