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

#include <benchmark/benchmark.h>

#include "mcsae/rng.h"
#include "mcsae/tensor.h"

namespace {

mcsae::Tensor RandT(std::vector<size_t> shape, mcsae::Rng* rng) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng->Normal();
  return mcsae::Tensor::FromVector(std::move(shape), std::move(v));
}

void BM_MatMul(benchmark::State& state) {
  size_t n = static_cast<size_t>(state.range(0));
  mcsae::Rng rng(1);
  mcsae::Tensor a = RandT({n, n}, &rng);
  mcsae::Tensor b = RandT({n, n}, &rng);
  mcsae::NoGradGuard guard;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mcsae::MatMul(a, b).Data().data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_MatMul)->Arg(64)->Arg(256);

void BM_Conv2dForward(benchmark::State& state) {
  size_t ch = static_cast<size_t>(state.range(0));
  mcsae::Rng rng(2);
  mcsae::Tensor x = RandT({1, ch, 32, 150}, &rng);
  mcsae::Tensor w = RandT({ch, ch, 3, 3}, &rng);
  mcsae::NoGradGuard guard;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mcsae::Conv2d(x, w, {}, 1, 1).Data().data());
  }
  state.SetItemsProcessed(state.iterations() * ch * ch * 32 * 150 * 9);
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
