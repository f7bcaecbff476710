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

#ifndef MCSAE_TRAINING_H_
#define MCSAE_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcsae/backbone.h"
#include "mcsae/config.h"
#include "mcsae/features.h"
#include "mcsae/masking.h"
#include "mcsae/rng.h"

namespace mcsae {

// SGD with momentum and coupled weight decay. Velocity buffers are created
// on the first step and stay parallel to the parameter list.
struct OptimState {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<std::vector<double>> velocity;
};

// v <- momentum * v + g + weight_decay * w;  w <- w - lr * v.
// A non-finite gradient anywhere aborts the step before any parameter
// moves. Gradients are left untouched; zero them before the next backward.
void SgdStep(std::vector<NamedTensor>* params, OptimState* state);

// Learning-rate decay after `patience` epochs without the monitored metric
// improving by more than min_delta. The rate never increases and never
// drops below min_lr.
struct SchedulerState {
  double factor = 0.1;
  size_t patience = 5;
  double min_delta = 1e-3;
  double min_lr = 1e-8;
  double best = 0.0;
  bool has_best = false;
  size_t stagnant = 0;
};

// Feeds one epoch's metric to the scheduler and returns the rate to use
// next. The metric must be finite.
double PlateauStep(SchedulerState* sched, OptimState* optim, double metric);

// Labeled utterances for classifier training. Features must all share one
// bins x frames geometry matching the model input.
struct Dataset {
  std::vector<FeatureMatrix> utterances;
  std::vector<int> labels;
  size_t speakers = 0;
};

// Synthetic speaker corpus: each speaker gets a fixed random per-band
// template, and every utterance is that template plus i.i.d. noise.
struct SynthSpec {
  size_t speakers = 8;
  size_t utts_per_speaker = 20;
  size_t mel_bins = 64;
  size_t frames = 1200;
  double noise = 0.1;
  uint64_t seed = 1234;
};

SynthSpec MakeSynthSpec(const Config& cfg);

// Deterministic under spec.seed; noise 0 collapses each speaker to its
// template. Utterances are ordered speaker-major.
Dataset GenSynthetic(const SynthSpec& spec);

struct TrainConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  size_t batch_size = 96;
  size_t epochs = 200;
  size_t stop_patience = 20;
  double stop_min_delta = 1e-3;
  double sched_factor = 0.1;
  size_t sched_patience = 5;
  double sched_min_delta = 1e-3;
  double sched_min_lr = 1e-8;
  SpecAugmentConfig augment;
  uint64_t seed = 1234;
};

TrainConfig MakeTrainConfig(const Config& cfg);

struct EpochStats {
  size_t epoch = 0;  // 1-based
  double lr = 0.0;   // rate in effect during the epoch
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainingReport {
  std::vector<EpochStats> epochs;
  bool stopped_early = false;
};

// One line per epoch: "epoch lr loss accuracy", full double precision.
void WriteTrainingReport(std::ostream& os, const TrainingReport& report);

// Mini-batch SGD over shuffled utterances with cross-entropy loss.
// Trailing batch fragments smaller than two are dropped (batch statistics
// need at least two items). Stops at cfg.epochs or after cfg.stop_patience
// epochs without the loss improving by cfg.stop_min_delta. A non-finite
// loss aborts with a diagnostic naming the epoch and batch.
TrainingReport Fit(McsaeModel* model, const Dataset& data,
                   const TrainConfig& cfg);

}  // namespace mcsae

#endif  // MCSAE_TRAINING_H_
