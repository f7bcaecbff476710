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

#include "mcsae/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "mcsae/errors.h"
#include "mcsae/tensor.h"

namespace mcsae {

void SgdStep(std::vector<NamedTensor>* params, OptimState* state) {
  if (state->velocity.empty()) {
    state->velocity.reserve(params->size());
    for (const NamedTensor& p : *params)
      state->velocity.emplace_back(p.tensor.Numel(), 0.0);
  }
  if (state->velocity.size() != params->size())
    throw ContractError("sgd: velocity buffers do not match the parameters");

  for (size_t i = 0; i < params->size(); ++i) {
    NamedTensor& p = (*params)[i];
    if (state->velocity[i].size() != p.tensor.Numel())
      throw ContractError("sgd: velocity shape drifted for " + p.name);
    for (double g : p.tensor.Grad())
      if (!std::isfinite(g))
        throw TrainingError("sgd: non-finite gradient in " + p.name);
  }

  for (size_t i = 0; i < params->size(); ++i) {
    NamedTensor& p = (*params)[i];
    std::vector<double>& w = p.tensor.Data();
    const std::vector<double>& g = p.tensor.Grad();
    std::vector<double>& v = state->velocity[i];
    for (size_t j = 0; j < w.size(); ++j) {
      v[j] = state->momentum * v[j] + g[j] + state->weight_decay * w[j];
      w[j] -= state->lr * v[j];
    }
  }
}

double PlateauStep(SchedulerState* sched, OptimState* optim, double metric) {
  if (!std::isfinite(metric))
    throw ContractError("scheduler: metric is not finite");
  if (!sched->has_best || metric < sched->best - sched->min_delta) {
    sched->best = metric;
    sched->has_best = true;
    sched->stagnant = 0;
    return optim->lr;
  }
  if (++sched->stagnant >= sched->patience) {
    optim->lr = std::max(optim->lr * sched->factor, sched->min_lr);
    sched->stagnant = 0;
  }
  return optim->lr;
}

SynthSpec MakeSynthSpec(const Config& cfg) {
  SynthSpec spec;
  spec.speakers = static_cast<size_t>(cfg.GetInt("data.speakers"));
  spec.utts_per_speaker =
      static_cast<size_t>(cfg.GetInt("data.utts_per_speaker"));
  spec.mel_bins = static_cast<size_t>(cfg.GetInt("model.mel_bins"));
  spec.frames = static_cast<size_t>(cfg.GetInt("model.frames"));
  spec.noise = cfg.GetDouble("data.noise");
  spec.seed = static_cast<uint64_t>(cfg.GetInt("data.seed"));
  return spec;
}

Dataset GenSynthetic(const SynthSpec& spec) {
  if (spec.speakers < 2)
    throw ContractError("synthetic data: need at least two speakers");
  if (spec.mel_bins == 0 || spec.frames == 0)
    throw ContractError("synthetic data: empty feature geometry");

  Dataset data;
  data.speakers = spec.speakers;
  data.utterances.reserve(spec.speakers * spec.utts_per_speaker);
  data.labels.reserve(spec.speakers * spec.utts_per_speaker);

  Rng rng(spec.seed);
  for (size_t s = 0; s < spec.speakers; ++s) {
    std::vector<double> tmpl(spec.mel_bins);
    for (double& b : tmpl) b = rng.Normal();
    for (size_t u = 0; u < spec.utts_per_speaker; ++u) {
      FeatureMatrix f;
      f.bins = spec.mel_bins;
      f.frames = spec.frames;
      f.values.resize(spec.mel_bins * spec.frames);
      for (size_t d = 0; d < spec.mel_bins; ++d)
        for (size_t t = 0; t < spec.frames; ++t)
          f.values[d * spec.frames + t] = tmpl[d] + spec.noise * rng.Normal();
      data.utterances.push_back(std::move(f));
      data.labels.push_back(static_cast<int>(s));
    }
  }
  return data;
}

TrainConfig MakeTrainConfig(const Config& cfg) {
  TrainConfig t;
  t.lr = cfg.GetDouble("optim.lr");
  t.momentum = cfg.GetDouble("optim.momentum");
  t.weight_decay = cfg.GetDouble("optim.weight_decay");
  t.batch_size = static_cast<size_t>(cfg.GetInt("optim.batch_size"));
  t.epochs = static_cast<size_t>(cfg.GetInt("optim.epochs"));
  t.stop_patience = static_cast<size_t>(cfg.GetInt("optim.stop_patience"));
  t.stop_min_delta = cfg.GetDouble("optim.stop_min_delta");
  t.sched_factor = cfg.GetDouble("sched.factor");
  t.sched_patience = static_cast<size_t>(cfg.GetInt("sched.patience"));
  t.sched_min_delta = cfg.GetDouble("sched.min_delta");
  t.sched_min_lr = cfg.GetDouble("sched.min_lr");
  t.augment.max_freq_width = static_cast<size_t>(cfg.GetInt("specaug.F"));
  t.augment.max_time_width = static_cast<size_t>(cfg.GetInt("specaug.T"));
  t.augment.freq_masks = static_cast<size_t>(cfg.GetInt("specaug.mF"));
  t.augment.time_masks = static_cast<size_t>(cfg.GetInt("specaug.mT"));
  t.seed = static_cast<uint64_t>(cfg.GetInt("data.seed"));
  if (t.batch_size < 2)
    throw ConfigError("optim.batch_size must be at least 2");
  if (t.epochs == 0) throw ConfigError("optim.epochs must be positive");
  return t;
}

void WriteTrainingReport(std::ostream& os, const TrainingReport& report) {
  char line[160];
  for (const EpochStats& e : report.epochs) {
    std::snprintf(line, sizeof(line), "%zu %.17g %.17g %.17g\n", e.epoch,
                  e.lr, e.loss, e.accuracy);
    os << line;
  }
}

TrainingReport Fit(McsaeModel* model, const Dataset& data,
                   const TrainConfig& cfg) {
  const ModelConfig& mc = model->Config();
  if (data.utterances.empty())
    throw TrainingError("training: empty dataset");
  if (data.labels.size() != data.utterances.size())
    throw TrainingError("training: labels do not pair with utterances");
  if (data.speakers != mc.speakers)
    throw TrainingError("training: dataset has " +
                        std::to_string(data.speakers) +
                        " speakers but the model expects " +
                        std::to_string(mc.speakers));
  for (size_t i = 0; i < data.utterances.size(); ++i) {
    const FeatureMatrix& f = data.utterances[i];
    if (f.bins != mc.mel_bins || f.frames != mc.frames)
      throw TrainingError("training: utterance " + std::to_string(i) +
                          " is " + std::to_string(f.bins) + "x" +
                          std::to_string(f.frames) + ", expected " +
                          std::to_string(mc.mel_bins) + "x" +
                          std::to_string(mc.frames));
    if (data.labels[i] < 0 ||
        static_cast<size_t>(data.labels[i]) >= data.speakers)
      throw TrainingError("training: label out of range at utterance " +
                          std::to_string(i));
  }

  OptimState optim;
  optim.lr = cfg.lr;
  optim.momentum = cfg.momentum;
  optim.weight_decay = cfg.weight_decay;
  SchedulerState sched;
  sched.factor = cfg.sched_factor;
  sched.patience = cfg.sched_patience;
  sched.min_delta = cfg.sched_min_delta;
  sched.min_lr = cfg.sched_min_lr;

  std::vector<NamedTensor> params = model->Parameters();
  Rng shuffle_rng(Rng::Fork(cfg.seed, 1));
  Rng augment_rng(Rng::Fork(cfg.seed, 2));
  model->ReseedGates(Rng::Fork(cfg.seed, 3));
  bool augmenting = cfg.augment.freq_masks > 0 || cfg.augment.time_masks > 0;

  const size_t n = data.utterances.size();
  const size_t frame_count = mc.mel_bins * mc.frames;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainingReport report;
  double best_loss = 0.0;
  bool has_best = false;
  size_t stagnant = 0;

  for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (size_t i = n; i > 1; --i) {
      size_t j = shuffle_rng.UniformInt(0, i - 1);
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    size_t correct = 0;
    size_t seen = 0;
    size_t batch_index = 0;
    for (size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      size_t count = std::min(cfg.batch_size, n - start);
      if (count < 2) break;  // batch statistics need two items

      std::vector<double> buf(count * frame_count);
      std::vector<int> labels(count);
      for (size_t b = 0; b < count; ++b) {
        const size_t idx = order[start + b];
        labels[b] = data.labels[idx];
        std::vector<double> item = data.utterances[idx].values;
        if (augmenting)
          ApplySpecAugment(&item, mc.mel_bins, mc.frames, cfg.augment,
                           &augment_rng);
        std::copy(item.begin(), item.end(), buf.begin() + b * frame_count);
      }
      Tensor x = Tensor::FromVector({count, 1, mc.mel_bins, mc.frames},
                                    std::move(buf));

      for (NamedTensor& p : params) p.tensor.ZeroGrad();
      Tensor logits;
      Tensor loss;
      try {
        logits = model->Forward(x, true);
        loss = CrossEntropy(logits, labels);
      } catch (const NumericError& e) {
        throw TrainingError("training: " + std::string(e.what()) +
                            " at epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(batch_index));
      }
      double loss_value = loss.Item();
      if (!std::isfinite(loss_value))
        throw TrainingError("training: loss is not finite at epoch " +
                            std::to_string(epoch) + " batch " +
                            std::to_string(batch_index));
      Backward(loss);
      SgdStep(&params, &optim);

      loss_sum += loss_value * static_cast<double>(count);
      seen += count;
      for (size_t b = 0; b < count; ++b) {
        size_t arg = 0;
        for (size_t c = 1; c < mc.speakers; ++c)
          if (logits.Data()[b * mc.speakers + c] >
              logits.Data()[b * mc.speakers + arg])
            arg = c;
        if (static_cast<int>(arg) == labels[b]) ++correct;
      }
    }
    if (seen == 0)
      throw TrainingError("training: no batch with at least two utterances");

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = optim.lr;
    stats.loss = loss_sum / static_cast<double>(seen);
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    report.epochs.push_back(stats);

    PlateauStep(&sched, &optim, stats.loss);

    if (!has_best || stats.loss < best_loss - cfg.stop_min_delta) {
      best_loss = stats.loss;
      has_best = true;
      stagnant = 0;
    } else if (++stagnant >= cfg.stop_patience) {
      report.stopped_early = true;
      break;
    }
  }
  return report;
}

}  // namespace mcsae
