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

#include "mcsae/backbone.h"

#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "mcsae/checkpoint.h"
#include "mcsae/errors.h"

namespace mcsae {

namespace {

Tensor GaussianTensor(std::vector<size_t> shape, double stddev, Rng* rng) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = stddev * rng->Normal();
  return Tensor::FromVector(std::move(shape), std::move(v), true);
}

std::string JoinSizes(const std::vector<size_t>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

}  // namespace

ModelConfig MakeModelConfig(const Config& cfg) {
  ModelConfig m;
  m.mel_bins = static_cast<size_t>(cfg.GetInt("model.mel_bins"));
  m.frames = static_cast<size_t>(cfg.GetInt("model.frames"));
  m.widths = cfg.GetSizeList("model.widths");
  m.blocks = cfg.GetSizeList("model.blocks");
  m.mode = cfg.GetString("model.mode");
  m.embedding_dim = static_cast<size_t>(cfg.GetInt("model.embedding_dim"));
  int speakers = cfg.GetInt("model.speakers");
  m.speakers = static_cast<size_t>(
      speakers == 0 ? cfg.GetInt("data.speakers") : speakers);
  m.leaky_slope = cfg.GetDouble("model.leaky_slope");
  m.mask_initial_factor = cfg.GetDouble("mask.initial_factor");
  return m;
}

void ConvLayer::Init(size_t cout, size_t cin, size_t k, size_t stride_,
                     size_t pad_, bool with_bias, Rng* rng) {
  double stddev = std::sqrt(2.0 / static_cast<double>(cin * k * k));
  weight = GaussianTensor({cout, cin, k, k}, stddev, rng);
  bias = with_bias ? Tensor::Zeros({cout}, true) : Tensor();
  stride = stride_;
  pad = pad_;
}

Tensor ConvLayer::Forward(const Tensor& x) const {
  return Conv2d(x, weight, bias, stride, pad);
}

void ConvLayer::Collect(const std::string& prefix,
                        std::vector<NamedTensor>* out) {
  out->push_back({prefix + ".weight", weight});
  if (bias.Defined()) out->push_back({prefix + ".bias", bias});
}

void BatchNormLayer::Init(size_t channels) {
  gamma = Tensor::Full({channels}, 1.0, true);
  beta = Tensor::Zeros({channels}, true);
  running_mean.assign(channels, 0.0);
  running_var.assign(channels, 1.0);
}

Tensor BatchNormLayer::Forward(const Tensor& x, bool training) {
  return BatchNorm2d(x, gamma, beta, &running_mean, &running_var, training);
}

void BatchNormLayer::Collect(const std::string& prefix,
                             std::vector<NamedTensor>* out) {
  out->push_back({prefix + ".gamma", gamma});
  out->push_back({prefix + ".beta", beta});
}

void BatchNormLayer::CollectBuffers(
    const std::string& prefix,
    std::vector<std::pair<std::string, std::vector<double>*>>* out) {
  out->push_back({prefix + ".running_mean", &running_mean});
  out->push_back({prefix + ".running_var", &running_var});
}

void LinearLayer::Init(size_t in, size_t out, Rng* rng) {
  double stddev = std::sqrt(2.0 / static_cast<double>(in));
  weight = GaussianTensor({in, out}, stddev, rng);
  bias = Tensor::Zeros({out}, true);
}

Tensor LinearLayer::Forward(const Tensor& x) const {
  return AddBias(MatMul(x, weight), bias);
}

void LinearLayer::Collect(const std::string& prefix,
                          std::vector<NamedTensor>* out) {
  out->push_back({prefix + ".weight", weight});
  out->push_back({prefix + ".bias", bias});
}

void ResidualBlock::Init(size_t cin, size_t cout, bool downsample_,
                         double slope_, Rng* rng) {
  downsample = downsample_;
  slope = slope_;
  size_t stride = downsample ? 2 : 1;
  conv1.Init(cout, cin, 3, stride, 1, false, rng);
  bn1.Init(cout);
  conv2.Init(cout, cout, 3, 1, 1, false, rng);
  bn2.Init(cout);
  if (downsample) proj.Init(cout, cin, 1, 2, 0, false, rng);
}

Tensor ResidualBlock::Forward(const Tensor& x, bool training) {
  Tensor y = LeakyRelu(bn1.Forward(conv1.Forward(x), training), slope);
  y = bn2.Forward(conv2.Forward(y), training);
  Tensor shortcut = downsample ? proj.Forward(x) : x;
  return LeakyRelu(Add(y, shortcut), slope);
}

void ResidualBlock::Collect(const std::string& prefix,
                            std::vector<NamedTensor>* out) {
  conv1.Collect(prefix + ".conv1", out);
  bn1.Collect(prefix + ".bn1", out);
  conv2.Collect(prefix + ".conv2", out);
  bn2.Collect(prefix + ".bn2", out);
  if (downsample) proj.Collect(prefix + ".proj", out);
}

void ResidualBlock::CollectBuffers(
    const std::string& prefix,
    std::vector<std::pair<std::string, std::vector<double>*>>* out) {
  bn1.CollectBuffers(prefix + ".bn1", out);
  bn2.CollectBuffers(prefix + ".bn2", out);
}

void McsaeModel::Init(const ModelConfig& cfg, Rng* rng) {
  if (cfg.widths.size() != 4 || cfg.blocks.size() != 4)
    throw ConfigError("model: exactly four residual stages are required");
  for (size_t i = 0; i + 1 < cfg.widths.size(); ++i)
    if (cfg.widths[i + 1] != 2 * cfg.widths[i])
      throw ConfigError("model: stage widths must double stage to stage");
  if (cfg.widths[0] == 0) throw ConfigError("model: zero stage width");
  for (size_t b : cfg.blocks)
    if (b == 0) throw ConfigError("model: every stage needs a block");
  if (cfg.mel_bins == 0 || cfg.mel_bins % 8 != 0 || cfg.frames == 0 ||
      cfg.frames % 8 != 0)
    throw ConfigError("model: mel bins and frames must be multiples of 8");
  if (cfg.mode != "gap" && cfg.mode != "sap" && cfg.mode != "mla-sap" &&
      cfg.mode != "mcsae")
    throw ConfigError("model: unknown encoding mode '" + cfg.mode + "'");
  if (cfg.speakers < 2)
    throw ConfigError("model: need at least two speaker classes");
  if (cfg.embedding_dim == 0)
    throw ConfigError("model: zero embedding dimension");
  if (!(cfg.leaky_slope > 0.0 && cfg.leaky_slope < 1.0))
    throw ConfigError("model: leaky slope must lie in (0, 1)");
  if (cfg.mask_initial_factor < 0.0 || cfg.mask_initial_factor > 1.0)
    throw ConfigError("model: initial mask factor must lie in [0, 1]");

  cfg_ = cfg;
  conv1_.Init(cfg.widths[0], 1, 7, 1, 3, false, rng);
  bn1_.Init(cfg.widths[0]);

  stages_.assign(4, {});
  for (size_t s = 0; s < 4; ++s) {
    size_t cin = s == 0 ? cfg.widths[0] : cfg.widths[s - 1];
    size_t cout = cfg.widths[s];
    for (size_t b = 0; b < cfg.blocks[s]; ++b) {
      ResidualBlock block;
      block.Init(b == 0 ? cin : cout, cout, b == 0 && s > 0, cfg.leaky_slope,
                 rng);
      stages_[s].push_back(std::move(block));
    }
  }

  gates_.clear();
  mcsae_.clear();
  sap_heads_.clear();
  // Tap widths are c1, c1, c2, c3, c4 for P1..P5.
  std::vector<size_t> tap_widths = {cfg.widths[0], cfg.widths[0],
                                    cfg.widths[1], cfg.widths[2],
                                    cfg.widths[3]};
  if (cfg.mode == "mcsae") {
    gates_.resize(4);
    mcsae_.resize(4);
    for (size_t i = 0; i < 4; ++i) {
      gates_[i].Init(cfg.mask_initial_factor, rng->NextU64());
      mcsae_[i].Init(i + 1, cfg.leaky_slope, &gates_[i]);
    }
  } else if (cfg.mode == "sap") {
    sap_heads_.resize(1);
    sap_heads_[0].Init(cfg.widths[3], rng);
  } else if (cfg.mode == "mla-sap") {
    sap_heads_.resize(5);
    for (size_t i = 0; i < 5; ++i) sap_heads_[i].Init(tap_widths[i], rng);
  }

  size_t w = PreHeadWidth();
  fc1_.Init(w, w, rng);
  fc2_.Init(w, w, rng);
  fc3_.Init(w, cfg.embedding_dim, rng);
  classifier_.Init(cfg.embedding_dim, cfg.speakers, rng);
}

StageOutputs McsaeModel::ForwardFeatures(const Tensor& x, bool training) {
  Tensor in;
  if (x.Rank() == 3) {
    if (x.Dim(0) != 1 || x.Dim(1) != cfg_.mel_bins || x.Dim(2) != cfg_.frames)
      throw DimensionError("model: expected [1, " +
                           std::to_string(cfg_.mel_bins) + ", " +
                           std::to_string(cfg_.frames) + "] features");
    in = Reshape(x, {1, 1, cfg_.mel_bins, cfg_.frames});
  } else if (x.Rank() == 4) {
    if (x.Dim(1) != 1 || x.Dim(2) != cfg_.mel_bins || x.Dim(3) != cfg_.frames)
      throw DimensionError("model: expected [B, 1, " +
                           std::to_string(cfg_.mel_bins) + ", " +
                           std::to_string(cfg_.frames) + "] features");
    in = x;
  } else {
    throw DimensionError("model: features must be rank 3 or 4");
  }

  StageOutputs s;
  Tensor f =
      LeakyRelu(bn1_.Forward(conv1_.Forward(in), training), cfg_.leaky_slope);
  s.maps.push_back(f);
  s.taps.push_back(GlobalAvgPool(f));
  for (auto& stage : stages_) {
    for (auto& block : stage) f = block.Forward(f, training);
    s.maps.push_back(f);
    s.taps.push_back(GlobalAvgPool(f));
  }
  return s;
}

Tensor McsaeModel::EncodeSapRow(const Tensor& map, size_t item,
                                SapHead* head) const {
  Tensor m = Select0(map, item);           // [C, H, W]
  Tensor seq = Transpose(MeanAxis(m, 1));  // [W, C] frame sequence
  return head->Forward(seq);               // [1, C]
}

Tensor McsaeModel::Encode(const StageOutputs& s, bool training) {
  size_t batch = s.taps[0].Dim(0);
  if (cfg_.mode == "gap") return s.taps[4];

  std::vector<Tensor> rows;
  rows.reserve(batch);
  if (cfg_.mode == "sap") {
    for (size_t b = 0; b < batch; ++b)
      rows.push_back(EncodeSapRow(s.maps[4], b, &sap_heads_[0]));
  } else if (cfg_.mode == "mla-sap") {
    for (size_t b = 0; b < batch; ++b) {
      std::vector<Tensor> parts;
      parts.reserve(5);
      for (size_t i = 0; i < 5; ++i)
        parts.push_back(EncodeSapRow(s.maps[i], b, &sap_heads_[i]));
      rows.push_back(Concat(parts, 1));
    }
  } else {  // mcsae
    for (size_t b = 0; b < batch; ++b) {
      std::vector<Tensor> p(5);
      for (size_t i = 0; i < 5; ++i)
        p[i] = Reshape(Select0(s.taps[i], b), {1, s.taps[i].Dim(1)});
      std::vector<Tensor> segments;
      segments.reserve(4);
      for (size_t i = 0; i < 4; ++i)
        segments.push_back(mcsae_[i].Forward(p[i], p[i + 1], training));
      Tensor z = BuildAttentionMatrix(p[0], segments);
      rows.push_back(ConcatEmbedding(z, p[4]));
    }
  }
  return batch == 1 ? rows[0] : Concat(rows, 0);
}

Tensor McsaeModel::EmbeddingHead(const Tensor& c) const {
  Tensor h = LeakyRelu(fc1_.Forward(c), cfg_.leaky_slope);
  h = LeakyRelu(fc2_.Forward(h), cfg_.leaky_slope);
  return fc3_.Forward(h);
}

Tensor McsaeModel::Classify(const Tensor& se) const {
  return classifier_.Forward(se);
}

Tensor McsaeModel::Forward(const Tensor& x, bool training) {
  StageOutputs s = ForwardFeatures(x, training);
  return Classify(EmbeddingHead(Encode(s, training)));
}

Tensor McsaeModel::ExtractEmbedding(const Tensor& x) {
  NoGradGuard guard;
  bool single = x.Rank() == 3;
  StageOutputs s = ForwardFeatures(x, false);
  Tensor se = EmbeddingHead(Encode(s, false));
  return single ? Reshape(se, {cfg_.embedding_dim}) : se;
}

size_t McsaeModel::PreHeadWidth() const {
  if (cfg_.mode == "gap" || cfg_.mode == "sap") return cfg_.widths[3];
  if (cfg_.mode == "mla-sap")
    return 2 * cfg_.widths[0] + cfg_.widths[1] + cfg_.widths[2] +
           cfg_.widths[3];
  return 2 * cfg_.widths[3];
}

std::vector<NamedTensor> McsaeModel::Parameters() {
  std::vector<NamedTensor> out;
  conv1_.Collect("conv1", &out);
  bn1_.Collect("bn1", &out);
  for (size_t s = 0; s < stages_.size(); ++s)
    for (size_t b = 0; b < stages_[s].size(); ++b)
      stages_[s][b].Collect(
          "res" + std::to_string(s + 1) + ".block" + std::to_string(b), &out);
  for (size_t i = 0; i < mcsae_.size(); ++i) {
    mcsae_[i].Collect("mcsae.stage" + std::to_string(i + 1), &out);
    out.push_back({"mcsae.gate" + std::to_string(i + 1) + ".factor",
                   gates_[i].Factor()});
  }
  if (cfg_.mode == "sap") {
    sap_heads_[0].Collect("sap", &out);
  } else if (cfg_.mode == "mla-sap") {
    for (size_t i = 0; i < sap_heads_.size(); ++i)
      sap_heads_[i].Collect("mla.head" + std::to_string(i + 1), &out);
  }
  fc1_.Collect("fc1", &out);
  fc2_.Collect("fc2", &out);
  fc3_.Collect("fc3", &out);
  classifier_.Collect("classifier", &out);
  return out;
}

std::vector<NamedTensor> McsaeModel::SaveState() {
  std::vector<NamedTensor> out = Parameters();
  std::vector<std::pair<std::string, std::vector<double>*>> buffers;
  bn1_.CollectBuffers("bn1", &buffers);
  for (size_t s = 0; s < stages_.size(); ++s)
    for (size_t b = 0; b < stages_[s].size(); ++b)
      stages_[s][b].CollectBuffers(
          "res" + std::to_string(s + 1) + ".block" + std::to_string(b),
          &buffers);
  for (auto& [name, buf] : buffers)
    out.push_back({name, Tensor::FromVector({buf->size()}, *buf)});
  return out;
}

void McsaeModel::LoadState(const std::vector<NamedTensor>& entries) {
  std::unordered_map<std::string, Tensor> params;
  for (NamedTensor& p : Parameters()) params.emplace(p.name, p.tensor);
  std::vector<std::pair<std::string, std::vector<double>*>> buffer_list;
  bn1_.CollectBuffers("bn1", &buffer_list);
  for (size_t s = 0; s < stages_.size(); ++s)
    for (size_t b = 0; b < stages_[s].size(); ++b)
      stages_[s][b].CollectBuffers(
          "res" + std::to_string(s + 1) + ".block" + std::to_string(b),
          &buffer_list);
  std::unordered_map<std::string, std::vector<double>*> buffers(
      buffer_list.begin(), buffer_list.end());

  size_t matched = 0;
  for (const NamedTensor& e : entries) {
    auto pit = params.find(e.name);
    if (pit != params.end()) {
      if (pit->second.Shape() != e.tensor.Shape())
        throw ParseError("checkpoint: shape mismatch for " + e.name);
      pit->second.Data() = e.tensor.Data();
      ++matched;
      continue;
    }
    auto bit = buffers.find(e.name);
    if (bit != buffers.end()) {
      if (bit->second->size() != e.tensor.Numel())
        throw ParseError("checkpoint: size mismatch for " + e.name);
      *bit->second = e.tensor.Data();
      ++matched;
      continue;
    }
    throw ParseError("checkpoint: unknown tensor " + e.name);
  }
  if (matched != params.size() + buffers.size())
    throw ParseError("checkpoint: missing tensors (" +
                     std::to_string(matched) + " of " +
                     std::to_string(params.size() + buffers.size()) + ")");
}

void McsaeModel::ReseedGates(uint64_t seed) {
  for (size_t i = 0; i < gates_.size(); ++i)
    gates_[i].Reseed(Rng::Fork(seed, i + 1));
}

void SaveModel(const std::string& path, McsaeModel* model) {
  const ModelConfig& cfg = model->Config();
  std::map<std::string, std::string> header;
  header["mode"] = cfg.mode;
  header["mel_bins"] = std::to_string(cfg.mel_bins);
  header["frames"] = std::to_string(cfg.frames);
  header["widths"] = JoinSizes(cfg.widths);
  header["blocks"] = JoinSizes(cfg.blocks);
  header["embedding_dim"] = std::to_string(cfg.embedding_dim);
  header["speakers"] = std::to_string(cfg.speakers);
  std::ostringstream slope;
  slope.precision(17);
  slope << cfg.leaky_slope;
  header["leaky_slope"] = slope.str();
  std::ostringstream factor;
  factor.precision(17);
  factor << cfg.mask_initial_factor;
  header["mask_initial_factor"] = factor.str();
  SaveModelCheckpoint(path, header, model->SaveState());
}

McsaeModel LoadModel(const std::string& path) {
  std::map<std::string, std::string> header;
  std::vector<NamedTensor> tensors;
  LoadModelCheckpoint(path, &header, &tensors);

  auto need = [&](const std::string& key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end())
      throw ParseError(path + ": checkpoint header missing " + key);
    return it->second;
  };
  auto to_size = [&](const std::string& key) {
    return static_cast<size_t>(std::stoull(need(key)));
  };
  auto to_list = [&](const std::string& key) {
    std::vector<size_t> out;
    std::istringstream is(need(key));
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(std::stoull(item));
    return out;
  };

  ModelConfig cfg;
  cfg.mode = need("mode");
  cfg.mel_bins = to_size("mel_bins");
  cfg.frames = to_size("frames");
  cfg.widths = to_list("widths");
  cfg.blocks = to_list("blocks");
  cfg.embedding_dim = to_size("embedding_dim");
  cfg.speakers = to_size("speakers");
  cfg.leaky_slope = std::stod(need("leaky_slope"));
  cfg.mask_initial_factor = std::stod(need("mask_initial_factor"));

  Rng rng(0);  // placeholder weights, overwritten by LoadState
  McsaeModel model;
  model.Init(cfg, &rng);
  model.LoadState(tensors);
  return model;
}

}  // namespace mcsae
