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

#include "mcsae/config.h"

#include <cstdlib>
#include <fstream>

#include "mcsae/errors.h"

namespace mcsae {

namespace {

std::string Trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// The desk preset shrinks the model far enough to train in seconds while
// keeping every structural invariant intact. SpecAugment is sized down and
// its mask counts zeroed so a desk run can actually reach zero loss.
const std::map<std::string, std::string>& DeskPreset() {
  static const std::map<std::string, std::string> kDesk = {
      {"model.mel_bins", "16"},   {"model.frames", "64"},
      {"model.widths", "4,8,16,32"}, {"model.blocks", "1,1,1,1"},
      {"optim.batch_size", "16"}, {"specaug.F", "4"},
      {"specaug.T", "8"},         {"specaug.mF", "0"},
      {"specaug.mT", "0"},
  };
  return kDesk;
}

}  // namespace

const std::map<std::string, std::string>& ConfigDefaults() {
  static const std::map<std::string, std::string> kDefaults = {
      // Encoding mode and trunk geometry.
      {"model.mode", "mcsae"},          // gap | sap | mla-sap | mcsae
      {"model.mel_bins", "64"},         // D, input mel bins
      {"model.frames", "1200"},         // L, input frames per example
      {"model.widths", "32,64,128,256"},
      {"model.blocks", "3,4,6,3"},
      {"model.embedding_dim", "512"},   // fc-3 output width
      {"model.speakers", "0"},          // 0: follow data.speakers
      {"model.leaky_slope", "0.01"},
      {"model.desk", "false"},          // apply the desk-scale preset
      // Optimizer and epoch loop.
      {"optim.lr", "0.1"},
      {"optim.momentum", "0.9"},
      {"optim.weight_decay", "0.0001"},
      {"optim.batch_size", "96"},
      {"optim.epochs", "200"},
      {"optim.stop_patience", "20"},    // epochs of loss stagnation
      {"optim.stop_min_delta", "0.001"},
      // Plateau scheduler.
      {"sched.factor", "0.1"},
      {"sched.patience", "5"},
      {"sched.min_delta", "0.001"},
      {"sched.min_lr", "1e-8"},
      // Synthetic dataset.
      {"data.speakers", "8"},
      {"data.utts_per_speaker", "20"},
      {"data.eval_utts_per_speaker", "5"},
      {"data.noise", "0.1"},
      {"data.seed", "1234"},
      // Random masking and SpecAugment.
      {"mask.initial_factor", "0.5"},
      {"specaug.F", "8"},               // max mel-band mask width
      {"specaug.T", "100"},             // max frame-span mask width
      {"specaug.mF", "1"},              // frequency mask count
      {"specaug.mT", "1"},              // time mask count
  };
  return kDefaults;
}

bool IsKnownConfigKey(const std::string& key) {
  return ConfigDefaults().count(key) > 0;
}

const std::string& Config::GetString(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

int Config::GetInt(const std::string& key) const {
  const std::string& raw = GetString(key);
  char* end = nullptr;
  long v = std::strtol(raw.c_str(), &end, 10);
  if (end == raw.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "' expects an integer, got '" +
                      raw + "'");
  return static_cast<int>(v);
}

double Config::GetDouble(const std::string& key) const {
  const std::string& raw = GetString(key);
  char* end = nullptr;
  double v = std::strtod(raw.c_str(), &end);
  if (end == raw.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "' expects a number, got '" +
                      raw + "'");
  return v;
}

bool Config::GetBool(const std::string& key) const {
  const std::string& raw = GetString(key);
  if (raw == "true" || raw == "1") return true;
  if (raw == "false" || raw == "0") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" +
                    raw + "'");
}

std::vector<size_t> Config::GetSizeList(const std::string& key) const {
  const std::string& raw = GetString(key);
  std::vector<size_t> out;
  size_t pos = 0;
  while (pos <= raw.size()) {
    size_t comma = raw.find(',', pos);
    std::string tok = Trim(raw.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos));
    char* end = nullptr;
    long v = std::strtol(tok.c_str(), &end, 10);
    if (tok.empty() || end == tok.c_str() || *end != '\0' || v <= 0)
      throw ConfigError("config key '" + key +
                        "' expects positive integers, got '" + raw + "'");
    out.push_back(static_cast<size_t>(v));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::map<std::string, std::string> ParseConfigFile(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected key=value");
    std::string key = Trim(t.substr(0, eq));
    std::string value = Trim(t.substr(eq + 1));
    if (!IsKnownConfigKey(key))
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": unknown config key '" + key + "'");
    out[key] = value;
  }
  return out;
}

Config ResolveConfig(const std::string& config_path,
                     const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> file_values;
  if (!config_path.empty()) file_values = ParseConfigFile(config_path);

  std::map<std::string, std::string> cli_values;
  for (const std::string& o : overrides) {
    size_t eq = o.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override '" + o + "' is not key=value");
    std::string key = Trim(o.substr(0, eq));
    if (!IsKnownConfigKey(key))
      throw ConfigError("unknown config key '" + key + "'");
    cli_values[key] = Trim(o.substr(eq + 1));
  }

  // The desk flag must be settled first: the preset supplies values only
  // for keys nobody set explicitly.
  std::string desk = ConfigDefaults().at("model.desk");
  if (auto it = file_values.find("model.desk"); it != file_values.end())
    desk = it->second;
  if (auto it = cli_values.find("model.desk"); it != cli_values.end())
    desk = it->second;

  std::map<std::string, std::string> resolved = ConfigDefaults();
  if (desk == "true" || desk == "1") {
    for (const auto& [key, value] : DeskPreset()) resolved[key] = value;
  }
  for (const auto& [key, value] : file_values) resolved[key] = value;
  for (const auto& [key, value] : cli_values) resolved[key] = value;
  return Config(std::move(resolved));
}

}  // namespace mcsae
