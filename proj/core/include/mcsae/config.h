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

#ifndef MCSAE_CONFIG_H_
#define MCSAE_CONFIG_H_

#include <map>
#include <string>
#include <vector>

namespace mcsae {

// Fully resolved flat key=value configuration. Every key is validated
// against the registry; lookups of unknown keys are programming errors and
// throw, so a Config in hand is always complete.
class Config {
 public:
  Config() = default;
  explicit Config(std::map<std::string, std::string> values)
      : values_(std::move(values)) {}

  const std::string& GetString(const std::string& key) const;
  int GetInt(const std::string& key) const;
  double GetDouble(const std::string& key) const;
  bool GetBool(const std::string& key) const;
  // Comma-separated positive integers, e.g. "32,64,128,256".
  std::vector<size_t> GetSizeList(const std::string& key) const;

  const std::map<std::string, std::string>& Values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Registry of every documented key with its default value.
const std::map<std::string, std::string>& ConfigDefaults();
bool IsKnownConfigKey(const std::string& key);

// Parses "key=value" lines; '#' comments and blank lines are skipped.
// Unknown keys are rejected up front.
std::map<std::string, std::string> ParseConfigFile(const std::string& path);

// Defaults, overlaid by the desk preset when model.desk resolves true, then
// the config file, then the command-line overrides ("key=value" strings).
Config ResolveConfig(const std::string& config_path,
                     const std::vector<std::string>& overrides);

}  // namespace mcsae

#endif  // MCSAE_CONFIG_H_
