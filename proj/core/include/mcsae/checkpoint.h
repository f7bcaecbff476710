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

#ifndef MCSAE_CHECKPOINT_H_
#define MCSAE_CHECKPOINT_H_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mcsae/tensor.h"

namespace mcsae {

// Named-tensor container, MCT1: magic "MCT1", u32 entry count, then per
// entry u32 name length, UTF-8 name, u32 rank, u32 extents, raw 64-bit
// little-endian values. Byte layout is identical on every platform.
void WriteTensors(std::ostream& os, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> ReadTensors(std::istream& is,
                                     const std::string& context);

void SaveTensors(const std::string& path,
                 const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> LoadTensors(const std::string& path);

// Model checkpoint: sorted "key=value" text lines, a "---" separator line,
// then an MCT1 blob holding parameters and running statistics.
void SaveModelCheckpoint(const std::string& path,
                         const std::map<std::string, std::string>& header,
                         const std::vector<NamedTensor>& tensors);
void LoadModelCheckpoint(const std::string& path,
                         std::map<std::string, std::string>* header,
                         std::vector<NamedTensor>* tensors);

}  // namespace mcsae

#endif  // MCSAE_CHECKPOINT_H_
