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

#include "mcsae/checkpoint.h"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "mcsae/errors.h"

namespace mcsae {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'T', '1'};
constexpr char kHeaderEnd[] = "---";

// Guard rails against reading garbage as sizes.
constexpr uint32_t kMaxNameLen = 1u << 16;
constexpr uint32_t kMaxRank = 8;
constexpr uint64_t kMaxElements = 1ull << 31;

void PutU32(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void PutF64(std::ostream& os, double v) {
  uint64_t bits = std::bit_cast<uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b, 8);
}

uint32_t GetU32(std::istream& is, const std::string& context) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw ParseError(context + ": truncated tensor data");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

double GetF64(std::istream& is, const std::string& context) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw ParseError(context + ": truncated tensor data");
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void WriteTensors(std::ostream& os, const std::vector<NamedTensor>& entries) {
  os.write(kMagic, 4);
  PutU32(os, static_cast<uint32_t>(entries.size()));
  for (const NamedTensor& e : entries) {
    if (!e.tensor.Defined())
      throw ContractError("WriteTensors: undefined tensor '" + e.name + "'");
    PutU32(os, static_cast<uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    const auto& shape = e.tensor.Shape();
    PutU32(os, static_cast<uint32_t>(shape.size()));
    for (size_t d : shape) PutU32(os, static_cast<uint32_t>(d));
    for (double v : e.tensor.Data()) PutF64(os, v);
  }
  if (!os) throw IoError("WriteTensors: stream write failed");
}

std::vector<NamedTensor> ReadTensors(std::istream& is,
                                     const std::string& context) {
  char magic[4];
  if (!is.read(magic, 4) || magic[0] != 'M' || magic[1] != 'C' ||
      magic[2] != 'T' || magic[3] != '1')
    throw ParseError(context + ": not a tensor checkpoint (bad magic)");
  uint32_t count = GetU32(is, context);
  std::vector<NamedTensor> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = GetU32(is, context);
    if (name_len > kMaxNameLen)
      throw ParseError(context + ": implausible name length");
    std::string name(name_len, '\0');
    if (name_len > 0 &&
        !is.read(name.data(), static_cast<std::streamsize>(name_len)))
      throw ParseError(context + ": truncated tensor data");
    uint32_t rank = GetU32(is, context);
    if (rank == 0 || rank > kMaxRank)
      throw ParseError(context + ": implausible rank for '" + name + "'");
    std::vector<size_t> shape(rank);
    uint64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      uint32_t extent = GetU32(is, context);
      if (extent == 0) throw ParseError(context + ": zero extent");
      shape[d] = extent;
      numel *= extent;
      if (numel > kMaxElements)
        throw ParseError(context + ": implausible element count");
    }
    std::vector<double> values(numel);
    for (uint64_t v = 0; v < numel; ++v) values[v] = GetF64(is, context);
    entries.push_back({std::move(name),
                       Tensor::FromVector(std::move(shape), std::move(values))});
  }
  return entries;
}

void SaveTensors(const std::string& path,
                 const std::vector<NamedTensor>& entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  WriteTensors(os, entries);
  if (!os) throw IoError("write failed: " + path);
}

std::vector<NamedTensor> LoadTensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  return ReadTensors(is, path);
}

void SaveModelCheckpoint(const std::string& path,
                         const std::map<std::string, std::string>& header,
                         const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (const auto& [key, value] : header) os << key << "=" << value << "\n";
  os << kHeaderEnd << "\n";
  WriteTensors(os, tensors);
  if (!os) throw IoError("write failed: " + path);
}

void LoadModelCheckpoint(const std::string& path,
                         std::map<std::string, std::string>* header,
                         std::vector<NamedTensor>* tensors) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  header->clear();
  std::string line;
  bool terminated = false;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line == kHeaderEnd) {
      terminated = true;
      break;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected key=value in checkpoint header");
    (*header)[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!terminated)
    throw ParseError(path + ": checkpoint header never terminated");
  *tensors = ReadTensors(is, path);
}

}  // namespace mcsae
