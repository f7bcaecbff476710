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

#include "mcsae/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mcsae/errors.h"

namespace mcsae {

namespace {

void PutU16(std::ostream& os, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

void PutU32(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

uint16_t GetU16(std::istream& is, const std::string& context) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2))
    throw ParseError(context + ": truncated wav file");
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t GetU32(std::istream& is, const std::string& context) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw ParseError(context + ": truncated wav file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

WavData ReadWavStream(std::istream& is, const std::string& context) {
  char tag[4];
  if (!is.read(tag, 4) || std::memcmp(tag, "RIFF", 4) != 0)
    throw ParseError(context + ": not a RIFF file");
  GetU32(is, context);  // overall size, unused
  if (!is.read(tag, 4) || std::memcmp(tag, "WAVE", 4) != 0)
    throw ParseError(context + ": not a WAVE file");

  WavData wav;
  bool have_fmt = false;
  while (is.read(tag, 4)) {
    uint32_t chunk_size = GetU32(is, context);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16)
        throw ParseError(context + ": fmt chunk too small");
      uint16_t format = GetU16(is, context);
      uint16_t channels = GetU16(is, context);
      uint32_t sample_rate = GetU32(is, context);
      GetU32(is, context);  // byte rate
      GetU16(is, context);  // block align
      uint16_t bits = GetU16(is, context);
      if (format != 1)
        throw ParseError(context + ": only PCM wav is supported");
      if (channels != 1)
        throw ParseError(context + ": only mono wav is supported");
      if (bits != 16)
        throw ParseError(context + ": only 16-bit wav is supported");
      if (sample_rate == 0)
        throw ParseError(context + ": zero sample rate");
      wav.sample_rate = sample_rate;
      is.ignore(chunk_size - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt)
        throw ParseError(context + ": data chunk before fmt chunk");
      size_t count = chunk_size / 2;
      wav.samples.resize(count);
      for (size_t i = 0; i < count; ++i) {
        uint16_t raw = GetU16(is, context);
        wav.samples[i] = static_cast<int16_t>(raw) / 32768.0;
      }
      return wav;
    } else {
      // Unknown chunk (LIST, fact, ...): skip, padded to even size.
      is.ignore(chunk_size + (chunk_size & 1));
    }
    if (!is) throw ParseError(context + ": truncated wav file");
  }
  throw ParseError(context + ": no data chunk found");
}

WavData ReadWav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return ReadWavStream(is, path);
}

void WriteWavStream(std::ostream& os, const std::vector<double>& samples,
                    size_t sample_rate) {
  uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  PutU32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  PutU32(os, 16);
  PutU16(os, 1);  // PCM
  PutU16(os, 1);  // mono
  PutU32(os, static_cast<uint32_t>(sample_rate));
  PutU32(os, static_cast<uint32_t>(sample_rate * 2));  // byte rate
  PutU16(os, 2);   // block align
  PutU16(os, 16);  // bits per sample
  os.write("data", 4);
  PutU32(os, data_bytes);
  for (double s : samples) {
    double clamped = std::clamp(s, -1.0, 1.0);
    long code = std::lround(clamped * 32768.0);
    code = std::clamp(code, -32768l, 32767l);
    PutU16(os, static_cast<uint16_t>(static_cast<int16_t>(code)));
  }
  if (!os) throw IoError("failed writing wav data");
}

void WriteWav(const std::string& path, const std::vector<double>& samples,
              size_t sample_rate) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  WriteWavStream(os, samples, sample_rate);
  os.flush();
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace mcsae
