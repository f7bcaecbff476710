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

#ifndef MCSAE_WAV_H_
#define MCSAE_WAV_H_

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace mcsae {

struct WavData {
  std::vector<double> samples;  // in [-1, 1)
  size_t sample_rate = 0;
};

// Mono 16-bit PCM RIFF only. Unknown chunks before "data" are skipped;
// anything else (stereo, other bit depths, compressed formats) is rejected.
WavData ReadWavStream(std::istream& is, const std::string& context);
WavData ReadWav(const std::string& path);

// Samples are clamped to [-1, 1] and rounded to the nearest 16-bit code.
void WriteWavStream(std::ostream& os, const std::vector<double>& samples,
                    size_t sample_rate);
void WriteWav(const std::string& path, const std::vector<double>& samples,
              size_t sample_rate);

}  // namespace mcsae

#endif  // MCSAE_WAV_H_
