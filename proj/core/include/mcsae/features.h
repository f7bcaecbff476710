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

#ifndef MCSAE_FEATURES_H_
#define MCSAE_FEATURES_H_

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcsae/rng.h"

namespace mcsae {

// Log mel-filterbank energies for one utterance, bin-major: values[d * frames
// + t] is band d at frame t.
struct FeatureMatrix {
  size_t bins = 0;
  size_t frames = 0;
  std::vector<double> values;
  double frame_len_ms = 25.0;
  double frame_shift_ms = 10.0;
  size_t sample_rate = 16000;

  double At(size_t d, size_t t) const { return values[d * frames + t]; }
};

// Symmetric Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / (N - 1)).
std::vector<double> HannWindow(size_t n);

// In-place iterative radix-2 transform; size must be a power of two.
void Fft(std::vector<double>* re, std::vector<double>* im);

double HzToMel(double hz);
double MelToHz(double mel);

// Triangular filters with peaks equally spaced on the mel scale over
// [0, sample_rate/2]. Row-major [bands x (nfft/2 + 1)]; triangle edges are
// interpolated linearly in hertz, so adjacent responses sum to one between
// the first and last peak.
std::vector<double> MelFilterbank(size_t bands, size_t nfft,
                                  double sample_rate);

// Hann-windowed power spectrum -> mel energies -> natural log with a 1e-10
// floor. Frame count is 1 + floor((samples - win) / hop).
FeatureMatrix LogMel(const std::vector<double>& samples, size_t sample_rate,
                     size_t mel_bins = 64, double frame_len_ms = 25.0,
                     double frame_shift_ms = 10.0);

// Per-bin mean/variance normalization over a window centered on each frame
// and shifted to stay inside the utterance, so short utterances reduce to
// global normalization. Population variance, std floor 1e-8.
FeatureMatrix CmvnSliding(const FeatureMatrix& f, size_t window_frames = 300);

// Exactly target frames: longer inputs are cropped to a contiguous slice
// (uniformly random when rng is given, centered when rng is null), shorter
// inputs wrap around from the start.
FeatureMatrix FixLength(const FeatureMatrix& f, size_t target, Rng* rng);

// Feature file layout: "MCF1", u32 bins, u32 frames, u32 sample rate, then
// bins x frames float32 little-endian values, bin-major.
void WriteFeatures(std::ostream& os, const FeatureMatrix& f);
FeatureMatrix ReadFeatures(std::istream& is, const std::string& context);
void SaveFeatures(const std::string& path, const FeatureMatrix& f);
FeatureMatrix LoadFeatures(const std::string& path);

}  // namespace mcsae

#endif  // MCSAE_FEATURES_H_
