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

#include "mcsae/features.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>

#include "mcsae/errors.h"

namespace mcsae {

namespace {

constexpr double kLogFloor = 1e-10;
constexpr double kStdFloor = 1e-8;
constexpr char kFeatureMagic[4] = {'M', 'C', 'F', '1'};

void PutU32(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void PutF32(std::ostream& os, float v) {
  PutU32(os, std::bit_cast<uint32_t>(v));
}

uint32_t GetU32(std::istream& is, const std::string& context) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw ParseError(context + ": truncated feature file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

float GetF32(std::istream& is, const std::string& context) {
  return std::bit_cast<float>(GetU32(is, context));
}

}  // namespace

std::vector<double> HannWindow(size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  return w;
}

void Fft(std::vector<double>* re_io, std::vector<double>* im_io) {
  std::vector<double>& re = *re_io;
  std::vector<double>& im = *im_io;
  size_t n = re.size();
  if (im.size() != n)
    throw DimensionError("Fft: real and imaginary sizes differ");
  if (n == 0 || (n & (n - 1)) != 0)
    throw ContractError("Fft: size must be a power of two");

  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t base = 0; base < n; base += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t k = 0; k < len / 2; ++k) {
        size_t a = base + k, b = base + k + len / 2;
        double vr = re[b] * cr - im[b] * ci;
        double vi = re[b] * ci + im[b] * cr;
        re[b] = re[a] - vr;
        im[b] = im[a] - vi;
        re[a] += vr;
        im[a] += vi;
        double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> MelFilterbank(size_t bands, size_t nfft,
                                  double sample_rate) {
  if (bands == 0) throw ContractError("MelFilterbank: need at least one band");
  if (nfft == 0 || (nfft & (nfft - 1)) != 0)
    throw ContractError("MelFilterbank: nfft must be a power of two");
  size_t nbins = nfft / 2 + 1;
  double mel_hi = HzToMel(sample_rate / 2.0);
  std::vector<double> edge(bands + 2);
  for (size_t i = 0; i < bands + 2; ++i)
    edge[i] = MelToHz(mel_hi * static_cast<double>(i) /
                      static_cast<double>(bands + 1));
  std::vector<double> bank(bands * nbins, 0.0);
  for (size_t d = 0; d < bands; ++d) {
    double lo = edge[d], mid = edge[d + 1], hi = edge[d + 2];
    for (size_t k = 0; k < nbins; ++k) {
      double f = static_cast<double>(k) * sample_rate /
                 static_cast<double>(nfft);
      double w = 0.0;
      if (f >= lo && f <= mid)
        w = (f - lo) / (mid - lo);
      else if (f > mid && f <= hi)
        w = (hi - f) / (hi - mid);
      if (w > 0.0) bank[d * nbins + k] = w;
    }
  }
  return bank;
}

FeatureMatrix LogMel(const std::vector<double>& samples, size_t sample_rate,
                     size_t mel_bins, double frame_len_ms,
                     double frame_shift_ms) {
  if (sample_rate < 8000)
    throw InputError("log_mel: sample rate below 8 kHz");
  if (mel_bins == 0) throw ContractError("log_mel: need at least one mel bin");
  size_t win = static_cast<size_t>(
      std::lround(frame_len_ms / 1000.0 * static_cast<double>(sample_rate)));
  size_t hop = static_cast<size_t>(
      std::lround(frame_shift_ms / 1000.0 * static_cast<double>(sample_rate)));
  if (win == 0 || hop == 0)
    throw ContractError("log_mel: window and hop must be positive");
  if (samples.size() < win)
    throw InputError("log_mel: audio shorter than one analysis window");

  size_t frames = 1 + (samples.size() - win) / hop;
  size_t nfft = 1;
  while (nfft < win) nfft <<= 1;
  size_t nbins = nfft / 2 + 1;
  std::vector<double> window = HannWindow(win);
  std::vector<double> bank =
      MelFilterbank(mel_bins, nfft, static_cast<double>(sample_rate));

  FeatureMatrix f;
  f.bins = mel_bins;
  f.frames = frames;
  f.frame_len_ms = frame_len_ms;
  f.frame_shift_ms = frame_shift_ms;
  f.sample_rate = sample_rate;
  f.values.assign(mel_bins * frames, 0.0);

  std::vector<double> re(nfft), im(nfft), power(nbins);
  for (size_t t = 0; t < frames; ++t) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const double* x = samples.data() + t * hop;
    for (size_t i = 0; i < win; ++i) re[i] = x[i] * window[i];
    Fft(&re, &im);
    for (size_t k = 0; k < nbins; ++k)
      power[k] = re[k] * re[k] + im[k] * im[k];
    for (size_t d = 0; d < mel_bins; ++d) {
      const double* h = bank.data() + d * nbins;
      double e = 0.0;
      for (size_t k = 0; k < nbins; ++k) e += h[k] * power[k];
      f.values[d * frames + t] = std::log(std::max(e, kLogFloor));
    }
  }
  return f;
}

FeatureMatrix CmvnSliding(const FeatureMatrix& f, size_t window_frames) {
  if (window_frames < 1)
    throw ContractError("cmvn_sliding: window must cover at least one frame");
  FeatureMatrix out = f;
  size_t l = f.frames;
  if (l == 0) return out;
  size_t w = std::min(window_frames, l);
  size_t half = window_frames / 2;

  for (size_t d = 0; d < f.bins; ++d) {
    const double* x = f.values.data() + d * l;
    for (size_t t = 0; t < l; ++t) {
      size_t lo = t > half ? t - half : 0;
      if (lo + w > l) lo = l - w;
      double mean = 0.0;
      for (size_t s = lo; s < lo + w; ++s) mean += x[s];
      mean /= static_cast<double>(w);
      double acc = 0.0;
      for (size_t s = lo; s < lo + w; ++s) {
        double dev = x[s] - mean;
        acc += dev * dev;
      }
      double sd = std::sqrt(acc / static_cast<double>(w));
      out.values[d * l + t] = (x[t] - mean) / std::max(sd, kStdFloor);
    }
  }
  return out;
}

FeatureMatrix FixLength(const FeatureMatrix& f, size_t target, Rng* rng) {
  if (target < 1)
    throw ContractError("fix_length: target must be at least one frame");
  FeatureMatrix out;
  out.bins = f.bins;
  out.frames = target;
  out.frame_len_ms = f.frame_len_ms;
  out.frame_shift_ms = f.frame_shift_ms;
  out.sample_rate = f.sample_rate;
  out.values.assign(f.bins * target, 0.0);
  if (f.frames == 0) return out;

  if (f.frames >= target) {
    size_t span = f.frames - target;
    size_t off = rng ? static_cast<size_t>(
                           rng->UniformInt(0, static_cast<int>(span)))
                     : span / 2;
    for (size_t d = 0; d < f.bins; ++d) {
      const double* src = f.values.data() + d * f.frames + off;
      std::copy(src, src + target, out.values.data() + d * target);
    }
  } else {
    for (size_t d = 0; d < f.bins; ++d) {
      const double* src = f.values.data() + d * f.frames;
      double* dst = out.values.data() + d * target;
      for (size_t t = 0; t < target; ++t) dst[t] = src[t % f.frames];
    }
  }
  return out;
}

void WriteFeatures(std::ostream& os, const FeatureMatrix& f) {
  os.write(kFeatureMagic, 4);
  PutU32(os, static_cast<uint32_t>(f.bins));
  PutU32(os, static_cast<uint32_t>(f.frames));
  PutU32(os, static_cast<uint32_t>(f.sample_rate));
  for (double v : f.values) PutF32(os, static_cast<float>(v));
  if (!os) throw IoError("failed writing feature data");
}

FeatureMatrix ReadFeatures(std::istream& is, const std::string& context) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw ParseError(context + ": not a feature file (bad magic)");
  FeatureMatrix f;
  f.bins = GetU32(is, context);
  f.frames = GetU32(is, context);
  f.sample_rate = GetU32(is, context);
  if (f.bins == 0 || f.bins > (1u << 16))
    throw ParseError(context + ": unreasonable bin count");
  if (f.frames == 0 || f.frames > (1u << 24))
    throw ParseError(context + ": unreasonable frame count");
  if (f.sample_rate == 0)
    throw ParseError(context + ": zero sample rate");
  f.values.resize(f.bins * f.frames);
  for (double& v : f.values) v = GetF32(is, context);
  return f;
}

void SaveFeatures(const std::string& path, const FeatureMatrix& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  WriteFeatures(os, f);
  os.flush();
  if (!os) throw IoError("failed writing " + path);
}

FeatureMatrix LoadFeatures(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return ReadFeatures(is, path);
}

}  // namespace mcsae
