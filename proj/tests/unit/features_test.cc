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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mcsae/errors.h"
#include "mcsae/features.h"
#include "mcsae/rng.h"
#include "mcsae/wav.h"

using namespace mcsae;

namespace {

// Quadratic-time reference transform.
void DftOracle(const std::vector<double>& re, const std::vector<double>& im,
               std::vector<double>* ore, std::vector<double>* oim) {
  size_t n = re.size();
  ore->assign(n, 0.0);
  oim->assign(n, 0.0);
  for (size_t k = 0; k < n; ++k) {
    for (size_t j = 0; j < n; ++j) {
      double ang = -2.0 * std::numbers::pi * static_cast<double>(k * j) /
                   static_cast<double>(n);
      double c = std::cos(ang), s = std::sin(ang);
      (*ore)[k] += re[j] * c - im[j] * s;
      (*oim)[k] += re[j] * s + im[j] * c;
    }
  }
}

FeatureMatrix RandFeatures(size_t bins, size_t frames, uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix f;
  f.bins = bins;
  f.frames = frames;
  f.values.resize(bins * frames);
  for (double& v : f.values) v = rng.Normal() * 2.0 + 0.5;
  return f;
}

void Put16(std::ostringstream& os, uint16_t v) {
  os.put(static_cast<char>(v & 0xff));
  os.put(static_cast<char>((v >> 8) & 0xff));
}

void Put32(std::ostringstream& os, uint32_t v) {
  Put16(os, static_cast<uint16_t>(v & 0xffff));
  Put16(os, static_cast<uint16_t>(v >> 16));
}

// Minimal mono PCM file with configurable fmt fields for rejection tests.
std::string MakeWavBytes(uint16_t format, uint16_t channels, uint32_t sr,
                         uint16_t bits, const std::vector<int16_t>& samples,
                         bool junk_chunk = false) {
  std::ostringstream os;
  std::ostringstream body;
  if (junk_chunk) {
    body.write("junk", 4);
    Put32(body, 5);
    body.write("abcde\0", 6);  // odd size, padded
  }
  body.write("fmt ", 4);
  Put32(body, 16);
  Put16(body, format);
  Put16(body, channels);
  Put32(body, sr);
  Put32(body, sr * channels * bits / 8);
  Put16(body, static_cast<uint16_t>(channels * bits / 8));
  Put16(body, bits);
  body.write("data", 4);
  Put32(body, static_cast<uint32_t>(samples.size() * 2));
  for (int16_t s : samples) Put16(body, static_cast<uint16_t>(s));
  std::string b = body.str();
  os.write("RIFF", 4);
  Put32(os, static_cast<uint32_t>(4 + b.size()));
  os.write("WAVE", 4);
  os.write(b.data(), static_cast<std::streamsize>(b.size()));
  return os.str();
}

}  // namespace

TEST_CASE("hann window") {
  SUBCASE("matches the closed form") {
    std::vector<double> w = HannWindow(400);
    for (size_t i = 0; i < 400; ++i) {
      double want = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / 399.0);
      CHECK(w[i] == want);
    }
  }

  SUBCASE("endpoints vanish and an odd window peaks at one") {
    std::vector<double> w = HannWindow(33);
    CHECK(w.front() == doctest::Approx(0.0));
    CHECK(w.back() == doctest::Approx(0.0));
    CHECK(w[16] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("degenerate sizes stay usable") {
    CHECK(HannWindow(0).empty());
    CHECK(HannWindow(1) == std::vector<double>{1.0});
  }
}

TEST_CASE("fft") {
  Rng rng(61);

  SUBCASE("matches the direct transform") {
    for (size_t n : {8, 64, 512}) {
      std::vector<double> re(n), im(n);
      for (double& v : re) v = rng.Normal();
      for (double& v : im) v = rng.Normal();
      std::vector<double> want_re, want_im;
      DftOracle(re, im, &want_re, &want_im);
      Fft(&re, &im);
      double scale = 1.0;
      for (double v : want_re) scale = std::max(scale, std::abs(v));
      for (double v : want_im) scale = std::max(scale, std::abs(v));
      for (size_t k = 0; k < n; ++k) {
        CHECK(std::abs(re[k] - want_re[k]) <= 1e-9 * scale);
        CHECK(std::abs(im[k] - want_im[k]) <= 1e-9 * scale);
      }
    }
  }

  SUBCASE("impulse spreads flat") {
    std::vector<double> re(16, 0.0), im(16, 0.0);
    re[0] = 1.0;
    Fft(&re, &im);
    for (size_t k = 0; k < 16; ++k) {
      CHECK(re[k] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(im[k] == doctest::Approx(0.0));
    }
  }

  SUBCASE("constant signal is pure DC") {
    std::vector<double> re(32, 3.0), im(32, 0.0);
    Fft(&re, &im);
    CHECK(re[0] == doctest::Approx(96.0).epsilon(1e-12));
    for (size_t k = 1; k < 32; ++k) {
      CHECK(std::abs(re[k]) < 1e-10);
      CHECK(std::abs(im[k]) < 1e-10);
    }
  }

  SUBCASE("bin-aligned sine lands on its bin pair") {
    const size_t n = 64, bin = 5;
    std::vector<double> re(n), im(n, 0.0);
    for (size_t t = 0; t < n; ++t)
      re[t] = std::sin(2.0 * std::numbers::pi * bin * t / n);
    Fft(&re, &im);
    for (size_t k = 0; k < n; ++k) {
      double mag = std::hypot(re[k], im[k]);
      if (k == bin || k == n - bin)
        CHECK(mag == doctest::Approx(n / 2.0).epsilon(1e-10));
      else
        CHECK(mag < 1e-9);
    }
  }

  SUBCASE("non power of two is rejected") {
    std::vector<double> re(12, 0.0), im(12, 0.0);
    CHECK_THROWS_AS(Fft(&re, &im), ContractError);
    std::vector<double> re0, im0;
    CHECK_THROWS_AS(Fft(&re0, &im0), ContractError);
    std::vector<double> re8(8, 0.0), im4(4, 0.0);
    CHECK_THROWS_AS(Fft(&re8, &im4), DimensionError);
  }
}

TEST_CASE("mel scale and filterbank") {
  SUBCASE("scale anchors and round trip") {
    CHECK(HzToMel(0.0) == 0.0);
    CHECK(HzToMel(1000.0) == doctest::Approx(1000.0).epsilon(1e-4));
    for (double hz : {50.0, 300.0, 1000.0, 4000.0, 7999.0})
      CHECK(MelToHz(HzToMel(hz)) == doctest::Approx(hz).epsilon(1e-12));
    CHECK(HzToMel(200.0) < HzToMel(201.0));
  }

  SUBCASE("per-bin responses never exceed one in total") {
    std::vector<double> bank = MelFilterbank(64, 512, 16000.0);
    const size_t nbins = 257;
    REQUIRE(bank.size() == 64 * nbins);
    for (size_t k = 0; k < nbins; ++k) {
      double total = 0.0;
      for (size_t d = 0; d < 64; ++d) {
        CHECK(bank[d * nbins + k] >= 0.0);
        total += bank[d * nbins + k];
      }
      CHECK(total <= 1.0 + 1e-9);
    }
  }

  SUBCASE("responses sum to exactly one between the outer peaks") {
    std::vector<double> bank = MelFilterbank(64, 512, 16000.0);
    const size_t nbins = 257;
    double mel_hi = HzToMel(8000.0);
    double first_peak = MelToHz(mel_hi / 65.0);
    double last_peak = MelToHz(mel_hi * 64.0 / 65.0);
    for (size_t k = 0; k < nbins; ++k) {
      double f = k * 16000.0 / 512.0;
      if (f <= first_peak || f >= last_peak) continue;
      double total = 0.0;
      for (size_t d = 0; d < 64; ++d) total += bank[d * nbins + k];
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  SUBCASE("every band has support") {
    std::vector<double> bank = MelFilterbank(64, 512, 16000.0);
    const size_t nbins = 257;
    for (size_t d = 0; d < 64; ++d) {
      double peak = 0.0;
      for (size_t k = 0; k < nbins; ++k)
        peak = std::max(peak, bank[d * nbins + k]);
      CHECK(peak > 0.0);
    }
  }

  SUBCASE("bad arguments are rejected") {
    CHECK_THROWS_AS(MelFilterbank(0, 512, 16000.0), ContractError);
    CHECK_THROWS_AS(MelFilterbank(64, 500, 16000.0), ContractError);
  }
}

TEST_CASE("log mel extraction") {
  SUBCASE("one second at 16 kHz gives 98 frames") {
    std::vector<double> samples(16000, 0.0);
    FeatureMatrix f = LogMel(samples, 16000);
    CHECK(f.bins == 64);
    CHECK(f.frames == 98);
    CHECK(f.sample_rate == 16000);
    CHECK(f.values.size() == 64 * 98);
  }

  SUBCASE("frame count follows the framing formula") {
    for (size_t n : {400u, 559u, 560u, 8000u}) {
      FeatureMatrix f = LogMel(std::vector<double>(n, 0.1), 16000, 8);
      CHECK(f.frames == 1 + (n - 400) / 160);
    }
  }

  SUBCASE("silence hits the log floor everywhere") {
    FeatureMatrix f = LogMel(std::vector<double>(8000, 0.0), 16000, 16);
    for (double v : f.values) CHECK(v == std::log(1e-10));
  }

  SUBCASE("a 1 kHz tone peaks in the band that covers 1 kHz") {
    std::vector<double> samples(8000);
    for (size_t t = 0; t < samples.size(); ++t)
      samples[t] = 0.8 * std::sin(2.0 * std::numbers::pi * 1000.0 * t / 16000.0);
    FeatureMatrix f = LogMel(samples, 16000);

    // Expected band from the analytic triangle responses at 1 kHz.
    double mel_hi = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
    std::vector<double> edge(66);
    for (size_t i = 0; i < 66; ++i)
      edge[i] = 700.0 * (std::pow(10.0, mel_hi * i / 65.0 / 2595.0) - 1.0);
    size_t want_band = 0;
    double best = -1.0;
    for (size_t d = 0; d < 64; ++d) {
      double lo = edge[d], mid = edge[d + 1], hi = edge[d + 2], w = 0.0;
      if (1000.0 >= lo && 1000.0 <= mid)
        w = (1000.0 - lo) / (mid - lo);
      else if (1000.0 > mid && 1000.0 <= hi)
        w = (hi - 1000.0) / (hi - mid);
      if (w > best) {
        best = w;
        want_band = d;
      }
    }

    std::vector<double> band_mean(64, 0.0);
    for (size_t d = 0; d < 64; ++d)
      for (size_t t = 0; t < f.frames; ++t) band_mean[d] += f.At(d, t);
    size_t got_band = 0;
    for (size_t d = 1; d < 64; ++d)
      if (band_mean[d] > band_mean[got_band]) got_band = d;
    CHECK(got_band == want_band);
  }

  SUBCASE("extraction is deterministic and finite") {
    Rng rng(77);
    std::vector<double> samples(6400);
    for (double& s : samples) s = 0.3 * rng.Normal();
    FeatureMatrix a = LogMel(samples, 16000, 32);
    FeatureMatrix b = LogMel(samples, 16000, 32);
    CHECK(a.values == b.values);
    for (double v : a.values) CHECK(std::isfinite(v));
  }

  SUBCASE("bad input is rejected") {
    CHECK_THROWS_AS(LogMel(std::vector<double>(399, 0.0), 16000),
                    InputError);
    CHECK_THROWS_AS(LogMel(std::vector<double>(16000, 0.0), 4000),
                    InputError);
    CHECK_THROWS_AS(LogMel(std::vector<double>(16000, 0.0), 16000, 0),
                    ContractError);
  }
}

TEST_CASE("sliding cmvn") {
  SUBCASE("constant input normalizes to zero") {
    FeatureMatrix f;
    f.bins = 3;
    f.frames = 50;
    f.values.assign(150, 4.25);  // exactly representable, so exactly zero
    FeatureMatrix out = CmvnSliding(f, 300);
    for (double v : out.values) CHECK(v == 0.0);

    f.values.assign(150, 4.2);  // rounding residue stays under the std floor
    out = CmvnSliding(f, 300);
    for (double v : out.values) CHECK(std::abs(v) <= 1e-6);
  }

  SUBCASE("short utterances reduce to global normalization") {
    FeatureMatrix f = RandFeatures(4, 200, 91);
    FeatureMatrix out = CmvnSliding(f, 300);
    for (size_t d = 0; d < 4; ++d) {
      double mean = 0.0, sq = 0.0;
      for (size_t t = 0; t < 200; ++t) {
        mean += f.At(d, t);
        sq += f.At(d, t) * f.At(d, t);
      }
      mean /= 200.0;
      double sd = std::sqrt(sq / 200.0 - mean * mean);
      for (size_t t = 0; t < 200; ++t) {
        double want = (f.At(d, t) - mean) / std::max(sd, 1e-8);
        CHECK(out.At(d, t) == doctest::Approx(want).epsilon(1e-10));
      }
    }
  }

  SUBCASE("interior frames use their centered window") {
    FeatureMatrix f = RandFeatures(4, 900, 92);
    FeatureMatrix out = CmvnSliding(f, 300);
    const size_t t = 450, lo = 300;
    for (size_t d = 0; d < 4; ++d) {
      double mean = 0.0, sq = 0.0;
      for (size_t s = lo; s < lo + 300; ++s) {
        mean += f.At(d, s);
        sq += f.At(d, s) * f.At(d, s);
      }
      mean /= 300.0;
      double sd = std::sqrt(sq / 300.0 - mean * mean);
      double want = (f.At(d, t) - mean) / std::max(sd, 1e-8);
      CHECK(out.At(d, t) == doctest::Approx(want).epsilon(1e-10));

      // The same window, fully normalized, has mean 0 and unit variance.
      double nmean = 0.0, nsq = 0.0;
      for (size_t s = lo; s < lo + 300; ++s) {
        double z = (f.At(d, s) - mean) / std::max(sd, 1e-8);
        nmean += z;
        nsq += z * z;
      }
      nmean /= 300.0;
      CHECK(std::abs(nmean) <= 1e-6);
      CHECK(std::abs(nsq / 300.0 - nmean * nmean - 1.0) <= 1e-6);
    }
  }

  SUBCASE("edge frames shift the window to stay inside") {
    FeatureMatrix f = RandFeatures(2, 900, 93);
    FeatureMatrix out = CmvnSliding(f, 300);
    struct Probe {
      size_t t, lo;
    };
    // Centering t=899 would start at 749 and overrun, so it shifts to 600.
    for (Probe p : {Probe{0, 0}, Probe{100, 0}, Probe{899, 600}}) {
      for (size_t d = 0; d < 2; ++d) {
        double mean = 0.0, sq = 0.0;
        for (size_t s = p.lo; s < p.lo + 300; ++s) {
          mean += f.At(d, s);
          sq += f.At(d, s) * f.At(d, s);
        }
        mean /= 300.0;
        double sd = std::sqrt(sq / 300.0 - mean * mean);
        double want = (f.At(d, p.t) - mean) / std::max(sd, 1e-8);
        CHECK(out.At(d, p.t) == doctest::Approx(want).epsilon(1e-10));
      }
    }
  }

  SUBCASE("window of one flattens everything") {
    FeatureMatrix f = RandFeatures(2, 20, 94);
    FeatureMatrix out = CmvnSliding(f, 1);
    for (double v : out.values) CHECK(v == 0.0);
  }

  SUBCASE("zero window is rejected, metadata survives") {
    FeatureMatrix f = RandFeatures(2, 20, 95);
    f.frame_len_ms = 20.0;
    f.sample_rate = 8000;
    CHECK_THROWS_AS(CmvnSliding(f, 0), ContractError);
    FeatureMatrix out = CmvnSliding(f, 10);
    CHECK(out.bins == 2);
    CHECK(out.frames == 20);
    CHECK(out.frame_len_ms == 20.0);
    CHECK(out.sample_rate == 8000);
  }
}

TEST_CASE("fix length") {
  SUBCASE("matching length is an identity") {
    FeatureMatrix f = RandFeatures(3, 50, 96);
    CHECK(FixLength(f, 50, nullptr).values == f.values);
    Rng rng(1);
    CHECK(FixLength(f, 50, &rng).values == f.values);
  }

  SUBCASE("center crop takes the middle slice") {
    FeatureMatrix f = RandFeatures(3, 1500, 97);
    FeatureMatrix out = FixLength(f, 1200, nullptr);
    REQUIRE(out.frames == 1200);
    for (size_t d = 0; d < 3; ++d)
      for (size_t t = 0; t < 1200; ++t)
        CHECK(out.At(d, t) == f.At(d, 150 + t));
  }

  SUBCASE("random crop is a contiguous slice with varying offsets") {
    FeatureMatrix f = RandFeatures(3, 100, 98);
    std::vector<size_t> offsets;
    for (uint64_t seed = 1; seed <= 8; ++seed) {
      Rng rng(seed);
      FeatureMatrix out = FixLength(f, 50, &rng);
      REQUIRE(out.frames == 50);
      // Locate the slice by its first column, then demand full equality.
      size_t off = 100;
      for (size_t cand = 0; cand <= 50; ++cand) {
        bool match = true;
        for (size_t d = 0; d < 3 && match; ++d)
          match = out.At(d, 0) == f.At(d, cand);
        if (match) {
          off = cand;
          break;
        }
      }
      REQUIRE(off <= 50);
      for (size_t d = 0; d < 3; ++d)
        for (size_t t = 0; t < 50; ++t)
          CHECK(out.At(d, t) == f.At(d, off + t));
      offsets.push_back(off);
    }
    bool varied = false;
    for (size_t o : offsets) varied = varied || o != offsets[0];
    CHECK(varied);

    Rng a(5), b(5);
    CHECK(FixLength(f, 50, &a).values == FixLength(f, 50, &b).values);
  }

  SUBCASE("short input wraps around from the start") {
    FeatureMatrix f = RandFeatures(2, 700, 99);
    FeatureMatrix out = FixLength(f, 1200, nullptr);
    REQUIRE(out.frames == 1200);
    for (size_t d = 0; d < 2; ++d)
      for (size_t t = 0; t < 1200; ++t)
        CHECK(out.At(d, t) == f.At(d, t % 700));
  }

  SUBCASE("output length is always the target") {
    for (size_t l : {1u, 7u, 49u, 50u, 51u, 120u}) {
      FeatureMatrix f = RandFeatures(2, l, 100 + l);
      CHECK(FixLength(f, 50, nullptr).frames == 50);
    }
  }

  SUBCASE("zero target is rejected, metadata survives") {
    FeatureMatrix f = RandFeatures(2, 30, 101);
    f.frame_shift_ms = 12.5;
    CHECK_THROWS_AS(FixLength(f, 0, nullptr), ContractError);
    CHECK(FixLength(f, 10, nullptr).frame_shift_ms == 12.5);
  }
}

TEST_CASE("feature file format") {
  SUBCASE("golden byte layout") {
    FeatureMatrix f;
    f.bins = 2;
    f.frames = 3;
    f.sample_rate = 16000;
    f.values = {1.5, -2.0, 0.25, 1.0, 0.5, -0.75};
    std::ostringstream os(std::ios::binary);
    WriteFeatures(os, f);
    const unsigned char want[] = {
        'M',  'C',  'F',  '1',                    // magic
        0x02, 0x00, 0x00, 0x00,                   // bins
        0x03, 0x00, 0x00, 0x00,                   // frames
        0x80, 0x3e, 0x00, 0x00,                   // sample rate 16000
        0x00, 0x00, 0xc0, 0x3f,                   // 1.5f
        0x00, 0x00, 0x00, 0xc0,                   // -2.0f
        0x00, 0x00, 0x80, 0x3e,                   // 0.25f
        0x00, 0x00, 0x80, 0x3f,                   // 1.0f
        0x00, 0x00, 0x00, 0x3f,                   // 0.5f
        0x00, 0x00, 0x40, 0xbf,                   // -0.75f
    };
    std::string got = os.str();
    REQUIRE(got.size() == sizeof(want));
    for (size_t i = 0; i < sizeof(want); ++i)
      CHECK(static_cast<unsigned char>(got[i]) == want[i]);
  }

  SUBCASE("round trip through a stream") {
    FeatureMatrix f = RandFeatures(5, 17, 102);
    f.sample_rate = 8000;
    std::ostringstream os(std::ios::binary);
    WriteFeatures(os, f);
    std::istringstream is(os.str(), std::ios::binary);
    FeatureMatrix g = ReadFeatures(is, "mem");
    CHECK(g.bins == 5);
    CHECK(g.frames == 17);
    CHECK(g.sample_rate == 8000);
    REQUIRE(g.values.size() == f.values.size());
    for (size_t i = 0; i < f.values.size(); ++i)
      CHECK(g.values[i] ==
            static_cast<double>(static_cast<float>(f.values[i])));
  }

  SUBCASE("round trip through a file") {
    FeatureMatrix f = RandFeatures(3, 9, 103);
    std::string path = "/tmp/mcsae_features_test.mcf";
    SaveFeatures(path, f);
    FeatureMatrix g = LoadFeatures(path);
    CHECK(g.bins == f.bins);
    CHECK(g.frames == f.frames);
  }

  SUBCASE("damage is rejected") {
    FeatureMatrix f = RandFeatures(2, 2, 104);
    std::ostringstream os(std::ios::binary);
    WriteFeatures(os, f);
    std::string bytes = os.str();

    std::string bad_magic = bytes;
    bad_magic[3] = '9';
    std::istringstream m(bad_magic, std::ios::binary);
    CHECK_THROWS_AS(ReadFeatures(m, "mem"), ParseError);

    std::istringstream trunc(bytes.substr(0, bytes.size() - 2),
                             std::ios::binary);
    CHECK_THROWS_AS(ReadFeatures(trunc, "mem"), ParseError);

    std::istringstream header_only(bytes.substr(0, 10), std::ios::binary);
    CHECK_THROWS_AS(ReadFeatures(header_only, "mem"), ParseError);

    CHECK_THROWS_AS(LoadFeatures("/nonexistent/f.mcf"), IoError);
  }
}

TEST_CASE("wav io") {
  SUBCASE("golden minimal file") {
    std::ostringstream os(std::ios::binary);
    WriteWavStream(os, {0.5}, 8000);
    const unsigned char want[] = {
        'R',  'I',  'F',  'F',  0x26, 0x00, 0x00, 0x00,  // RIFF, size 38
        'W',  'A',  'V',  'E',  'f',  'm',  't',  ' ',   //
        0x10, 0x00, 0x00, 0x00,                          // fmt size 16
        0x01, 0x00, 0x01, 0x00,                          // PCM, mono
        0x40, 0x1f, 0x00, 0x00,                          // 8000 Hz
        0x80, 0x3e, 0x00, 0x00,                          // byte rate 16000
        0x02, 0x00, 0x10, 0x00,                          // align 2, 16 bit
        'd',  'a',  't',  'a',  0x02, 0x00, 0x00, 0x00,  // data, 2 bytes
        0x00, 0x40,                                      // 16384
    };
    std::string got = os.str();
    REQUIRE(got.size() == sizeof(want));
    for (size_t i = 0; i < sizeof(want); ++i)
      CHECK(static_cast<unsigned char>(got[i]) == want[i]);

    std::istringstream is(got, std::ios::binary);
    WavData wav = ReadWavStream(is, "mem");
    CHECK(wav.sample_rate == 8000);
    REQUIRE(wav.samples.size() == 1);
    CHECK(wav.samples[0] == 0.5);
  }

  SUBCASE("round trip stays within one quantization step") {
    Rng rng(105);
    std::vector<double> samples(512);
    for (double& s : samples) s = 0.9 * std::tanh(rng.Normal());
    std::ostringstream os(std::ios::binary);
    WriteWavStream(os, samples, 16000);
    std::istringstream is(os.str(), std::ios::binary);
    WavData wav = ReadWavStream(is, "mem");
    CHECK(wav.sample_rate == 16000);
    REQUIRE(wav.samples.size() == 512);
    for (size_t i = 0; i < 512; ++i)
      CHECK(std::abs(wav.samples[i] - samples[i]) <= 0.5 / 32768.0 + 1e-12);
  }

  SUBCASE("file round trip") {
    std::string path = "/tmp/mcsae_wav_test.wav";
    WriteWav(path, {0.0, 0.25, -0.25, 0.99}, 16000);
    WavData wav = ReadWav(path);
    CHECK(wav.sample_rate == 16000);
    CHECK(wav.samples.size() == 4);
  }

  SUBCASE("out-of-range samples clamp") {
    std::ostringstream os(std::ios::binary);
    WriteWavStream(os, {1.5, -1.5}, 16000);
    std::istringstream is(os.str(), std::ios::binary);
    WavData wav = ReadWavStream(is, "mem");
    CHECK(wav.samples[0] == doctest::Approx(32767.0 / 32768.0));
    CHECK(wav.samples[1] == -1.0);
  }

  SUBCASE("unknown chunks are skipped") {
    std::string bytes = MakeWavBytes(1, 1, 16000, 16, {100, -100}, true);
    std::istringstream is(bytes, std::ios::binary);
    WavData wav = ReadWavStream(is, "mem");
    REQUIRE(wav.samples.size() == 2);
    CHECK(wav.samples[0] == doctest::Approx(100.0 / 32768.0));
  }

  SUBCASE("unsupported layouts are rejected") {
    auto expect_reject = [](const std::string& bytes) {
      std::istringstream is(bytes, std::ios::binary);
      CHECK_THROWS_AS(ReadWavStream(is, "mem"), ParseError);
    };
    expect_reject(MakeWavBytes(3, 1, 16000, 16, {0}));  // float format
    expect_reject(MakeWavBytes(1, 2, 16000, 16, {0}));  // stereo
    expect_reject(MakeWavBytes(1, 1, 16000, 8, {0}));   // 8-bit
    expect_reject("not a wav file at all............");
    std::string good = MakeWavBytes(1, 1, 16000, 16, {1, 2, 3});
    expect_reject(good.substr(0, good.size() - 3));  // truncated data
    CHECK_THROWS_AS(ReadWav("/nonexistent/x.wav"), IoError);
  }
}
