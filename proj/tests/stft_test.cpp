// nrasr/tests/stft_test.cpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "nrasr/rng.hpp"
#include "nrasr/stft.hpp"

namespace nrasr {
namespace {

// Independent oracle: per-frame complex DFT accumulated with std::complex
// and std::polar, window recomputed from its defining formula.
FeatureMatrix dft_oracle(const AudioBuffer& buf, const SpectrogramConfig& cfg) {
  const std::size_t w = cfg.window_len;
  const double pi = std::acos(-1.0);
  std::vector<double> win(w, 1.0);
  for (std::size_t n = 0; n < w && w > 1; ++n) {
    double x = 2.0 * pi * static_cast<double>(n) / static_cast<double>(w - 1);
    if (cfg.window_shape == WindowShape::kHamming) win[n] = 0.54 - 0.46 * std::cos(x);
    if (cfg.window_shape == WindowShape::kHann) win[n] = 0.5 - 0.5 * std::cos(x);
  }
  FeatureMatrix f;
  f.bins = w / 2 + 1;
  f.frames = (buf.samples.size() - w) / cfg.hop_len + 1;
  f.values.assign(f.bins * f.frames, 0.0);
  for (std::size_t t = 0; t < f.frames; ++t)
    for (std::size_t k = 0; k < f.bins; ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (std::size_t n = 0; n < w; ++n) {
        double ang = -2.0 * pi * static_cast<double>(k) * static_cast<double>(n) /
                     static_cast<double>(w);
        acc += win[n] * buf.samples[t * cfg.hop_len + n] * std::polar(1.0, ang);
      }
      f.at(k, t) = std::abs(acc);
    }
  return f;
}

AudioBuffer random_buffer(std::size_t n, std::uint64_t seed) {
  AudioBuffer b;
  b.samples.resize(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) b.samples[i] = uniform_real(rng, -1.0, 1.0);
  return b;
}

TEST(Stft, ZeroSignalGivesZeroMatrix) {
  AudioBuffer b{std::vector<double>(1000, 0.0), 16000};
  SpectrogramConfig cfg;
  FeatureMatrix f = stft_magnitude(b, cfg);
  EXPECT_EQ(161u, f.bins);
  for (double v : f.values) ASSERT_EQ(0.0, v);
}

TEST(Stft, FrameCountFormula) {
  SpectrogramConfig cfg;  // 320/160
  EXPECT_EQ(1u, stft_magnitude(random_buffer(320, 1), cfg).frames);
  EXPECT_EQ(1u, stft_magnitude(random_buffer(479, 2), cfg).frames);
  EXPECT_EQ(2u, stft_magnitude(random_buffer(480, 3), cfg).frames);
  EXPECT_EQ(99u, stft_magnitude(random_buffer(16000, 4), cfg).frames);
}

TEST(Stft, ShortBufferThrows) {
  SpectrogramConfig cfg;
  EXPECT_THROW(stft_magnitude(random_buffer(319, 5), cfg), std::runtime_error);
}

TEST(Stft, BadConfigThrows) {
  SpectrogramConfig cfg;
  cfg.hop_len = 0;
  EXPECT_THROW(StftPlan{cfg}, std::runtime_error);
  cfg.hop_len = 400;  // > window
  EXPECT_THROW(StftPlan{cfg}, std::runtime_error);
}

TEST(Stft, SinusoidPeaksAtItsBin) {
  SpectrogramConfig cfg;
  cfg.window_shape = WindowShape::kRectangular;
  const std::size_t j = 20;  // bin-center frequency j * 16000 / 320 = 1000 Hz
  AudioBuffer b;
  b.samples.resize(1600);
  const double pi = std::acos(-1.0);
  for (std::size_t i = 0; i < b.samples.size(); ++i)
    b.samples[i] = std::sin(2.0 * pi * static_cast<double>(j) * static_cast<double>(i) /
                            static_cast<double>(cfg.window_len));
  FeatureMatrix f = stft_magnitude(b, cfg);
  for (std::size_t t = 0; t < f.frames; ++t) {
    std::size_t argmax = 0;
    for (std::size_t k = 1; k < f.bins; ++k)
      if (f.at(k, t) > f.at(argmax, t)) argmax = k;
    EXPECT_EQ(j, argmax) << "frame " << t;
  }
}

TEST(Stft, AgreesWithDftOracleAllWindows) {
  for (WindowShape shape :
       {WindowShape::kRectangular, WindowShape::kHamming, WindowShape::kHann}) {
    SpectrogramConfig cfg;
    cfg.window_shape = shape;
    AudioBuffer b = random_buffer(4000, 42 + static_cast<int>(shape));
    FeatureMatrix got = stft_magnitude(b, cfg);
    FeatureMatrix want = dft_oracle(b, cfg);
    ASSERT_EQ(want.bins, got.bins);
    ASSERT_EQ(want.frames, got.frames);
    for (std::size_t i = 0; i < want.values.size(); ++i) {
      double tol = 1e-9 * std::max(1.0, std::fabs(want.values[i]));
      ASSERT_NEAR(want.values[i], got.values[i], tol) << "cell " << i;
    }
  }
}

TEST(Stft, SmallWindowAgainstOracle) {
  SpectrogramConfig cfg;
  cfg.window_len = 8;
  cfg.hop_len = 3;
  cfg.window_shape = WindowShape::kHann;
  AudioBuffer b = random_buffer(41, 9);
  FeatureMatrix got = stft_magnitude(b, cfg);
  FeatureMatrix want = dft_oracle(b, cfg);
  ASSERT_EQ(5u, got.bins);
  ASSERT_EQ((41u - 8u) / 3u + 1u, got.frames);
  for (std::size_t i = 0; i < want.values.size(); ++i)
    ASSERT_NEAR(want.values[i], got.values[i], 1e-9);
}

TEST(WindowShape, ParseAndReject) {
  EXPECT_EQ(WindowShape::kHamming, window_shape_from_string("hamming"));
  EXPECT_EQ(WindowShape::kHann, window_shape_from_string("hann"));
  EXPECT_EQ(WindowShape::kRectangular, window_shape_from_string("rectangular"));
  EXPECT_THROW(window_shape_from_string("blackman"), std::runtime_error);
}

TEST(NormalizeFeatures, ConstantMapsToZeros) {
  FeatureMatrix f{2, 3, std::vector<double>(6, 3.7)};
  FeatureMatrix out = normalize_features(f);
  for (double v : out.values) EXPECT_EQ(0.0, v);

  FeatureMatrix zeros{2, 2, std::vector<double>(4, 0.0)};
  for (double v : normalize_features(zeros).values) EXPECT_EQ(0.0, v);
}

TEST(NormalizeFeatures, TwoCellExample) {
  FeatureMatrix f{1, 2, {0.0, 2.0}};
  FeatureMatrix out = normalize_features(f);
  EXPECT_DOUBLE_EQ(-1.0, out.values[0]);
  EXPECT_DOUBLE_EQ(1.0, out.values[1]);
}

TEST(NormalizeFeatures, MeanZeroVarOneProperty) {
  AudioBuffer b = random_buffer(8000, 17);
  FeatureMatrix f = stft_magnitude(b, SpectrogramConfig{});
  FeatureMatrix out = normalize_features(f);
  double n = static_cast<double>(out.values.size());
  double mean = 0;
  for (double v : out.values) mean += v;
  mean /= n;
  double var = 0;
  for (double v : out.values) var += (v - mean) * (v - mean);
  var /= n;
  EXPECT_NEAR(0.0, mean, 1e-9);
  EXPECT_NEAR(1.0, var, 1e-9);
}

}  // namespace
}  // namespace nrasr
