// nrasr/stft.hpp

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

// Short-time Fourier transform magnitude features.
//
// Direct DFT per frame with the window folded into precomputed cos/sin
// tables: bin k of frame t is |sum_n w[n] s[t*hop+n] exp(-i 2 pi k n / W)|
// for k = 0..W/2. Frames are non-padded: floor((len - W)/hop) + 1.

#ifndef NRASR_STFT_HPP_
#define NRASR_STFT_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "nrasr/audio.hpp"
#include "nrasr/common.hpp"

namespace nrasr {

enum class WindowShape { kRectangular, kHamming, kHann };

inline WindowShape window_shape_from_string(const std::string& s) {
  if (s == "rectangular") return WindowShape::kRectangular;
  if (s == "hamming") return WindowShape::kHamming;
  if (s == "hann") return WindowShape::kHann;
  NRASR_ERR("unknown window shape '" << s << "' (want rectangular|hamming|hann)");
}

struct SpectrogramConfig {
  std::size_t window_len = 320;  // 20 ms at 16 kHz
  std::size_t hop_len = 160;     // 10 ms at 16 kHz
  WindowShape window_shape = WindowShape::kHamming;
};

struct FeatureMatrix {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<double> values;  // row-major [bin][frame]

  double& at(std::size_t b, std::size_t f) { return values[b * frames + f]; }
  double at(std::size_t b, std::size_t f) const { return values[b * frames + f]; }
};

inline std::vector<double> make_window(WindowShape shape, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n == 1 || shape == WindowShape::kRectangular) return w;
  const double pi = std::acos(-1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double phase = 2.0 * pi * static_cast<double>(i) / static_cast<double>(n - 1);
    if (shape == WindowShape::kHamming)
      w[i] = 0.54 - 0.46 * std::cos(phase);
    else  // Hann
      w[i] = 0.5 * (1.0 - std::cos(phase));
  }
  return w;
}

// Precomputed transform for one SpectrogramConfig; apply() is const and
// safe to share across threads.
class StftPlan {
 public:
  explicit StftPlan(const SpectrogramConfig& cfg) : cfg_(cfg) {
    NRASR_REQUIRE(cfg.window_len > 0, "stft: zero window length");
    NRASR_REQUIRE(cfg.hop_len > 0 && cfg.hop_len <= cfg.window_len,
                  "stft: hop " << cfg.hop_len << " must be in (0, window " << cfg.window_len
                               << "]");
    std::size_t w = cfg.window_len;
    bins_ = w / 2 + 1;
    std::vector<double> win = make_window(cfg.window_shape, w);
    cos_.resize(bins_ * w);
    sin_.resize(bins_ * w);
    const double pi = std::acos(-1.0);
    for (std::size_t k = 0; k < bins_; ++k)
      for (std::size_t n = 0; n < w; ++n) {
        double ang = 2.0 * pi * static_cast<double>(k) * static_cast<double>(n) /
                     static_cast<double>(w);
        cos_[k * w + n] = win[n] * std::cos(ang);
        sin_[k * w + n] = win[n] * std::sin(ang);
      }
  }

  std::size_t bins() const { return bins_; }
  const SpectrogramConfig& config() const { return cfg_; }

  FeatureMatrix apply(const AudioBuffer& buf) const {
    std::size_t w = cfg_.window_len;
    NRASR_REQUIRE(buf.samples.size() >= w,
                  "stft: buffer of " << buf.samples.size()
                                     << " samples shorter than one window (" << w << ")");
    std::size_t frames = (buf.samples.size() - w) / cfg_.hop_len + 1;
    FeatureMatrix f;
    f.bins = bins_;
    f.frames = frames;
    f.values.assign(bins_ * frames, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
      const double* s = buf.samples.data() + t * cfg_.hop_len;
      for (std::size_t k = 0; k < bins_; ++k) {
        const double* ck = cos_.data() + k * w;
        const double* sk = sin_.data() + k * w;
        double re = 0.0, im = 0.0;
        for (std::size_t n = 0; n < w; ++n) {
          re += ck[n] * s[n];
          im -= sk[n] * s[n];
        }
        f.at(k, t) = std::hypot(re, im);
      }
    }
    return f;
  }

 private:
  SpectrogramConfig cfg_;
  std::size_t bins_ = 0;
  std::vector<double> cos_, sin_;
};

inline FeatureMatrix stft_magnitude(const AudioBuffer& buf, const SpectrogramConfig& cfg) {
  return StftPlan(cfg).apply(buf);
}

// Standardizes all cells to mean 0 / variance 1 per utterance; constant
// input (including all zeros) maps to all zeros.
inline FeatureMatrix normalize_features(const FeatureMatrix& f) {
  NRASR_REQUIRE(!f.values.empty(), "normalize_features: empty matrix");
  FeatureMatrix out = f;
  bool constant = true;
  for (double v : f.values)
    if (v != f.values[0]) {
      constant = false;
      break;
    }
  if (constant) {
    for (double& v : out.values) v = 0.0;
    return out;
  }
  double n = static_cast<double>(f.values.size());
  double mean = 0.0;
  for (double v : f.values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : f.values) var += (v - mean) * (v - mean);
  var /= n;
  if (var <= 0.0) {
    for (double& v : out.values) v = 0.0;
    return out;
  }
  double inv_std = 1.0 / std::sqrt(var);
  for (double& v : out.values) v = (v - mean) * inv_std;
  return out;
}

}  // namespace nrasr

#endif  // NRASR_STFT_HPP_
