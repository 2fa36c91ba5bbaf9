// nrasr/audio.hpp

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

// Additive noise mixing at an exact signal-to-noise ratio.
//
// The gain is computed over the noise segment actually added (not the whole
// noise file), so the per-utterance SNR is exact by construction. Noise
// shorter than the utterance is tiled circularly from the random offset.
// Mixed samples may exceed [-1, 1]; they are kept unclipped in memory.

#ifndef NRASR_AUDIO_HPP_
#define NRASR_AUDIO_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nrasr/common.hpp"
#include "nrasr/csv.hpp"
#include "nrasr/rng.hpp"

namespace nrasr {

struct AudioBuffer {
  std::vector<double> samples;
  std::uint32_t sample_rate_hz = 16000;
};

struct MixRecipe {
  std::string noise_label;
  double snr_db = 0.0;
  std::size_t noise_offset = 0;
  double gain = 1.0;
};

// Mean squared amplitude.
inline double rms_power(const AudioBuffer& buf) {
  NRASR_REQUIRE(!buf.samples.empty(), "rms_power: empty buffer");
  double acc = 0.0;
  for (double s : buf.samples) acc += s * s;
  return acc / static_cast<double>(buf.samples.size());
}

// alpha such that 10*log10(clean_power / (alpha^2 * noise_power)) = snr_db.
inline double mixing_gain(double clean_power, double noise_power, double snr_db) {
  NRASR_REQUIRE(clean_power > 0, "mixing_gain: clean power " << clean_power
                                                             << " (silent input?)");
  NRASR_REQUIRE(noise_power > 0, "mixing_gain: noise power " << noise_power
                                                             << " (silent input?)");
  return std::sqrt(clean_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
}

inline double measured_snr(const AudioBuffer& clean, const AudioBuffer& noise_component) {
  NRASR_REQUIRE(clean.samples.size() == noise_component.samples.size(),
                "measured_snr: length mismatch " << clean.samples.size() << " vs "
                                                 << noise_component.samples.size());
  double pc = rms_power(clean);
  double pn = rms_power(noise_component);
  NRASR_REQUIRE(pn > 0, "measured_snr: silent noise component (infinite SNR)");
  NRASR_REQUIRE(pc > 0, "measured_snr: silent clean signal");
  return 10.0 * std::log10(pc / pn);
}

// len samples of noise starting at offset, wrapping circularly.
inline std::vector<double> tile_segment(const std::vector<double>& noise, std::size_t offset,
                                        std::size_t len) {
  NRASR_REQUIRE(!noise.empty(), "tile_segment: empty noise");
  NRASR_REQUIRE(offset < noise.size(), "tile_segment: offset " << offset << " out of range "
                                                               << noise.size());
  std::vector<double> seg(len);
  std::size_t pos = offset;
  for (std::size_t i = 0; i < len; ++i) {
    seg[i] = noise[pos];
    if (++pos == noise.size()) pos = 0;
  }
  return seg;
}

// Rebuilds the exact noisy signal a recipe describes.
inline AudioBuffer remix_from_recipe(const AudioBuffer& clean, const AudioBuffer& noise,
                                     const MixRecipe& recipe) {
  NRASR_REQUIRE(clean.sample_rate_hz == noise.sample_rate_hz,
                "remix_from_recipe: sample-rate mismatch " << clean.sample_rate_hz << " vs "
                                                           << noise.sample_rate_hz);
  std::vector<double> seg =
      tile_segment(noise.samples, recipe.noise_offset, clean.samples.size());
  AudioBuffer out;
  out.sample_rate_hz = clean.sample_rate_hz;
  out.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < clean.samples.size(); ++i)
    out.samples[i] = clean.samples[i] + recipe.gain * seg[i];
  return out;
}

// Adds a random segment of `noise` to `clean` at exactly snr_db. The offset
// is drawn from the seed; the returned recipe reproduces the mix bit for bit.
inline std::pair<AudioBuffer, MixRecipe> mix_at_snr(const AudioBuffer& clean,
                                                    const AudioBuffer& noise, double snr_db,
                                                    std::uint64_t rng_seed,
                                                    const std::string& noise_label = "") {
  NRASR_REQUIRE(clean.sample_rate_hz == noise.sample_rate_hz,
                "mix_at_snr: sample-rate mismatch " << clean.sample_rate_hz << " vs "
                                                    << noise.sample_rate_hz);
  NRASR_REQUIRE(!clean.samples.empty(), "mix_at_snr: empty clean buffer");
  NRASR_REQUIRE(!noise.samples.empty(), "mix_at_snr: empty noise buffer");
  Rng rng(rng_seed);
  MixRecipe recipe;
  recipe.noise_label = noise_label;
  recipe.snr_db = snr_db;
  recipe.noise_offset = uniform_index(rng, noise.samples.size());

  std::vector<double> seg = tile_segment(noise.samples, recipe.noise_offset,
                                         clean.samples.size());
  AudioBuffer seg_buf{seg, clean.sample_rate_hz};
  recipe.gain = mixing_gain(rms_power(clean), rms_power(seg_buf), snr_db);

  AudioBuffer out;
  out.sample_rate_hz = clean.sample_rate_hz;
  out.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < clean.samples.size(); ++i)
    out.samples[i] = clean.samples[i] + recipe.gain * seg[i];
  return {std::move(out), std::move(recipe)};
}

// One CSV row: utterance_id,noise_label,snr_db,offset,gain. Numbers are
// printed with round-trip precision so a remix from the row is exact.
inline std::string mix_recipe_to_csv(const std::string& utterance_id, const MixRecipe& r) {
  return join_csv_line({utterance_id, r.noise_label, format_double(r.snr_db),
                        std::to_string(r.noise_offset), format_double(r.gain)});
}

inline std::pair<std::string, MixRecipe> mix_recipe_from_csv(const std::string& line,
                                                             const std::string& where) {
  std::vector<std::string> f = split_csv_line(line);
  NRASR_REQUIRE(f.size() == 5, where << ": expected 5 fields "
                                     << "(utterance_id,noise_label,snr_db,offset,gain), got "
                                     << f.size());
  NRASR_REQUIRE(!f[0].empty(), where << ": empty utterance_id");
  MixRecipe r;
  r.noise_label = f[1];
  r.snr_db = parse_double_field(f[2], where + " snr_db");
  long long off = parse_int_field(f[3], where + " offset");
  NRASR_REQUIRE(off >= 0, where << ": negative offset " << off);
  r.noise_offset = static_cast<std::size_t>(off);
  r.gain = parse_double_field(f[4], where + " gain");
  NRASR_REQUIRE(r.gain > 0, where << ": gain must be positive, got " << f[4]);
  return {f[0], r};
}

}  // namespace nrasr

#endif  // NRASR_AUDIO_HPP_
