// nrasr/corpus.hpp

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

// Corpus plumbing: noise labels, utterance manifests, noise-set partitioning,
// the noisy test-grid builder, and a synthetic tone corpus (plus synthetic
// noise recipes) small enough to train and evaluate on a single desk machine.

#ifndef NRASR_CORPUS_HPP_
#define NRASR_CORPUS_HPP_

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nrasr/audio.hpp"
#include "nrasr/common.hpp"
#include "nrasr/csv.hpp"
#include "nrasr/rng.hpp"
#include "nrasr/wav.hpp"

namespace nrasr {

// ---------------------------------------------------------------------------
// Noise labels: seven mixable noise types plus Clean (never a mixing source).

enum class NoiseLabel {
  kBabble = 0,
  kAirportStation,
  kCar,
  kMetro,
  kCafe,
  kTraffic,
  kAcVacuum,
  kClean,
};

inline constexpr std::size_t kNumNoiseLabels = 8;  // 7 noise types + Clean
inline constexpr std::size_t kNumNoiseTypes = 7;

inline const char* to_string(NoiseLabel label) {
  switch (label) {
    case NoiseLabel::kBabble: return "Babble";
    case NoiseLabel::kAirportStation: return "AirportStation";
    case NoiseLabel::kCar: return "Car";
    case NoiseLabel::kMetro: return "Metro";
    case NoiseLabel::kCafe: return "Cafe";
    case NoiseLabel::kTraffic: return "Traffic";
    case NoiseLabel::kAcVacuum: return "AcVacuum";
    case NoiseLabel::kClean: return "Clean";
  }
  NRASR_ERR("noise label: bad enum value " << static_cast<int>(label));
}

inline NoiseLabel noise_label_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kNumNoiseLabels; ++i) {
    NoiseLabel label = static_cast<NoiseLabel>(i);
    if (s == to_string(label)) return label;
  }
  NRASR_ERR("noise label: unknown label '" << s << "'");
}

// The seven labels usable as mixing sources, in enum order.
inline std::vector<NoiseLabel> mixing_noise_labels() {
  std::vector<NoiseLabel> out;
  for (std::size_t i = 0; i < kNumNoiseTypes; ++i) out.push_back(static_cast<NoiseLabel>(i));
  return out;
}

// ---------------------------------------------------------------------------
// Manifests.

struct ManifestEntry {
  std::string utterance_id;
  std::string audio_path;
  std::string transcript;
  NoiseLabel noise_label = NoiseLabel::kClean;
  bool has_snr = false;  // invariant: noise_label == kClean  <=>  !has_snr
  double snr_db = 0.0;

  bool operator==(const ManifestEntry& o) const {
    return utterance_id == o.utterance_id && audio_path == o.audio_path &&
           transcript == o.transcript && noise_label == o.noise_label && has_snr == o.has_snr &&
           (!has_snr || snr_db == o.snr_db);
  }
};

inline constexpr const char* kManifestHeader = "utterance_id,audio_path,transcript,noise_label,snr_db";

inline void validate_entry(const ManifestEntry& e, const std::string& where) {
  bool clean = e.noise_label == NoiseLabel::kClean;
  NRASR_REQUIRE(clean == !e.has_snr,
                "manifest " << where << ": entry '" << e.utterance_id << "' has noise label "
                            << to_string(e.noise_label) << " but snr_db is "
                            << (e.has_snr ? "present" : "absent"));
}

inline void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const ManifestEntry& e : entries) {
    validate_entry(e, path);
    out += join_csv_line({e.utterance_id, e.audio_path, e.transcript, to_string(e.noise_label),
                          e.has_snr ? format_double(e.snr_db) : ""});
    out += "\n";
  }
  write_text_file(path, out);
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  NRASR_REQUIRE(!lines.empty(), "manifest " << path << ": empty file (missing header)");
  NRASR_REQUIRE(lines[0] == kManifestHeader, "manifest " << path << " line 1: bad header '"
                                                         << lines[0] << "'");
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string where = path + " line " + std::to_string(i + 1);
    std::vector<std::string> f = split_csv_line(lines[i]);
    NRASR_REQUIRE(f.size() == 5, "manifest " << where << ": expected 5 fields, got " << f.size());
    ManifestEntry e;
    e.utterance_id = f[0];
    e.audio_path = f[1];
    e.transcript = f[2];
    try {
      e.noise_label = noise_label_from_string(f[3]);
    } catch (const std::runtime_error& err) {
      NRASR_ERR("manifest " << where << ": " << err.what());
    }
    if (!f[4].empty()) {
      e.has_snr = true;
      e.snr_db = parse_double_field(f[4], where + " snr_db");
    }
    validate_entry(e, where);
    entries.push_back(std::move(e));
  }
  return entries;
}

// ---------------------------------------------------------------------------
// Transcript <-> label-id encoding against a model vocabulary.

inline std::vector<int> encode_transcript(const std::string& transcript,
                                          const std::vector<std::string>& vocab,
                                          int blank_index) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : transcript + " ") {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  std::vector<int> ids;
  for (const std::string& word : words) {
    int id = -1;
    for (std::size_t v = 0; v < vocab.size(); ++v)
      if (vocab[v] == word) { id = static_cast<int>(v); break; }
    NRASR_REQUIRE(id >= 0, "transcript: word '" << word << "' not in vocabulary");
    NRASR_REQUIRE(id != blank_index, "transcript: word '" << word << "' is the blank symbol");
    ids.push_back(id);
  }
  return ids;
}

inline std::string decode_labels(const std::vector<int>& ids,
                                 const std::vector<std::string>& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    NRASR_REQUIRE(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < vocab.size(),
                  "decode_labels: id " << ids[i] << " outside vocabulary of " << vocab.size());
    if (i) out += ' ';
    out += vocab[ids[i]];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise-set partitioning.

struct NoisePartition {
  std::map<NoiseLabel, std::vector<std::string>> train;
  std::map<NoiseLabel, std::vector<std::string>> test;
};

// Deterministic per-type shuffle, then the first train_count files go to the
// train split and the next test_count to the test split.
inline NoisePartition partition_noise_set(
    const std::map<NoiseLabel, std::vector<std::string>>& files_per_type,
    std::size_t train_count, std::size_t test_count, std::uint64_t seed) {
  NoisePartition out;
  for (const auto& [label, files] : files_per_type) {
    NRASR_REQUIRE(label != NoiseLabel::kClean,
                  "partition_noise_set: Clean is not a mixing source");
    NRASR_REQUIRE(files.size() >= train_count + test_count,
                  "partition_noise_set: type " << to_string(label) << " has " << files.size()
                                               << " files, need " << train_count + test_count);
    std::vector<std::string> shuffled = files;
    Rng rng(combine_seed(seed, static_cast<std::uint64_t>(label)));
    shuffle_values(shuffled, rng);
    out.train[label].assign(shuffled.begin(), shuffled.begin() + train_count);
    out.test[label].assign(shuffled.begin() + train_count,
                           shuffled.begin() + train_count + test_count);
  }
  return out;
}

inline constexpr const char* kNoiseSetHeader = "noise_label,path";

inline void save_noise_set(const std::map<NoiseLabel, std::vector<std::string>>& files_per_type,
                           const std::string& path) {
  std::string out = std::string(kNoiseSetHeader) + "\n";
  for (const auto& [label, files] : files_per_type) {
    NRASR_REQUIRE(label != NoiseLabel::kClean, "noise set " << path << ": Clean has no files");
    for (const std::string& f : files) {
      out += join_csv_line({to_string(label), f});
      out += "\n";
    }
  }
  write_text_file(path, out);
}

inline std::map<NoiseLabel, std::vector<std::string>> load_noise_set(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  NRASR_REQUIRE(!lines.empty(), "noise set " << path << ": empty file (missing header)");
  NRASR_REQUIRE(lines[0] == kNoiseSetHeader,
                "noise set " << path << " line 1: bad header '" << lines[0] << "'");
  std::map<NoiseLabel, std::vector<std::string>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string where = path + " line " + std::to_string(i + 1);
    std::vector<std::string> f = split_csv_line(lines[i]);
    NRASR_REQUIRE(f.size() == 2, "noise set " << where << ": expected 2 fields, got " << f.size());
    NoiseLabel label;
    try {
      label = noise_label_from_string(f[0]);
    } catch (const std::runtime_error& err) {
      NRASR_ERR("noise set " << where << ": " << err.what());
    }
    NRASR_REQUIRE(label != NoiseLabel::kClean, "noise set " << where << ": Clean has no files");
    NRASR_REQUIRE(!f[1].empty(), "noise set " << where << ": empty path");
    out[label].push_back(f[1]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic tone corpus.

struct SynthSpec {
  std::vector<std::string> symbols = {"a", "b", "c", "d", "e"};
  std::vector<double> freqs_hz = {440.0, 660.0, 880.0, 1320.0, 1760.0};
  double symbol_ms = 100.0;
  std::size_t min_symbols = 3;
  std::size_t max_symbols = 8;
  double amplitude = 0.3;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 0;
};

inline void validate_synth_spec(const SynthSpec& spec) {
  NRASR_REQUIRE(!spec.symbols.empty(), "synth spec: no symbols");
  NRASR_REQUIRE(spec.symbols.size() == spec.freqs_hz.size(),
                "synth spec: " << spec.symbols.size() << " symbols but " << spec.freqs_hz.size()
                               << " frequencies");
  for (std::size_t i = 0; i < spec.symbols.size(); ++i) {
    const std::string& s = spec.symbols[i];
    NRASR_REQUIRE(!s.empty(), "synth spec: empty symbol");
    for (char c : s)
      NRASR_REQUIRE(!std::isspace(static_cast<unsigned char>(c)) && c != ',',
                    "synth spec: symbol '" << s << "' contains whitespace or comma");
    for (std::size_t j = 0; j < i; ++j) {
      NRASR_REQUIRE(spec.symbols[j] != s, "synth spec: duplicate symbol '" << s << "'");
      NRASR_REQUIRE(spec.freqs_hz[j] != spec.freqs_hz[i],
                    "synth spec: duplicate frequency " << spec.freqs_hz[i] << " Hz");
    }
    NRASR_REQUIRE(spec.freqs_hz[i] > 0 && spec.freqs_hz[i] < spec.sample_rate_hz / 2.0,
                  "synth spec: frequency " << spec.freqs_hz[i] << " Hz outside (0, Nyquist)");
  }
  NRASR_REQUIRE(spec.symbol_ms > 0, "synth spec: non-positive symbol duration");
  NRASR_REQUIRE(spec.min_symbols >= 1 && spec.min_symbols <= spec.max_symbols,
                "synth spec: bad length range [" << spec.min_symbols << ", " << spec.max_symbols
                                                 << "]");
  NRASR_REQUIRE(spec.amplitude > 0, "synth spec: non-positive amplitude");
  NRASR_REQUIRE(spec.sample_rate_hz > 0, "synth spec: non-positive sample rate");
}

inline std::size_t samples_per_symbol(const SynthSpec& spec) {
  return static_cast<std::size_t>(
      std::llround(spec.symbol_ms / 1000.0 * static_cast<double>(spec.sample_rate_hz)));
}

// Audio for a symbol-index sequence: one fixed-length sinusoid segment per
// symbol at its mapped frequency, phase restarting at each segment.
inline AudioBuffer synth_wave(const SynthSpec& spec, const std::vector<std::size_t>& symbol_ids) {
  validate_synth_spec(spec);
  const std::size_t seg = samples_per_symbol(spec);
  AudioBuffer out;
  out.sample_rate_hz = spec.sample_rate_hz;
  out.samples.reserve(seg * symbol_ids.size());
  for (std::size_t id : symbol_ids) {
    NRASR_REQUIRE(id < spec.symbols.size(),
                  "synth_wave: symbol index " << id << " outside vocabulary of "
                                              << spec.symbols.size());
    double w = 2.0 * M_PI * spec.freqs_hz[id] / spec.sample_rate_hz;
    for (std::size_t n = 0; n < seg; ++n)
      out.samples.push_back(spec.amplitude * std::sin(w * static_cast<double>(n)));
  }
  return out;
}

// Writes n_utts WAVs under out_dir and returns their clean manifest entries.
// Fully determined by (spec, n_utts): utterance i draws from a sub-seed of
// spec.seed, so corpora can be rebuilt bit for bit.
inline std::vector<ManifestEntry> synth_corpus(const SynthSpec& spec, std::size_t n_utts,
                                               const std::string& out_dir) {
  validate_synth_spec(spec);
  std::filesystem::create_directories(out_dir);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < n_utts; ++i) {
    Rng rng(combine_seed(spec.seed, i));
    std::size_t len =
        spec.min_symbols + uniform_index(rng, spec.max_symbols - spec.min_symbols + 1);
    std::vector<std::size_t> ids;
    for (std::size_t k = 0; k < len; ++k) ids.push_back(uniform_index(rng, spec.symbols.size()));

    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "utt_%05zu", i);
    ManifestEntry e;
    e.utterance_id = id_buf;
    e.audio_path = (std::filesystem::path(out_dir) / (std::string(id_buf) + ".wav")).string();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (k) e.transcript += ' ';
      e.transcript += spec.symbols[ids[k]];
    }
    AudioBuffer wave = synth_wave(spec, ids);
    write_wav(e.audio_path, wave.samples, static_cast<std::uint32_t>(wave.sample_rate_hz));
    entries.push_back(std::move(e));
  }
  return entries;
}

// ---------------------------------------------------------------------------
// Synthetic noise. Each type gets a distinct spectral recipe so an 8-way
// classifier over spectrogram features is well posed without third-party
// audio: tonal clusters, tone-plus-hiss, deep rumble, rhythmic AM, high-pass
// hiss, low-pass roar, and a harmonic motor whine.

namespace detail {

inline void one_pole_lowpass(std::vector<double>& x, double alpha) {
  double y = 0.0;
  for (double& v : x) {
    y = alpha * y + (1.0 - alpha) * v;
    v = y;
  }
}

inline void scale_to_rms(std::vector<double>& x, double target_rms) {
  double p = 0.0;
  for (double v : x) p += v * v;
  p /= static_cast<double>(x.size());
  NRASR_REQUIRE(p > 0, "synth noise: silent recipe output");
  double g = target_rms / std::sqrt(p);
  for (double& v : x) v *= g;
}

}  // namespace detail

inline AudioBuffer synth_noise(NoiseLabel label, std::size_t n_samples, std::uint64_t seed,
                               int sample_rate_hz = 16000) {
  NRASR_REQUIRE(label != NoiseLabel::kClean, "synth_noise: Clean is not a noise type");
  NRASR_REQUIRE(n_samples > 0, "synth_noise: zero samples requested");
  Rng rng(seed);
  std::vector<double> x(n_samples, 0.0);
  auto white = [&rng]() { return uniform_real(rng, -1.0, 1.0); };
  auto tone = [&](double freq, double amp) {
    double w = 2.0 * M_PI * freq / sample_rate_hz;
    double phase = uniform_real(rng, 0.0, 2.0 * M_PI);
    for (std::size_t i = 0; i < n_samples; ++i) x[i] += amp * std::sin(w * i + phase);
  };

  switch (label) {
    case NoiseLabel::kBabble: {
      // Cluster of steady voices in the 200-800 Hz band over a soft hiss.
      for (int k = 0; k < 5; ++k) tone(uniform_real(rng, 200.0, 800.0), 0.15);
      for (double& v : x) v += 0.05 * white();
      break;
    }
    case NoiseLabel::kAirportStation: {
      // Loud announcement tone over broadband crowd hiss.
      tone(1200.0, 0.5);
      for (double& v : x) v += 0.25 * white();
      break;
    }
    case NoiseLabel::kCar: {
      // Deep engine rumble: heavily low-passed noise.
      for (double& v : x) v = white();
      detail::one_pole_lowpass(x, 0.99);
      break;
    }
    case NoiseLabel::kMetro: {
      // Rhythmic clatter: white noise amplitude-modulated at 4 Hz.
      double wm = 2.0 * M_PI * 4.0 / sample_rate_hz;
      for (std::size_t i = 0; i < n_samples; ++i)
        x[i] = (0.15 + 0.85 * std::fabs(std::sin(wm * i))) * white();
      break;
    }
    case NoiseLabel::kCafe: {
      // Crisp dish clatter: first-difference high-passed noise.
      double prev = white();
      for (double& v : x) {
        double cur = white();
        v = cur - prev;
        prev = cur;
      }
      break;
    }
    case NoiseLabel::kTraffic: {
      // Broad road roar: moderately low-passed noise.
      for (double& v : x) v = white();
      detail::one_pole_lowpass(x, 0.9);
      break;
    }
    case NoiseLabel::kAcVacuum: {
      // Motor whine: harmonic stack plus light hiss.
      tone(300.0, 0.3);
      tone(600.0, 0.2);
      tone(900.0, 0.15);
      for (double& v : x) v += 0.1 * white();
      break;
    }
    case NoiseLabel::kClean:
      NRASR_ERR("synth_noise: unreachable");
  }
  detail::scale_to_rms(x, 0.1);
  return AudioBuffer{std::move(x), static_cast<std::uint32_t>(sample_rate_hz)};
}

// Writes files_per_type WAVs for each of the seven noise types and returns
// their paths keyed by type.
inline std::map<NoiseLabel, std::vector<std::string>> synth_noise_set(
    const std::string& out_dir, std::size_t files_per_type, double seconds, std::uint64_t seed,
    int sample_rate_hz = 16000) {
  NRASR_REQUIRE(files_per_type > 0, "synth_noise_set: zero files per type");
  NRASR_REQUIRE(seconds > 0, "synth_noise_set: non-positive duration");
  std::filesystem::create_directories(out_dir);
  std::size_t n = static_cast<std::size_t>(std::llround(seconds * sample_rate_hz));
  std::map<NoiseLabel, std::vector<std::string>> out;
  for (NoiseLabel label : mixing_noise_labels()) {
    for (std::size_t k = 0; k < files_per_type; ++k) {
      char name[64];
      std::snprintf(name, sizeof(name), "noise_%s_%02zu.wav", to_string(label), k);
      std::string path = (std::filesystem::path(out_dir) / name).string();
      std::uint64_t file_seed = combine_seed(combine_seed(seed, static_cast<std::uint64_t>(label)), k);
      AudioBuffer buf = synth_noise(label, n, file_seed, sample_rate_hz);
      write_wav(path, buf.samples, static_cast<std::uint32_t>(buf.sample_rate_hz));
      out[label].push_back(std::move(path));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noisy test-grid builder.

struct NoisyTestSet {
  std::vector<ManifestEntry> entries;
  std::vector<std::pair<std::string, MixRecipe>> recipes;  // entry id -> recipe
};

inline constexpr const char* kRecipeHeader = "utterance_id,noise_label,snr_db,noise_offset,gain";

inline void save_recipes(const std::vector<std::pair<std::string, MixRecipe>>& recipes,
                         const std::string& path) {
  std::string out = std::string(kRecipeHeader) + "\n";
  for (const auto& [id, recipe] : recipes) {
    out += mix_recipe_to_csv(id, recipe);
    out += "\n";
  }
  write_text_file(path, out);
}

inline std::string snr_tag(double snr_db) {
  std::string s = format_double(snr_db);
  for (char& c : s) {
    if (c == '.') c = 'p';
    if (c == '-') c = 'm';
  }
  return s;
}

// One mixed WAV per (clean utterance x noise type x SNR), written under
// out_dir. Noise file choice and segment offset are drawn from a per-entry
// seed, so any subset can be rebuilt independently; the returned recipes
// reproduce each mix bit for bit.
inline NoisyTestSet build_noisy_test_set(
    const std::vector<ManifestEntry>& clean_utts,
    const std::map<NoiseLabel, std::vector<std::string>>& test_noise,
    const std::vector<double>& snr_list, std::uint64_t seed, const std::string& out_dir) {
  NRASR_REQUIRE(!snr_list.empty(), "build_noisy_test_set: empty SNR list");
  for (const auto& [label, files] : test_noise) {
    NRASR_REQUIRE(label != NoiseLabel::kClean,
                  "build_noisy_test_set: Clean is not a mixing source");
    NRASR_REQUIRE(!files.empty(),
                  "build_noisy_test_set: no noise files for " << to_string(label));
  }
  std::filesystem::create_directories(out_dir);

  std::unordered_map<std::string, AudioBuffer> wav_cache;
  auto cached_wav = [&wav_cache](const std::string& path) -> const AudioBuffer& {
    auto it = wav_cache.find(path);
    if (it == wav_cache.end()) {
      WavData w = read_wav(path);
      it = wav_cache
               .emplace(path, AudioBuffer{std::move(w.samples), w.sample_rate})
               .first;
    }
    return it->second;
  };

  NoisyTestSet out;
  for (const ManifestEntry& utt : clean_utts) {
    validate_entry(utt, "build_noisy_test_set input");
    NRASR_REQUIRE(utt.noise_label == NoiseLabel::kClean,
                  "build_noisy_test_set: utterance '" << utt.utterance_id
                                                      << "' is not a clean utterance");
    for (const auto& [label, files] : test_noise) {
      for (double snr : snr_list) {
        std::string entry_id =
            utt.utterance_id + "__" + to_string(label) + "__snr" + snr_tag(snr);
        try {
          std::uint64_t entry_seed = combine_seed(seed, entry_id);
          Rng pick(combine_seed(entry_seed, "noisefile"));
          const std::string& noise_path = files[uniform_index(pick, files.size())];
          const AudioBuffer& clean = cached_wav(utt.audio_path);
          const AudioBuffer& noise = cached_wav(noise_path);
          auto [mixed, recipe] =
              mix_at_snr(clean, noise, snr, combine_seed(entry_seed, "mix"), to_string(label));

          ManifestEntry e;
          e.utterance_id = entry_id;
          e.audio_path = (std::filesystem::path(out_dir) / (entry_id + ".wav")).string();
          e.transcript = utt.transcript;
          e.noise_label = label;
          e.has_snr = true;
          e.snr_db = snr;
          write_wav(e.audio_path, mixed.samples,
                    static_cast<std::uint32_t>(mixed.sample_rate_hz));
          out.entries.push_back(std::move(e));
          out.recipes.emplace_back(entry_id, std::move(recipe));
        } catch (const std::runtime_error& err) {
          NRASR_ERR("build_noisy_test_set: entry " << entry_id << ": " << err.what());
        }
      }
    }
  }
  return out;
}

}  // namespace nrasr

#endif  // NRASR_CORPUS_HPP_
