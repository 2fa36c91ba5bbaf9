// nrasr/eval.hpp

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

// Evaluation harness: greedy decoding of single utterances and the WER grid
// over (noise type x SNR) cells plus a clean column. Grid aggregation is
// generic over the decode function so the scoring logic is testable without
// a trained model; evaluate_grid() binds it to a real checkpoint.

#ifndef NRASR_EVAL_HPP_
#define NRASR_EVAL_HPP_

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nrasr/autodiff.hpp"
#include "nrasr/corpus.hpp"
#include "nrasr/ctc.hpp"
#include "nrasr/model.hpp"
#include "nrasr/stft.hpp"
#include "nrasr/wer.hpp"

namespace nrasr {

inline FeatureMatrix features_for(const StftPlan& plan, const AudioBuffer& audio) {
  return normalize_features(plan.apply(audio));
}

inline FeatureMatrix features_for(const AudioBuffer& audio, const SpectrogramConfig& cfg) {
  return features_for(StftPlan(cfg), audio);
}

// Greedy per-frame argmax, collapsed. Forward pass only.
inline std::vector<int> decode_ids(const ModelParams& mp, const FeatureMatrix& feat) {
  Graph g;
  BoundModel bm(g, mp);
  Var lp = bm.forward_log_probs(feat);
  return greedy_decode(lp.value(), mp.cfg.blank_index);
}

inline std::string decode_transcript(const ModelParams& mp, const FeatureMatrix& feat) {
  return decode_labels(decode_ids(mp, feat), mp.cfg.vocab);
}

inline std::string decode_wav_file(const ModelParams& mp, const std::string& path,
                                   const SpectrogramConfig& feat_cfg) {
  WavData w = read_wav(path);
  return decode_transcript(mp, features_for(AudioBuffer{w.samples, w.sample_rate},
                                            feat_cfg));
}

// Hypothesis text for one manifest entry.
using DecodeFn = std::function<std::string(const ManifestEntry&)>;

// Pooled WER per (noise type, SNR) cell plus a clean cell from the manifest's
// unmixed entries. Cells are corpus-level: total edits over total reference
// words. Every (label, SNR) combination implied by the entries must be
// populated, otherwise the absent pairs are reported.
inline ResultsGrid evaluate_grid_with(const DecodeFn& decode,
                                      const std::vector<ManifestEntry>& manifest,
                                      const std::string& method, std::size_t threads = 1) {
  NRASR_REQUIRE(!manifest.empty(), "evaluate_grid: empty manifest");
  for (const ManifestEntry& e : manifest) validate_entry(e, "evaluate_grid input");

  // Decode everything up front; entries are independent.
  std::vector<std::string> hyps(manifest.size());
  std::size_t n_workers = std::max<std::size_t>(1, std::min(threads, manifest.size()));
  if (n_workers == 1) {
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      try {
        hyps[i] = decode(manifest[i]);
      } catch (const std::runtime_error& err) {
        NRASR_ERR("evaluate_grid: utterance " << manifest[i].utterance_id << ": " << err.what());
      }
    }
  } else {
    std::vector<std::thread> workers;
    std::vector<std::string> errors(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&, w]() {
        for (std::size_t i = w; i < manifest.size(); i += n_workers) {
          try {
            hyps[i] = decode(manifest[i]);
          } catch (const std::exception& err) {
            if (errors[w].empty())
              errors[w] = "evaluate_grid: utterance " + manifest[i].utterance_id + ": " +
                          err.what();
            return;
          }
        }
      });
    }
    for (std::thread& t : workers) t.join();
    for (const std::string& e : errors)
      if (!e.empty()) throw std::runtime_error(e);
  }

  // Aggregate into cells.
  std::set<NoiseLabel> labels_seen;
  std::set<double> snrs_seen;
  std::map<std::pair<NoiseLabel, double>, WerTally> cells;
  WerTally clean;
  bool has_clean = false;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const ManifestEntry& e = manifest[i];
    if (e.noise_label == NoiseLabel::kClean) {
      clean.add(e.transcript, hyps[i]);
      has_clean = true;
    } else {
      labels_seen.insert(e.noise_label);
      snrs_seen.insert(e.snr_db);
      cells[{e.noise_label, e.snr_db}].add(e.transcript, hyps[i]);
    }
  }

  // Coverage: the seen labels and SNRs must form a full grid.
  std::string missing;
  for (NoiseLabel label : labels_seen)
    for (double snr : snrs_seen)
      if (!cells.count({label, snr})) {
        if (!missing.empty()) missing += ", ";
        missing += std::string("(") + to_string(label) + ", " + format_double(snr) + ")";
      }
  NRASR_REQUIRE(missing.empty(), "evaluate_grid: no utterances for cells " << missing);

  ResultsGrid grid;
  grid.method = method;
  grid.has_clean = has_clean;
  if (has_clean) grid.clean_wer = clean.percent();
  for (NoiseLabel label : labels_seen)
    for (double snr : snrs_seen)
      grid.cells.push_back({to_string(label), snr, cells.at({label, snr}).percent()});
  return grid;
}

// Binds the grid to a real model: read WAV, extract features, greedy decode.
inline ResultsGrid evaluate_grid(const ModelParams& mp,
                                 const std::vector<ManifestEntry>& manifest,
                                 const SpectrogramConfig& feat_cfg, const std::string& method,
                                 std::size_t threads = 1) {
  StftPlan plan(feat_cfg);
  DecodeFn decode = [&mp, &plan](const ManifestEntry& e) {
    WavData w = read_wav(e.audio_path);
    return decode_transcript(
        mp, features_for(plan, AudioBuffer{w.samples, w.sample_rate}));
  };
  return evaluate_grid_with(decode, manifest, method, threads);
}

}  // namespace nrasr

#endif  // NRASR_EVAL_HPP_
