// nrasr/trainer.hpp

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

// The four training regimes over one trunk model:
//   VanillaDAT    - CTC on noise-augmented batches, single learning rate.
//   SoftFreezeDAT - VanillaDAT with the FC + top two recurrent layers trained
//                   at base_lr * soft_freeze_factor.
//   MTL           - CTC plus an auxiliary 8-way noise-type cross-entropy on a
//                   tapped trunk layer, combined by the hybrid loss with an
//                   annealed auxiliary weight.
//   AvT           - MTL topology with gradient reversal before the noise
//                   head and per-group learning-rate scales.
// Plus the SGD-with-momentum optimizer, batch augmentation, per-epoch dev
// metrics, and best-dev checkpoint selection.

#ifndef NRASR_TRAINER_HPP_
#define NRASR_TRAINER_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "nrasr/audio.hpp"
#include "nrasr/autodiff.hpp"
#include "nrasr/corpus.hpp"
#include "nrasr/ctc.hpp"
#include "nrasr/eval.hpp"
#include "nrasr/model.hpp"
#include "nrasr/rng.hpp"
#include "nrasr/stft.hpp"
#include "nrasr/wer.hpp"

namespace nrasr {

// ---------------------------------------------------------------------------
// Configuration.

enum class TrainMode { kVanillaDat, kSoftFreezeDat, kMtl, kAvt };

inline const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kVanillaDat: return "vanilla_dat";
    case TrainMode::kSoftFreezeDat: return "soft_freeze_dat";
    case TrainMode::kMtl: return "mtl";
    case TrainMode::kAvt: return "avt";
  }
  NRASR_ERR("train mode: bad enum value " << static_cast<int>(mode));
}

inline TrainMode train_mode_from_string(const std::string& s) {
  for (TrainMode mode : {TrainMode::kVanillaDat, TrainMode::kSoftFreezeDat, TrainMode::kMtl,
                         TrainMode::kAvt})
    if (s == to_string(mode)) return mode;
  NRASR_ERR("train mode: unknown mode '"
            << s << "' (valid: vanilla_dat, soft_freeze_dat, mtl, avt)");
}

inline bool mode_uses_noise_head(TrainMode mode) {
  return mode == TrainMode::kMtl || mode == TrainMode::kAvt;
}

struct TrainConfig {
  TrainMode mode = TrainMode::kVanillaDat;
  double base_lr = 0.0001;  // 0.0008 for AvT
  std::size_t epochs = 25;
  std::size_t batch_size = 32;
  double aug_prob = 0.5;
  std::vector<double> train_snr_set = {0.0, 5.0, 10.0, 15.0, 20.0, 25.0};
  double lambda = 0.7;          // hybrid weight on the CTC term
  double eta0 = 10.0;           // initial auxiliary weight
  double anneal_factor = 1.05;  // eta is divided by this each epoch
  double soft_freeze_factor = 0.5;
  double lambda_f = 0.8;   // AvT scale, feature-extractor group
  double lambda_r = 0.05;  // AvT scale, recognition group
  double lambda_n = 1.0;   // AvT scale, noise-classifier group
  double momentum = 0.9;
  double clip_norm = 400.0;  // global L2 clip; <= 0 disables
  double grl_coef = 1.0;     // gradient-reversal scale in AvT
  std::uint64_t seed = 0;
};

inline TrainConfig default_train_config(TrainMode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.base_lr = mode == TrainMode::kAvt ? 0.0008 : 0.0001;
  return cfg;
}

inline void validate_train_config(const TrainConfig& cfg) {
  NRASR_REQUIRE(cfg.base_lr > 0, "train config: non-positive base_lr " << cfg.base_lr);
  NRASR_REQUIRE(cfg.epochs > 0, "train config: zero epochs");
  NRASR_REQUIRE(cfg.batch_size > 0, "train config: zero batch size");
  NRASR_REQUIRE(cfg.aug_prob >= 0 && cfg.aug_prob <= 1,
                "train config: aug_prob " << cfg.aug_prob << " outside [0, 1]");
  NRASR_REQUIRE(!cfg.train_snr_set.empty(), "train config: empty train SNR set");
  NRASR_REQUIRE(cfg.lambda >= 0 && cfg.lambda <= 1,
                "train config: lambda " << cfg.lambda << " outside [0, 1]");
  NRASR_REQUIRE(cfg.eta0 > 0, "train config: non-positive eta0 " << cfg.eta0);
  NRASR_REQUIRE(cfg.anneal_factor > 0, "train config: non-positive anneal factor");
  NRASR_REQUIRE(cfg.soft_freeze_factor > 0, "train config: non-positive soft-freeze factor");
  NRASR_REQUIRE(cfg.lambda_f > 0 && cfg.lambda_r > 0 && cfg.lambda_n > 0,
                "train config: non-positive group scale");
  NRASR_REQUIRE(cfg.momentum >= 0 && cfg.momentum < 1,
                "train config: momentum " << cfg.momentum << " outside [0, 1)");
  NRASR_REQUIRE(cfg.grl_coef > 0, "train config: non-positive grl_coef");
}

// ---------------------------------------------------------------------------
// Losses.

struct LossBreakdown {
  double l_ctc = 0.0;
  bool has_ce = false;
  double l_ce = 0.0;
  double l_hybrid = 0.0;
};

// Coefficient on the cross-entropy term. Written as eta - lambda*eta (equal
// to eta*(1 - lambda)) so round numbers like lambda=0.7, eta=10 give an
// exact coefficient.
inline double ce_coefficient(double lambda, double eta) {
  NRASR_REQUIRE(lambda >= 0 && lambda <= 1, "hybrid loss: lambda " << lambda
                                                                   << " outside [0, 1]");
  NRASR_REQUIRE(eta > 0, "hybrid loss: non-positive eta " << eta);
  return eta - lambda * eta;
}

inline Var hybrid_loss(Var l_ctc, Var l_ce, double lambda, double eta) {
  return add(scale(l_ctc, lambda), scale(l_ce, ce_coefficient(lambda, eta)));
}

inline double hybrid_value(double l_ctc, double l_ce, double lambda, double eta) {
  return lambda * l_ctc + ce_coefficient(lambda, eta) * l_ce;
}

inline double anneal_eta(double eta, double anneal_factor) {
  NRASR_REQUIRE(anneal_factor > 0, "anneal_eta: non-positive factor " << anneal_factor);
  return eta / anneal_factor;
}

// ---------------------------------------------------------------------------
// Per-parameter learning rates.

inline double effective_lr(const ParamTag& tag, const TrainConfig& cfg) {
  switch (cfg.mode) {
    case TrainMode::kVanillaDat:
    case TrainMode::kMtl:
      return cfg.base_lr;
    case TrainMode::kSoftFreezeDat:
      return tag.soft_freeze_member ? cfg.base_lr * cfg.soft_freeze_factor : cfg.base_lr;
    case TrainMode::kAvt:
      switch (tag.group) {
        case ParamGroup::kFeatureExtractor: return cfg.base_lr * cfg.lambda_f;
        case ParamGroup::kRecognition: return cfg.base_lr * cfg.lambda_r;
        case ParamGroup::kNoiseClassifier: return cfg.base_lr * cfg.lambda_n;
      }
  }
  NRASR_ERR("effective_lr: bad mode/group combination");
}

// ---------------------------------------------------------------------------
// Optimizer: SGD with momentum and optional global L2-norm clipping.

struct OptimizerState {
  std::vector<Tensor> velocity;  // one per parameter, same shapes
  std::size_t epoch = 0;
  double eta = 0.0;
};

inline OptimizerState init_optimizer(const ModelParams& mp, const TrainConfig& cfg) {
  OptimizerState st;
  st.eta = cfg.eta0;
  st.velocity.reserve(mp.params.size());
  for (const Param& p : mp.params) st.velocity.push_back(Tensor::zeros(p.value.shape));
  return st;
}

inline void sgd_step(ModelParams& mp, std::vector<Tensor>& grads, OptimizerState& st,
                     const TrainConfig& cfg) {
  NRASR_REQUIRE(grads.size() == mp.params.size(),
                "sgd_step: " << grads.size() << " gradients for " << mp.params.size()
                             << " parameters");
  double sq_norm = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    NRASR_REQUIRE(grads[i].shape == mp.params[i].value.shape,
                  "sgd_step: gradient/parameter shape mismatch for " << mp.params[i].name);
    for (double g : grads[i].data) {
      NRASR_REQUIRE(std::isfinite(g),
                    "sgd_step: non-finite gradient in " << mp.params[i].name);
      sq_norm += g * g;
    }
  }
  double gscale = 1.0;
  if (cfg.clip_norm > 0) {
    double norm = std::sqrt(sq_norm);
    if (norm > cfg.clip_norm) gscale = cfg.clip_norm / norm;
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    double lr = effective_lr(mp.params[i].tag, cfg);
    Tensor& v = st.velocity[i];
    Tensor& w = mp.params[i].value;
    for (std::size_t j = 0; j < w.data.size(); ++j) {
      v.data[j] = cfg.momentum * v.data[j] + gscale * grads[i].data[j];
      w.data[j] -= lr * v.data[j];
      grads[i].data[j] = 0.0;
    }
  }
}

// ---------------------------------------------------------------------------
// Batch augmentation. Per utterance the draws are, in order: the coin, then
// (when it lands) noise type, SNR, noise file, and the mixing seed.

struct AugmentResult {
  std::vector<AudioBuffer> audio;
  std::vector<NoiseLabel> labels;
};

inline AugmentResult augment_batch(const std::vector<AudioBuffer>& clean_batch,
                                   const std::map<NoiseLabel, std::vector<AudioBuffer>>& noise_set,
                                   const TrainConfig& cfg, Rng& rng) {
  if (cfg.aug_prob > 0) {
    NRASR_REQUIRE(noise_set.size() == kNumNoiseTypes,
                  "augment_batch: noise set covers " << noise_set.size() << " of "
                                                     << kNumNoiseTypes << " noise types");
    for (const auto& [label, buffers] : noise_set) {
      NRASR_REQUIRE(label != NoiseLabel::kClean, "augment_batch: Clean is not a mixing source");
      NRASR_REQUIRE(!buffers.empty(),
                    "augment_batch: empty noise set for " << to_string(label));
    }
  }
  std::vector<NoiseLabel> types = mixing_noise_labels();
  AugmentResult out;
  out.audio.reserve(clean_batch.size());
  out.labels.reserve(clean_batch.size());
  for (const AudioBuffer& clean : clean_batch) {
    if (cfg.aug_prob > 0 && bernoulli(rng, cfg.aug_prob)) {
      NoiseLabel type = types[uniform_index(rng, types.size())];
      double snr = cfg.train_snr_set[uniform_index(rng, cfg.train_snr_set.size())];
      const std::vector<AudioBuffer>& files = noise_set.at(type);
      const AudioBuffer& noise = files[uniform_index(rng, files.size())];
      auto [mixed, recipe] = mix_at_snr(clean, noise, snr, rng(), to_string(type));
      (void)recipe;
      out.audio.push_back(std::move(mixed));
      out.labels.push_back(type);
    } else {
      out.audio.push_back(clean);
      out.labels.push_back(NoiseLabel::kClean);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training data and metrics.

struct TrainUtterance {
  std::string id;
  AudioBuffer audio;
  std::string transcript;
  std::vector<int> target;
};

inline std::vector<TrainUtterance> load_train_utterances(
    const std::vector<ManifestEntry>& entries, const ModelConfig& cfg) {
  std::vector<TrainUtterance> out;
  out.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    try {
      WavData w = read_wav(e.audio_path);
      out.push_back({e.utterance_id,
                     AudioBuffer{std::move(w.samples), w.sample_rate},
                     e.transcript, encode_transcript(e.transcript, cfg.vocab, cfg.blank_index)});
    } catch (const std::runtime_error& err) {
      NRASR_ERR("load utterances: " << e.utterance_id << ": " << err.what());
    }
  }
  return out;
}

inline std::map<NoiseLabel, std::vector<AudioBuffer>> load_noise_audio(
    const std::map<NoiseLabel, std::vector<std::string>>& paths) {
  std::map<NoiseLabel, std::vector<AudioBuffer>> out;
  for (const auto& [label, files] : paths)
    for (const std::string& path : files) {
      WavData w = read_wav(path);
      out[label].push_back(AudioBuffer{std::move(w.samples), w.sample_rate});
    }
  return out;
}

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double l_ctc = 0.0;
  bool has_ce = false;
  double l_ce = 0.0;
  double l_hybrid = 0.0;
  double eta = 0.0;
  double dev_wer = 0.0;
  bool has_noise_acc = false;
  double noise_acc = 0.0;  // percent
};

inline constexpr const char* kMetricsHeader = "epoch,l_ctc,l_ce,l_hybrid,eta,dev_wer,noise_acc";

inline std::string metrics_to_csv(const std::vector<EpochMetrics>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const EpochMetrics& m : rows) {
    out += join_csv_line({std::to_string(m.epoch), format_double(m.l_ctc),
                          m.has_ce ? format_double(m.l_ce) : "",
                          m.has_ce ? format_double(m.l_hybrid) : "",
                          m.has_ce ? format_double(m.eta) : "", format_double(m.dev_wer),
                          m.has_noise_acc ? format_double(m.noise_acc) : ""});
    out += "\n";
  }
  return out;
}

struct TrainResult {
  ModelParams best_params;
  std::size_t best_epoch = 0;  // 1-based, matches the metrics rows
  double best_dev_wer = 0.0;
  std::vector<EpochMetrics> metrics;
};

// ---------------------------------------------------------------------------
// The training loop.

namespace detail {

inline int argmax_row(const Tensor& t) {
  int best = 0;
  for (std::size_t k = 1; k < t.data.size(); ++k)
    if (t.data[k] > t.data[best]) best = static_cast<int>(k);
  return best;
}

}  // namespace detail

// Runs cfg.epochs of cfg.mode over train_set, reporting per-epoch metrics on
// dev_set and returning the parameters of the epoch with the lowest dev WER
// (ties broken by dev CTC loss, then by earliest epoch). The dev set gets one
// fixed augmentation draw per run so epochs stay comparable.
inline TrainResult train(const TrainConfig& cfg, const ModelParams& init,
                         const std::vector<TrainUtterance>& train_set,
                         const std::vector<TrainUtterance>& dev_set,
                         const std::map<NoiseLabel, std::vector<AudioBuffer>>& noise_set,
                         const SpectrogramConfig& feat_cfg, std::ostream* log = nullptr) {
  validate_train_config(cfg);
  NRASR_REQUIRE(!train_set.empty(), "train: empty training set");
  NRASR_REQUIRE(!dev_set.empty(), "train: empty dev set");
  const ModelConfig& mc = init.cfg;
  const bool uses_head = mode_uses_noise_head(cfg.mode);
  if (uses_head)
    NRASR_REQUIRE(mc.n_noise_labels == kNumNoiseLabels,
                  "train: model has " << mc.n_noise_labels << " noise classes, need "
                                      << kNumNoiseLabels);
  StftPlan plan(feat_cfg);
  NRASR_REQUIRE(plan.bins() == mc.input_bins,
                "train: features have " << plan.bins() << " bins, model expects "
                                        << mc.input_bins);

  // Every utterance must be long enough for its CTC target (mixing preserves
  // length, so checking the clean audio covers augmented passes too).
  auto check_feasible = [&](const TrainUtterance& u, const char* which) {
    NRASR_REQUIRE(u.audio.samples.size() >= feat_cfg.window_len,
                  "train: " << which << " utterance " << u.id << " shorter than one window");
    std::size_t frames = (u.audio.samples.size() - feat_cfg.window_len) / feat_cfg.hop_len + 1;
    std::size_t steps = conv_output_frames(mc, frames);
    NRASR_REQUIRE(steps >= detail::min_frames_for(u.target),
                  "train: " << which << " utterance " << u.id << " yields " << steps
                            << " frames for a target needing " << detail::min_frames_for(u.target));
  };
  for (const TrainUtterance& u : train_set) check_feasible(u, "train");
  for (const TrainUtterance& u : dev_set) check_feasible(u, "dev");

  // Dev set: one fixed augmentation draw, features precomputed.
  std::vector<AudioBuffer> dev_clean;
  dev_clean.reserve(dev_set.size());
  for (const TrainUtterance& u : dev_set) dev_clean.push_back(u.audio);
  Rng dev_rng(combine_seed(cfg.seed, "dev-augment"));
  AugmentResult dev_aug = augment_batch(dev_clean, noise_set, cfg, dev_rng);
  std::vector<FeatureMatrix> dev_feats;
  dev_feats.reserve(dev_set.size());
  for (const AudioBuffer& a : dev_aug.audio) dev_feats.push_back(features_for(plan, a));

  // Clean train features never change; cache them lazily.
  std::vector<FeatureMatrix> clean_feats(train_set.size());
  std::vector<bool> clean_cached(train_set.size(), false);
  auto clean_features = [&](std::size_t idx) -> const FeatureMatrix& {
    if (!clean_cached[idx]) {
      clean_feats[idx] = features_for(plan, train_set[idx].audio);
      clean_cached[idx] = true;
    }
    return clean_feats[idx];
  };

  ModelParams params = init;
  OptimizerState state = init_optimizer(params, cfg);

  TrainResult result;
  result.best_params = params;
  double best_wer = std::numeric_limits<double>::infinity();
  double best_dev_ctc = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(combine_seed(combine_seed(cfg.seed, "shuffle"), epoch));
    shuffle_values(order, shuffle_rng);
    Rng aug_rng(combine_seed(combine_seed(cfg.seed, "augment"), epoch));

    double sum_ctc = 0.0, sum_ce = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<AudioBuffer> batch_clean;
      batch_clean.reserve(end - start);
      for (std::size_t b = start; b < end; ++b)
        batch_clean.push_back(train_set[order[b]].audio);
      AugmentResult aug = augment_batch(batch_clean, noise_set, cfg, aug_rng);

      Graph g;
      BoundModel bm(g, params);
      std::vector<Var> ctcs, ces;
      for (std::size_t b = start; b < end; ++b) {
        std::size_t idx = order[b];
        std::size_t k = b - start;
        try {
          const FeatureMatrix& feat = aug.labels[k] == NoiseLabel::kClean
                                          ? clean_features(idx)
                                          : features_for(plan, aug.audio[k]);
          Var tapped;
          Var lp = bm.forward_log_probs(feat, uses_head ? &tapped : nullptr);
          ctcs.push_back(ctc_loss(lp, train_set[idx].target, mc.blank_index));
          if (uses_head) {
            Var logits =
                bm.noise_logits(tapped, cfg.mode == TrainMode::kAvt, cfg.grl_coef);
            ces.push_back(cross_entropy(logits, static_cast<int>(aug.labels[k])));
          }
        } catch (const std::runtime_error& err) {
          NRASR_ERR("train: utterance " << train_set[idx].id << ": " << err.what());
        }
      }
      Var ctc_mean = mean_of(ctcs);
      Var loss = uses_head ? hybrid_loss(ctc_mean, mean_of(ces), cfg.lambda, state.eta)
                           : ctc_mean;
      g.backward(loss);

      std::vector<Tensor> grads;
      grads.reserve(bm.vars().size());
      for (const Var& v : bm.vars()) grads.push_back(v.grad());
      sgd_step(params, grads, state, cfg);

      for (const Var& v : ctcs) sum_ctc += v.scalar();
      for (const Var& v : ces) sum_ce += v.scalar();
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.l_ctc = sum_ctc / static_cast<double>(train_set.size());
    if (uses_head) {
      m.has_ce = true;
      m.l_ce = sum_ce / static_cast<double>(train_set.size());
      m.l_hybrid = hybrid_value(m.l_ctc, m.l_ce, cfg.lambda, state.eta);
      m.eta = state.eta;
    }

    // Dev pass: greedy WER, CTC loss (selection tie-break), head accuracy.
    WerTally tally;
    double dev_ctc_sum = 0.0;
    std::size_t noise_correct = 0;
    for (std::size_t i = 0; i < dev_set.size(); ++i) {
      Graph g;
      BoundModel bm(g, params);
      Var tapped;
      Var lp = bm.forward_log_probs(dev_feats[i], uses_head ? &tapped : nullptr);
      dev_ctc_sum +=
          ctc_forward_backward(lp.value(), dev_set[i].target, mc.blank_index).loss;
      std::vector<int> ids = greedy_decode(lp.value(), mc.blank_index);
      tally.add(dev_set[i].transcript, decode_labels(ids, mc.vocab));
      if (uses_head) {
        Var logits = bm.noise_logits(tapped, false);
        if (detail::argmax_row(logits.value()) == static_cast<int>(dev_aug.labels[i]))
          ++noise_correct;
      }
    }
    m.dev_wer = tally.percent();
    double dev_ctc = dev_ctc_sum / static_cast<double>(dev_set.size());
    if (uses_head) {
      m.has_noise_acc = true;
      m.noise_acc = 100.0 * static_cast<double>(noise_correct) /
                    static_cast<double>(dev_set.size());
    }
    result.metrics.push_back(m);

    if (m.dev_wer < best_wer || (m.dev_wer == best_wer && dev_ctc < best_dev_ctc)) {
      best_wer = m.dev_wer;
      best_dev_ctc = dev_ctc;
      result.best_params = params;
      result.best_epoch = epoch;
      result.best_dev_wer = m.dev_wer;
    }

    if (log) {
      *log << "epoch " << epoch << " l_ctc " << m.l_ctc;
      if (uses_head)
        *log << " l_ce " << m.l_ce << " l_hybrid " << m.l_hybrid << " eta " << m.eta;
      *log << " dev_wer " << m.dev_wer;
      if (uses_head) *log << " noise_acc " << m.noise_acc;
      *log << "\n";
    }

    if (uses_head) state.eta = anneal_eta(state.eta, cfg.anneal_factor);
    state.epoch = epoch;
  }
  return result;
}

}  // namespace nrasr

#endif  // NRASR_TRAINER_HPP_
