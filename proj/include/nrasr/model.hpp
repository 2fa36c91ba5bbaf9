// nrasr/model.hpp

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

// Acoustic model: 2D convolutions with clipped-ReLU, a stack of bidirectional
// LSTM layers, and a fully-connected log-softmax output, plus an auxiliary
// noise-classifier head (one BiLSTM, mean pooling over frames, two linear
// layers) fed from a tappable trunk layer.
//
// Every parameter carries a ParamTag: its group (feature extractor =
// convs + LSTM layers up to the tap; recognition = remaining LSTMs + FC;
// noise classifier = the head) and whether it belongs to the soft-freeze
// set (the FC layer and the last two LSTM layers).

#ifndef NRASR_MODEL_HPP_
#define NRASR_MODEL_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "nrasr/autodiff.hpp"
#include "nrasr/common.hpp"
#include "nrasr/rng.hpp"
#include "nrasr/stft.hpp"
#include "nrasr/tensor.hpp"

namespace nrasr {

struct ConvSpec {
  std::size_t out_channels = 8;
  std::size_t kernel_f = 5, kernel_t = 5;
  std::size_t stride_f = 2, stride_t = 2;
};

struct ModelConfig {
  std::vector<ConvSpec> convs = {{8, 5, 5, 2, 2}, {8, 3, 3, 2, 2}};
  std::size_t n_recurrent = 5;
  std::size_t hidden_size = 32;  // per direction
  std::size_t tap_index = 2;     // trunk layer feeding the noise head
  std::size_t n_noise_labels = 8;
  std::size_t noise_hidden = 0;         // 0 = hidden_size
  std::size_t noise_linear_hidden = 0;  // 0 = hidden_size
  std::size_t input_bins = 161;
  int blank_index = 0;
  std::vector<std::string> vocab;  // vocab[blank_index] is the blank symbol

  bool operator==(const ModelConfig& o) const {
    auto conv_eq = [](const ConvSpec& a, const ConvSpec& b) {
      return a.out_channels == b.out_channels && a.kernel_f == b.kernel_f &&
             a.kernel_t == b.kernel_t && a.stride_f == b.stride_f && a.stride_t == b.stride_t;
    };
    if (convs.size() != o.convs.size()) return false;
    for (std::size_t i = 0; i < convs.size(); ++i)
      if (!conv_eq(convs[i], o.convs[i])) return false;
    return n_recurrent == o.n_recurrent && hidden_size == o.hidden_size &&
           tap_index == o.tap_index && n_noise_labels == o.n_noise_labels &&
           noise_hidden == o.noise_hidden && noise_linear_hidden == o.noise_linear_hidden &&
           input_bins == o.input_bins && blank_index == o.blank_index && vocab == o.vocab;
  }
};

inline void validate_config(const ModelConfig& cfg) {
  NRASR_REQUIRE(!cfg.convs.empty(), "model config: need at least one conv layer");
  for (const ConvSpec& c : cfg.convs)
    NRASR_REQUIRE(c.out_channels > 0 && c.kernel_f > 0 && c.kernel_t > 0 && c.stride_f > 0 &&
                      c.stride_t > 0,
                  "model config: conv spec fields must be positive");
  NRASR_REQUIRE(cfg.n_recurrent >= 1, "model config: need at least one recurrent layer");
  NRASR_REQUIRE(cfg.tap_index < cfg.n_recurrent, "model config: tap index "
                                                     << cfg.tap_index << " outside 0.."
                                                     << cfg.n_recurrent - 1);
  NRASR_REQUIRE(cfg.hidden_size >= 1, "model config: zero hidden size");
  NRASR_REQUIRE(cfg.n_noise_labels >= 2, "model config: need at least two noise labels");
  NRASR_REQUIRE(cfg.vocab.size() >= 2, "model config: vocab needs blank plus a symbol");
  NRASR_REQUIRE(cfg.blank_index >= 0 &&
                    static_cast<std::size_t>(cfg.blank_index) < cfg.vocab.size(),
                "model config: blank index " << cfg.blank_index << " outside vocab");
  for (std::size_t i = 0; i < cfg.vocab.size(); ++i) {
    NRASR_REQUIRE(!cfg.vocab[i].empty(), "model config: empty vocab symbol at " << i);
    for (char ch : cfg.vocab[i])
      NRASR_REQUIRE(ch != ' ' && ch != '\t' && ch != ',',
                    "model config: vocab symbol '" << cfg.vocab[i]
                                                   << "' contains whitespace or comma");
    for (std::size_t j = i + 1; j < cfg.vocab.size(); ++j)
      NRASR_REQUIRE(cfg.vocab[i] != cfg.vocab[j],
                    "model config: duplicate vocab symbol '" << cfg.vocab[i] << "'");
  }
  NRASR_REQUIRE(cfg.input_bins > 0, "model config: zero input bins");
  // Frequency axis must survive the conv stack.
  std::size_t f = cfg.input_bins;
  for (const ConvSpec& c : cfg.convs) {
    NRASR_REQUIRE(f >= c.kernel_f, "model config: " << f << " frequency bins too few for "
                                                    << c.kernel_f << "-tall conv kernel");
    f = (f - c.kernel_f) / c.stride_f + 1;
  }
}

// Fills the defaulted head widths; call before init so checkpoints carry
// explicit values.
inline ModelConfig resolved_config(ModelConfig cfg) {
  if (cfg.noise_hidden == 0) cfg.noise_hidden = cfg.hidden_size;
  if (cfg.noise_linear_hidden == 0) cfg.noise_linear_hidden = cfg.hidden_size;
  validate_config(cfg);
  return cfg;
}

// Fewest input frames for which the conv stack emits at least one frame.
inline std::size_t required_min_input_frames(const ModelConfig& cfg) {
  std::size_t t = 1;
  for (std::size_t i = cfg.convs.size(); i-- > 0;)
    t = cfg.convs[i].kernel_t + cfg.convs[i].stride_t * (t - 1);
  return t;
}

inline std::size_t conv_output_frames(const ModelConfig& cfg, std::size_t t) {
  for (const ConvSpec& c : cfg.convs) {
    NRASR_REQUIRE(t >= c.kernel_t, "model: input of " << t << " frames too short; the conv "
                                                      << "stack needs at least "
                                                      << required_min_input_frames(cfg)
                                                      << " frames");
    t = (t - c.kernel_t) / c.stride_t + 1;
  }
  return t;
}

inline std::size_t conv_output_bins(const ModelConfig& cfg) {
  std::size_t f = cfg.input_bins;
  for (const ConvSpec& c : cfg.convs) f = (f - c.kernel_f) / c.stride_f + 1;
  return f;
}

// Width of the sequence rows entering the first recurrent layer.
inline std::size_t trunk_input_size(const ModelConfig& cfg) {
  return cfg.convs.back().out_channels * conv_output_bins(cfg);
}

enum class ParamGroup { kFeatureExtractor, kRecognition, kNoiseClassifier };

inline const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kFeatureExtractor: return "feature_extractor";
    case ParamGroup::kRecognition: return "recognition";
    case ParamGroup::kNoiseClassifier: return "noise_classifier";
  }
  return "?";
}

struct ParamTag {
  ParamGroup group = ParamGroup::kFeatureExtractor;
  std::string layer_id;
  bool soft_freeze_member = false;
};

struct Param {
  std::string name;
  ParamTag tag;
  Tensor value;
};

struct ModelParams {
  ModelConfig cfg;
  std::vector<Param> params;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].name == name) return i;
    NRASR_ERR("model: no parameter named '" << name << "'");
  }
  const Tensor& value(const std::string& name) const { return params[index_of(name)].value; }
};

namespace detail {

inline Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = uniform_real(rng, -bound, bound);
  return t;
}

// One direction of one LSTM layer: wx [D,4H], wh [H,4H], b [1,4H].
inline void add_lstm_params(std::vector<Param>& out, const std::string& prefix,
                            const ParamTag& tag, std::size_t input_size, std::size_t h,
                            Rng& rng) {
  out.push_back({prefix + ".wx", tag, init_weight({input_size, 4 * h}, input_size, rng)});
  out.push_back({prefix + ".wh", tag, init_weight({h, 4 * h}, h, rng)});
  out.push_back({prefix + ".b", tag, Tensor::zeros({1, 4 * h})});
}

}  // namespace detail

// Weights are uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); biases zero.
// Parameter order (and hence the RNG draw order) is fixed: convs, trunk
// LSTMs (fwd then bwd per layer), FC, head LSTM, head linears.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams mp;
  mp.cfg = resolved_config(config);
  const ModelConfig& cfg = mp.cfg;
  Rng rng(combine_seed(seed, "init_params"));

  std::size_t cin = 1;
  for (std::size_t i = 0; i < cfg.convs.size(); ++i) {
    const ConvSpec& c = cfg.convs[i];
    ParamTag tag{ParamGroup::kFeatureExtractor, "conv" + std::to_string(i), false};
    std::size_t fan_in = cin * c.kernel_f * c.kernel_t;
    mp.params.push_back({tag.layer_id + ".w", tag,
                         detail::init_weight({c.out_channels, cin, c.kernel_f, c.kernel_t},
                                             fan_in, rng)});
    mp.params.push_back({tag.layer_id + ".b", tag, Tensor::zeros({c.out_channels})});
    cin = c.out_channels;
  }

  std::size_t h = cfg.hidden_size;
  std::size_t in = trunk_input_size(cfg);
  for (std::size_t i = 0; i < cfg.n_recurrent; ++i) {
    ParamGroup group = (i <= cfg.tap_index) ? ParamGroup::kFeatureExtractor
                                            : ParamGroup::kRecognition;
    bool frozen_member = (i + 2 >= cfg.n_recurrent);  // last two layers
    ParamTag tag{group, "lstm" + std::to_string(i), frozen_member};
    detail::add_lstm_params(mp.params, tag.layer_id + ".fwd", tag, in, h, rng);
    detail::add_lstm_params(mp.params, tag.layer_id + ".bwd", tag, in, h, rng);
    in = 2 * h;
  }

  ParamTag fc_tag{ParamGroup::kRecognition, "fc", true};
  mp.params.push_back({"fc.w", fc_tag, detail::init_weight({2 * h, cfg.vocab.size()}, 2 * h, rng)});
  mp.params.push_back({"fc.b", fc_tag, Tensor::zeros({1, cfg.vocab.size()})});

  std::size_t nh = cfg.noise_hidden;
  ParamTag head_tag{ParamGroup::kNoiseClassifier, "noise_lstm", false};
  detail::add_lstm_params(mp.params, "noise_lstm.fwd", head_tag, 2 * h, nh, rng);
  detail::add_lstm_params(mp.params, "noise_lstm.bwd", head_tag, 2 * h, nh, rng);
  std::size_t nl = cfg.noise_linear_hidden;
  ParamTag fc1_tag{ParamGroup::kNoiseClassifier, "noise_fc1", false};
  mp.params.push_back({"noise_fc1.w", fc1_tag, detail::init_weight({2 * nh, nl}, 2 * nh, rng)});
  mp.params.push_back({"noise_fc1.b", fc1_tag, Tensor::zeros({1, nl})});
  ParamTag fc2_tag{ParamGroup::kNoiseClassifier, "noise_fc2", false};
  mp.params.push_back(
      {"noise_fc2.w", fc2_tag, detail::init_weight({nl, cfg.n_noise_labels}, nl, rng)});
  mp.params.push_back({"noise_fc2.b", fc2_tag, Tensor::zeros({1, cfg.n_noise_labels})});
  return mp;
}

// Group -> parameter indices; a total, disjoint partition of the params.
inline std::vector<std::size_t> params_in_group(const ModelParams& mp, ParamGroup g) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mp.params.size(); ++i)
    if (mp.params[i].tag.group == g) out.push_back(i);
  return out;
}

inline std::vector<double> flatten_params(const ModelParams& mp) {
  std::vector<double> out;
  for (const Param& p : mp.params) out.insert(out.end(), p.value.data.begin(), p.value.data.end());
  return out;
}

inline void set_flat_params(ModelParams& mp, const std::vector<double>& flat) {
  std::size_t pos = 0;
  for (Param& p : mp.params) {
    NRASR_REQUIRE(pos + p.value.size() <= flat.size(),
                  "set_flat_params: vector too short at '" << p.name << "'");
    std::copy(flat.begin() + pos, flat.begin() + pos + p.value.size(), p.value.data.begin());
    pos += p.value.size();
  }
  NRASR_REQUIRE(pos == flat.size(), "set_flat_params: " << flat.size() << " values for " << pos
                                                        << " parameter slots");
}

// All parameters bound as leaves of one graph; several utterances can be
// run forward against the same binding so gradients accumulate per batch.
class BoundModel {
 public:
  BoundModel(Graph& g, const ModelParams& mp) : g_(&g), mp_(&mp) {
    vars_.reserve(mp.params.size());
    for (const Param& p : mp.params) vars_.push_back(g.input(p.value));
  }

  const ModelConfig& cfg() const { return mp_->cfg; }
  const std::vector<Var>& vars() const { return vars_; }
  Var var(const std::string& name) const { return vars_[mp_->index_of(name)]; }

  // Trunk forward. Returns [T',V] per-frame log-probs; if tapped_out is
  // non-null it receives the [T',2H] output of trunk layer tap_index.
  Var forward_log_probs(const FeatureMatrix& feat, Var* tapped_out = nullptr) const {
    const ModelConfig& cfg = mp_->cfg;
    NRASR_REQUIRE(feat.bins == cfg.input_bins, "model: features have " << feat.bins
                                                                       << " bins, config expects "
                                                                       << cfg.input_bins);
    conv_output_frames(cfg, feat.frames);  // errors if too short
    Var x = g_->input(Tensor({1, feat.bins, feat.frames}, feat.values));
    for (std::size_t i = 0; i < cfg.convs.size(); ++i) {
      const ConvSpec& c = cfg.convs[i];
      std::string id = "conv" + std::to_string(i);
      x = clipped_relu(conv2d(x, var(id + ".w"), var(id + ".b"), c.stride_f, c.stride_t));
    }
    Var seq = seq_from_chw(x);
    Var tapped = seq;
    for (std::size_t i = 0; i < cfg.n_recurrent; ++i) {
      seq = bilstm(seq, "lstm" + std::to_string(i), cfg.hidden_size);
      if (i == cfg.tap_index) tapped = seq;
    }
    if (tapped_out) *tapped_out = tapped;
    Var logits = add_rowvec(matmul(seq, var("fc.w")), var("fc.b"));
    return log_softmax(logits, 1);
  }

  // Noise-classifier head over the tapped trunk output. With reverse set the
  // tapped representation passes through the gradient-reversal op first;
  // forward values are identical either way.
  Var noise_logits(Var tapped, bool reverse, double coef = 1.0) const {
    Var x = reverse ? grad_reverse(tapped, coef) : tapped;
    Var seq = bilstm(x, "noise_lstm", mp_->cfg.noise_hidden);
    return noise_mlp(mean_over_rows(seq));
  }

  // The post-pooling part of the head: two linear layers with a tanh between.
  Var noise_mlp(Var pooled) const {
    Var h1 = tanh(add_rowvec(matmul(pooled, var("noise_fc1.w")), var("noise_fc1.b")));
    return add_rowvec(matmul(h1, var("noise_fc2.w")), var("noise_fc2.b"));
  }

  // After backward(), copies each parameter's gradient out (same order as
  // ModelParams.params).
  std::vector<Tensor> gradients() const {
    std::vector<Tensor> out;
    out.reserve(vars_.size());
    for (const Var& v : vars_) out.push_back(v.grad());
    return out;
  }

 private:
  // [T,D] -> [T,2H] using the layer's fwd/bwd parameter sets.
  Var bilstm(Var x, const std::string& id, std::size_t h) const {
    std::vector<Var> fwd = lstm_direction(x, id + ".fwd", h, false);
    std::vector<Var> bwd = lstm_direction(x, id + ".bwd", h, true);
    return concat_cols(stack_rows(fwd), stack_rows(bwd));
  }

  std::vector<Var> lstm_direction(Var x, const std::string& prefix, std::size_t h,
                                  bool reversed) const {
    std::size_t t_len = x.shape()[0];
    Var wx = var(prefix + ".wx");
    Var wh = var(prefix + ".wh");
    Var b = var(prefix + ".b");
    Var xp = matmul(x, wx);  // [T,4H]
    Var hprev = g_->input(Tensor::zeros({1, h}));
    Var cprev = g_->input(Tensor::zeros({1, h}));
    std::vector<Var> hs(t_len);
    for (std::size_t i = 0; i < t_len; ++i) {
      std::size_t t = reversed ? t_len - 1 - i : i;
      Var gates = add(add(row(xp, t), matmul(hprev, wh)), b);
      Var ig = sigmoid(slice_cols(gates, 0, h));
      Var fg = sigmoid(slice_cols(gates, h, 2 * h));
      Var gg = tanh(slice_cols(gates, 2 * h, 3 * h));
      Var og = sigmoid(slice_cols(gates, 3 * h, 4 * h));
      Var c = add(mul(fg, cprev), mul(ig, gg));
      Var hv = mul(og, tanh(c));
      hs[t] = hv;
      hprev = hv;
      cprev = c;
    }
    return hs;
  }

  Graph* g_;
  const ModelParams* mp_;
  std::vector<Var> vars_;
};

// -log softmax(logits)[label] for a [1,K] logits row.
inline Var cross_entropy(Var logits, int label) {
  NRASR_REQUIRE(logits.shape().size() == 2 && logits.shape()[0] == 1,
                "cross_entropy: logits must be [1,K], got " << shape_str(logits.shape()));
  NRASR_REQUIRE(label >= 0 && static_cast<std::size_t>(label) < logits.shape()[1],
                "cross_entropy: label " << label << " outside " << logits.shape()[1]
                                        << " classes");
  return scale(cell(log_softmax(logits, 1), 0, static_cast<std::size_t>(label)), -1.0);
}

}  // namespace nrasr

#endif  // NRASR_MODEL_HPP_
