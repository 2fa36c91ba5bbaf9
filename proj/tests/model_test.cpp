// nrasr/tests/model_test.cpp

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
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "nrasr/checkpoint.hpp"
#include "nrasr/ctc.hpp"
#include "nrasr/model.hpp"
#include "nrasr/rng.hpp"

namespace nrasr {
namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.convs = {{2, 3, 3, 2, 2}};
  cfg.n_recurrent = 2;
  cfg.hidden_size = 4;
  cfg.tap_index = 0;
  cfg.noise_hidden = 3;
  cfg.noise_linear_hidden = 3;
  cfg.input_bins = 7;
  cfg.vocab = {"<blank>", "a", "b", "c"};
  return cfg;
}

FeatureMatrix random_features(std::size_t bins, std::size_t frames, std::uint64_t seed) {
  FeatureMatrix f;
  f.bins = bins;
  f.frames = frames;
  f.values.resize(bins * frames);
  Rng rng(seed);
  for (double& v : f.values) v = uniform_real(rng, -1.0, 1.0);
  return f;
}

TEST(InitParams, DeterministicUnderSeed) {
  ModelParams a = init_params(tiny_config(), 7);
  ModelParams b = init_params(tiny_config(), 7);
  ASSERT_EQ(a.params.size(), b.params.size());
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    EXPECT_EQ(a.params[i].name, b.params[i].name);
    EXPECT_EQ(0.0, max_abs_diff(a.params[i].value, b.params[i].value)) << a.params[i].name;
  }
  ModelParams c = init_params(tiny_config(), 8);
  EXPECT_NE(0.0, max_abs_diff(a.value("fc.w"), c.value("fc.w")));
}

TEST(InitParams, BiasesZeroWeightsBounded) {
  ModelParams mp = init_params(tiny_config(), 3);
  for (const Param& p : mp.params) {
    if (p.name.size() >= 2 && p.name.substr(p.name.size() - 2) == ".b") {
      for (double v : p.value.data) ASSERT_EQ(0.0, v) << p.name;
    }
  }
  // conv0.w fan_in = 1*3*3; lstm0.fwd.wx fan_in = trunk width 6; fc.w fan_in = 2H = 8.
  auto check_bound = [&](const std::string& name, std::size_t fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double v : mp.value(name).data) ASSERT_LE(std::fabs(v), bound) << name;
  };
  check_bound("conv0.w", 9);
  check_bound("lstm0.fwd.wx", 6);
  check_bound("lstm1.bwd.wh", 4);
  check_bound("fc.w", 8);
}

TEST(ParamGroups, PartitionAndSoftFreezeSets) {
  // Default config shape: 2 convs, 5 recurrent layers, tap after layer 2.
  ModelConfig cfg;
  cfg.vocab = {"<blank>", "a"};
  cfg.input_bins = 33;
  cfg.hidden_size = 4;
  cfg.noise_hidden = 3;
  cfg.noise_linear_hidden = 3;
  ModelParams mp = init_params(cfg, 1);

  std::set<std::string> fe, rec, noise, frozen;
  std::size_t total = 0;
  for (const Param& p : mp.params) {
    ++total;
    if (p.tag.group == ParamGroup::kFeatureExtractor) fe.insert(p.tag.layer_id);
    if (p.tag.group == ParamGroup::kRecognition) rec.insert(p.tag.layer_id);
    if (p.tag.group == ParamGroup::kNoiseClassifier) noise.insert(p.tag.layer_id);
    if (p.tag.soft_freeze_member) frozen.insert(p.tag.layer_id);
  }
  EXPECT_EQ(std::set<std::string>({"conv0", "conv1", "lstm0", "lstm1", "lstm2"}), fe);
  EXPECT_EQ(std::set<std::string>({"lstm3", "lstm4", "fc"}), rec);
  EXPECT_EQ(std::set<std::string>({"noise_lstm", "noise_fc1", "noise_fc2"}), noise);
  EXPECT_EQ(std::set<std::string>({"lstm3", "lstm4", "fc"}), frozen);

  std::size_t grouped = params_in_group(mp, ParamGroup::kFeatureExtractor).size() +
                        params_in_group(mp, ParamGroup::kRecognition).size() +
                        params_in_group(mp, ParamGroup::kNoiseClassifier).size();
  EXPECT_EQ(total, grouped);  // total and disjoint by construction of the scan
}

TEST(Forward, LogProbRowsAreDistributions) {
  ModelParams mp = init_params(tiny_config(), 5);
  FeatureMatrix feat = random_features(7, 11, 6);
  Graph g;
  BoundModel bm(g, mp);
  Var lp = bm.forward_log_probs(feat);
  ASSERT_EQ(2u, lp.shape().size());
  EXPECT_EQ(4u, lp.shape()[1]);
  for (std::size_t t = 0; t < lp.shape()[0]; ++t) {
    double sum = 0;
    for (std::size_t k = 0; k < lp.shape()[1]; ++k) sum += std::exp(lp.value().at(t, k));
    EXPECT_NEAR(1.0, sum, 1e-12) << "frame " << t;
  }
}

TEST(Forward, StrideFormulaAndMinimumFrames) {
  ModelConfig cfg = tiny_config();
  EXPECT_EQ(3u, required_min_input_frames(cfg));
  EXPECT_EQ(1u, conv_output_frames(cfg, 3));
  EXPECT_EQ(1u, conv_output_frames(cfg, 4));
  EXPECT_EQ(2u, conv_output_frames(cfg, 5));

  ModelParams mp = init_params(cfg, 5);
  Graph g;
  BoundModel bm(g, mp);
  Var lp = bm.forward_log_probs(random_features(7, 3, 1));
  EXPECT_EQ(1u, lp.shape()[0]);

  // Default conv stack: (5,2) then (3,2) needs 9 frames.
  ModelConfig big;
  big.vocab = {"<blank>", "a"};
  EXPECT_EQ(9u, required_min_input_frames(big));
}

TEST(Forward, TooShortInputReportsRequiredMinimum) {
  ModelParams mp = init_params(tiny_config(), 5);
  Graph g;
  BoundModel bm(g, mp);
  try {
    bm.forward_log_probs(random_features(7, 2, 2));
    FAIL() << "expected error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string::npos, std::string(e.what()).find("at least 3")) << e.what();
  }
  EXPECT_THROW(bm.forward_log_probs(random_features(6, 8, 2)), std::runtime_error);
}

TEST(Forward, BackwardDirectionSeesLastFrameFromFirstOutput) {
  // 9 input frames, kernel 3 stride 2: the last conv window covers the last
  // input frame, so perturbing it must reach output frame 0 via the
  // backward-direction LSTM channels.
  ModelParams mp = init_params(tiny_config(), 9);
  FeatureMatrix a = random_features(7, 9, 3);
  FeatureMatrix b = a;
  for (std::size_t bin = 0; bin < b.bins; ++bin) b.at(bin, 8) += 0.25;

  Graph ga, gb;
  Tensor row_a, row_b;
  {
    BoundModel bm(ga, mp);
    Var lp = bm.forward_log_probs(a);
    row_a = lp.value();
  }
  {
    BoundModel bm(gb, mp);
    Var lp = bm.forward_log_probs(b);
    row_b = lp.value();
  }
  double diff0 = 0;
  for (std::size_t k = 0; k < 4; ++k)
    diff0 = std::max(diff0, std::fabs(row_a.at(0, k) - row_b.at(0, k)));
  EXPECT_GT(diff0, 1e-12);
}

TEST(Forward, TinyModelPassesFiniteDifferenceCheck) {
  // Hybrid objective (CTC + weighted noise cross-entropy) so every
  // parameter, including the head, is on the gradient path. Step h=1e-3:
  // large enough that the ~eps*|f|/(2h) rounding noise of the central
  // difference stays below tolerance even for coordinates with nearly
  // vanishing gradients, small enough that truncation error is negligible.
  ModelConfig cfg = tiny_config();
  const std::uint64_t seed = 2;
  ModelParams mp0 = init_params(cfg, combine_seed(seed, 1));
  FeatureMatrix feat = random_features(7, 17, combine_seed(seed, 2));
  std::vector<int> target = {1, 2, 3};
  const int noise_label = static_cast<int>(seed % 8);

  auto eval = [&](const std::vector<double>& p, std::vector<double>* grad_out) {
    ModelParams mp = mp0;
    set_flat_params(mp, p);
    Graph g;
    BoundModel bm(g, mp);
    Var tapped;
    Var lp = bm.forward_log_probs(feat, &tapped);
    Var loss = add(scale(ctc_loss(lp, target, cfg.blank_index), 0.7),
                   scale(cross_entropy(bm.noise_logits(tapped, false), noise_label), 3.0));
    if (grad_out) {
      g.backward(loss);
      grad_out->clear();
      for (const Tensor& t : bm.gradients())
        grad_out->insert(grad_out->end(), t.data.begin(), t.data.end());
    }
    return loss.scalar();
  };

  std::vector<double> p0 = flatten_params(mp0);
  std::vector<double> analytic;
  eval(p0, &analytic);
  double err = finite_diff_check([&](const std::vector<double>& p) { return eval(p, nullptr); },
                                 p0, analytic, 1e-3);
  EXPECT_LT(err, 1e-4);
}

TEST(NoiseHead, ReverseFlagKeepsForwardIdentical) {
  ModelParams mp = init_params(tiny_config(), 13);
  FeatureMatrix feat = random_features(7, 9, 14);
  Graph g;
  BoundModel bm(g, mp);
  Var tapped;
  bm.forward_log_probs(feat, &tapped);
  Var plain = bm.noise_logits(tapped, false);
  Var reversed = bm.noise_logits(tapped, true, 1.0);
  ASSERT_EQ(Shape({1, 8}), plain.shape());
  for (std::size_t i = 0; i < 8; ++i)
    EXPECT_EQ(plain.value().data[i], reversed.value().data[i]);
}

TEST(NoiseHead, UniformLogitsGiveLog8CrossEntropy) {
  ModelParams mp = init_params(tiny_config(), 15);
  // Zero the final linear layer: logits become exactly uniform.
  mp.params[mp.index_of("noise_fc2.w")].value = Tensor::zeros({3, 8});
  mp.params[mp.index_of("noise_fc2.b")].value = Tensor::zeros({1, 8});
  FeatureMatrix feat = random_features(7, 9, 16);
  Graph g;
  BoundModel bm(g, mp);
  Var tapped;
  bm.forward_log_probs(feat, &tapped);
  Var logits = bm.noise_logits(tapped, false);
  for (int label = 0; label < 8; ++label)
    EXPECT_NEAR(std::log(8.0), cross_entropy(logits, label).scalar(), 1e-12);
}

TEST(NoiseHead, ReversalNegatesTrunkGradientsExactly) {
  ModelConfig cfg = tiny_config();
  ModelParams mp = init_params(cfg, 17);
  FeatureMatrix feat = random_features(7, 9, 18);
  const int label = 2;

  auto run = [&](bool reverse) {
    Graph g;
    BoundModel bm(g, mp);
    Var tapped;
    bm.forward_log_probs(feat, &tapped);
    Var loss = cross_entropy(bm.noise_logits(tapped, reverse), label);
    g.backward(loss);
    std::vector<double> grads;
    for (std::size_t i : params_in_group(mp, ParamGroup::kFeatureExtractor)) {
      const Tensor& t = bm.vars()[i].grad();
      grads.insert(grads.end(), t.data.begin(), t.data.end());
    }
    return grads;
  };

  std::vector<double> plain = run(false);
  std::vector<double> reversed = run(true);
  ASSERT_EQ(plain.size(), reversed.size());
  double worst = 0;
  bool any_nonzero = false;
  for (std::size_t i = 0; i < plain.size(); ++i) {
    worst = std::max(worst, std::fabs(plain[i] + reversed[i]));
    if (plain[i] != 0.0) any_nonzero = true;
  }
  EXPECT_TRUE(any_nonzero);
  EXPECT_LT(worst, 1e-12);
}

TEST(NoiseHead, PooledMlpIsPermutationInvariant) {
  ModelParams mp = init_params(tiny_config(), 19);
  Rng rng(20);
  Tensor x = Tensor::zeros({6, 6});  // 6 frames of 2*noise_hidden channels
  for (double& v : x.data) v = uniform_real(rng, -1.0, 1.0);
  Tensor perm = Tensor::zeros({6, 6});
  std::vector<std::size_t> order = {4, 0, 5, 2, 1, 3};
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 6; ++c) perm.at(r, c) = x.at(order[r], c);

  Graph g;
  BoundModel bm(g, mp);
  Var a = bm.noise_mlp(mean_over_rows(g.input(x)));
  Var b = bm.noise_mlp(mean_over_rows(g.input(perm)));
  for (std::size_t i = 0; i < 8; ++i)
    EXPECT_NEAR(a.value().data[i], b.value().data[i], 1e-12);
}

TEST(Checkpoint, SaveLoadRoundTripIsExact) {
  ModelParams mp = init_params(tiny_config(), 21);
  // Make values "trained-looking" rather than fresh-init.
  Rng rng(22);
  for (Param& p : mp.params)
    for (double& v : p.value.data) v += gaussian(rng) * 0.1;

  std::string path = std::string(::testing::TempDir()) + "/model.ckpt";
  save_checkpoint(path, mp);
  ModelParams back = load_checkpoint(path);
  EXPECT_TRUE(back.cfg == mp.cfg);
  ASSERT_EQ(mp.params.size(), back.params.size());
  for (std::size_t i = 0; i < mp.params.size(); ++i) {
    EXPECT_EQ(mp.params[i].name, back.params[i].name);
    EXPECT_EQ(mp.params[i].tag.layer_id, back.params[i].tag.layer_id);
    EXPECT_EQ(0.0, max_abs_diff(mp.params[i].value, back.params[i].value))
        << mp.params[i].name;
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, MismatchedConfigIsError) {
  ModelParams mp = init_params(tiny_config(), 23);
  std::string path = std::string(::testing::TempDir()) + "/model2.ckpt";
  save_checkpoint(path, mp);

  EXPECT_NO_THROW(load_checkpoint(path, tiny_config()));
  ModelConfig other = tiny_config();
  other.hidden_size = 5;
  EXPECT_THROW(load_checkpoint(path, other), std::runtime_error);
  ModelConfig other_vocab = tiny_config();
  other_vocab.vocab = {"<blank>", "a", "b", "d"};
  EXPECT_THROW(load_checkpoint(path, other_vocab), std::runtime_error);
  std::remove(path.c_str());
}

TEST(Checkpoint, CorruptFilesAreErrors) {
  EXPECT_THROW(checkpoint_from_string("garbage\n", "test"), std::runtime_error);

  ModelParams mp = init_params(tiny_config(), 24);
  std::string text = checkpoint_to_string(mp);
  // Truncate: drop the trailing "end" line.
  std::string truncated = text.substr(0, text.rfind("end"));
  EXPECT_THROW(checkpoint_from_string(truncated, "test"), std::runtime_error);

  // Corrupt a shape: claims the wrong hidden size for a param.
  std::string bent = text;
  std::size_t pos = bent.find("param fc.w r fc 1 2 8 4");
  ASSERT_NE(std::string::npos, pos);
  bent.replace(pos, 23, "param fc.w r fc 1 2 9 4");
  EXPECT_THROW(checkpoint_from_string(bent, "test"), std::runtime_error);
}

TEST(Config, ValidationCatchesBadShapes) {
  ModelConfig cfg = tiny_config();
  cfg.tap_index = 2;  // >= n_recurrent
  EXPECT_THROW(validate_config(cfg), std::runtime_error);

  cfg = tiny_config();
  cfg.vocab = {"<blank>"};
  EXPECT_THROW(validate_config(cfg), std::runtime_error);

  cfg = tiny_config();
  cfg.vocab = {"<blank>", "a", "a"};
  EXPECT_THROW(validate_config(cfg), std::runtime_error);

  cfg = tiny_config();
  cfg.input_bins = 2;  // smaller than the 3-tall conv kernel
  EXPECT_THROW(validate_config(cfg), std::runtime_error);

  cfg = tiny_config();
  cfg.vocab = {"<blank>", "a b"};
  EXPECT_THROW(validate_config(cfg), std::runtime_error);
}

}  // namespace
}  // namespace nrasr
