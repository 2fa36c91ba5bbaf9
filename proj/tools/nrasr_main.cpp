// nrasr/tools/nrasr_main.cpp

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

// Command-line entry point binding the pipeline:
//   synth     - generate a synthetic tone corpus plus a synthetic noise set
//   mix       - build the noisy evaluation grid from a clean manifest
//   train     - train an acoustic model in one of four regimes
//   eval      - decode manifests and write the WER results grid CSV
//   decode    - print the greedy transcript of one WAV file
//   gradcheck - run the finite-difference gradient suite
//
// Configuration is a JSON object with flat dotted keys ("train.mode"); the
// command-line flags override file values, and unknown keys are rejected.
// Logs go to standard error; data artifacts only to files (decode and
// gradcheck print their single result to standard output).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nrasr/checkpoint.hpp"
#include "nrasr/corpus.hpp"
#include "nrasr/csv.hpp"
#include "nrasr/eval.hpp"
#include "nrasr/gradcheck.hpp"
#include "nrasr/trainer.hpp"

namespace nrasr {
namespace {

using nlohmann::json;

// Flat dotted-key configuration: file values overlaid by flag values.
class RunConfig {
 public:
  void load_file(const std::string& path) {
    std::string text = read_text_file(path);
    json parsed;
    try {
      parsed = json::parse(text);
    } catch (const json::parse_error& e) {
      NRASR_ERR("config " << path << ": " << e.what());
    }
    NRASR_REQUIRE(parsed.is_object(), "config " << path << ": top level must be a JSON object");
    for (const auto& [key, value] : parsed.items()) {
      NRASR_REQUIRE(!value.is_object(),
                    "config " << path << ": key '" << key
                              << "' holds a nested object; use flat dotted keys");
      NRASR_REQUIRE(!value.is_null(), "config " << path << ": key '" << key << "' is null");
      file_[key] = value;
    }
    path_ = path;
  }

  void set_override(const std::string& key, json value) { overrides_[key] = std::move(value); }

  // Rejects any present key outside `allowed` (common keys are always valid).
  void restrict_to(std::set<std::string> allowed) const {
    for (const char* common : {"seed", "out", "threads"}) allowed.insert(common);
    for (const auto& [key, value] : file_) {
      if (allowed.count(key)) continue;
      std::string valid;
      for (const std::string& k : allowed) valid += (valid.empty() ? "" : ", ") + k;
      NRASR_ERR("config " << path_ << ": unknown key '" << key << "' (valid keys: " << valid
                          << ")");
    }
  }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  double get_double(const std::string& key, double fallback) const {
    const json* v = find(key);
    if (!v) return fallback;
    NRASR_REQUIRE(v->is_number(), "config key '" << key << "': expected a number");
    return v->get<double>();
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    const json* v = find(key);
    if (!v) return fallback;
    NRASR_REQUIRE(v->is_number_integer() && v->get<std::int64_t>() >= 0,
                  "config key '" << key << "': expected a non-negative integer");
    return static_cast<std::size_t>(v->get<std::int64_t>());
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const json* v = find(key);
    if (!v) return fallback;
    NRASR_REQUIRE(v->is_string(), "config key '" << key << "': expected a string");
    return v->get<std::string>();
  }

  std::string require_string(const std::string& key) const {
    NRASR_REQUIRE(has(key), "config: missing required key '" << key << "'");
    return get_string(key, "");
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    const json* v = find(key);
    if (!v) return fallback;
    NRASR_REQUIRE(v->is_array(), "config key '" << key << "': expected an array of numbers");
    std::vector<double> out;
    for (const json& item : *v) {
      NRASR_REQUIRE(item.is_number(), "config key '" << key << "': expected an array of numbers");
      out.push_back(item.get<double>());
    }
    return out;
  }

  std::vector<std::size_t> get_size_list(const std::string& key,
                                         const std::vector<std::size_t>& fallback) const {
    const json* v = find(key);
    if (!v) return fallback;
    NRASR_REQUIRE(v->is_array(), "config key '" << key << "': expected an array of integers");
    std::vector<std::size_t> out;
    for (const json& item : *v) {
      NRASR_REQUIRE(item.is_number_integer() && item.get<std::int64_t>() >= 0,
                    "config key '" << key << "': expected non-negative integers");
      out.push_back(static_cast<std::size_t>(item.get<std::int64_t>()));
    }
    return out;
  }

  std::vector<std::string> require_string_list(const std::string& key) const {
    const json* v = find(key);
    NRASR_REQUIRE(v, "config: missing required key '" << key << "'");
    NRASR_REQUIRE(v->is_array(), "config key '" << key << "': expected an array of strings");
    std::vector<std::string> out;
    for (const json& item : *v) {
      NRASR_REQUIRE(item.is_string(), "config key '" << key << "': expected an array of strings");
      out.push_back(item.get<std::string>());
    }
    NRASR_REQUIRE(!out.empty(), "config key '" << key << "': empty list");
    return out;
  }

  std::uint64_t seed() const {
    const json* v = find("seed");
    if (!v) return 0;
    NRASR_REQUIRE(v->is_number_integer() && v->get<std::int64_t>() >= 0,
                  "config key 'seed': expected a non-negative integer");
    return static_cast<std::uint64_t>(v->get<std::int64_t>());
  }

  std::string out_dir() const {
    std::string out = get_string("out", "");
    NRASR_REQUIRE(!out.empty(), "missing output directory (pass --out or set key 'out')");
    std::filesystem::create_directories(out);
    return out;
  }

 private:
  const json* find(const std::string& key) const {
    auto it = overrides_.find(key);
    if (it != overrides_.end()) return &it->second;
    it = file_.find(key);
    if (it != file_.end()) return &it->second;
    return nullptr;
  }

  std::map<std::string, json> file_;
  std::map<std::string, json> overrides_;
  std::string path_ = "<flags>";
};

std::filesystem::path join(const std::string& dir, const std::string& leaf) {
  return std::filesystem::path(dir) / leaf;
}

// --- synth -------------------------------------------------------------------

int cmd_synth(const RunConfig& cfg) {
  cfg.restrict_to({"synth.train_utts", "synth.test_utts", "synth.symbol_ms", "synth.min_symbols",
                   "synth.max_symbols", "synth.noise_files_per_type", "synth.noise_seconds",
                   "synth.noise_train_files", "synth.noise_test_files"});
  std::string out = cfg.out_dir();
  std::uint64_t seed = cfg.seed();
  std::size_t n_train = cfg.get_size("synth.train_utts", 300);
  std::size_t n_test = cfg.get_size("synth.test_utts", 50);
  std::size_t noise_files = cfg.get_size("synth.noise_files_per_type", 4);
  double noise_seconds = cfg.get_double("synth.noise_seconds", 6.0);
  std::size_t noise_train = cfg.get_size("synth.noise_train_files", 2);
  std::size_t noise_test = cfg.get_size("synth.noise_test_files", 2);

  SynthSpec spec;
  spec.symbol_ms = cfg.get_double("synth.symbol_ms", spec.symbol_ms);
  spec.min_symbols = cfg.get_size("synth.min_symbols", spec.min_symbols);
  spec.max_symbols = cfg.get_size("synth.max_symbols", spec.max_symbols);

  std::cerr << "synth: seed " << seed << ", " << n_train << " train / " << n_test
            << " test utterances, " << noise_files << " noise files per type\n";

  SynthSpec train_spec = spec;
  train_spec.seed = combine_seed(seed, "synth-train");
  std::vector<ManifestEntry> train_entries =
      synth_corpus(train_spec, n_train, join(out, "train").string());
  save_manifest(train_entries, join(out, "train_manifest.csv").string());

  SynthSpec test_spec = spec;
  test_spec.seed = combine_seed(seed, "synth-test");
  std::vector<ManifestEntry> test_entries =
      synth_corpus(test_spec, n_test, join(out, "test").string());
  save_manifest(test_entries, join(out, "test_manifest.csv").string());

  auto noise_set = synth_noise_set(join(out, "noise").string(), noise_files, noise_seconds,
                                   combine_seed(seed, "noise"));
  save_noise_set(noise_set, join(out, "noise_set.csv").string());
  NoisePartition split = partition_noise_set(noise_set, noise_train, noise_test,
                                             combine_seed(seed, "noise-partition"));
  save_noise_set(split.train, join(out, "noise_train.csv").string());
  save_noise_set(split.test, join(out, "noise_test.csv").string());

  std::cerr << "synth: corpus seeds " << train_spec.seed << "/" << test_spec.seed
            << ", noise seed " << combine_seed(seed, "noise") << ", partition seed "
            << combine_seed(seed, "noise-partition") << "\n";
  std::cerr << "synth: wrote manifests and noise set under " << out << "\n";
  return 0;
}

// --- mix ---------------------------------------------------------------------

int cmd_mix(const RunConfig& cfg) {
  cfg.restrict_to({"mix.manifest", "mix.noise_set", "mix.snr_set"});
  std::string out = cfg.out_dir();
  std::uint64_t seed = cfg.seed();
  std::vector<ManifestEntry> clean = load_manifest(cfg.require_string("mix.manifest"));
  auto noise = load_noise_set(cfg.require_string("mix.noise_set"));
  std::vector<double> snrs = cfg.get_double_list("mix.snr_set", {0, 5, 10, 15, 20});

  std::cerr << "mix: seed " << seed << ", " << clean.size() << " clean utterances x "
            << noise.size() << " noise types x " << snrs.size() << " SNRs\n";
  NoisyTestSet set = build_noisy_test_set(clean, noise, snrs, seed, join(out, "wavs").string());
  save_manifest(set.entries, join(out, "noisy_manifest.csv").string());
  save_recipes(set.recipes, join(out, "recipes.csv").string());
  std::cerr << "mix: wrote " << set.entries.size() << " mixed utterances under " << out << "\n";
  return 0;
}

// --- train ---------------------------------------------------------------------

std::vector<std::string> vocab_from_transcripts(const std::vector<ManifestEntry>& train,
                                                const std::vector<ManifestEntry>& dev) {
  std::set<std::string> words;
  auto scan = [&](const std::vector<ManifestEntry>& entries) {
    for (const ManifestEntry& e : entries) {
      std::string cur;
      for (char c : e.transcript + " ") {
        if (std::isspace(static_cast<unsigned char>(c))) {
          if (!cur.empty()) words.insert(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
    }
  };
  scan(train);
  scan(dev);
  NRASR_REQUIRE(!words.empty(), "train: no transcript words in the manifests");
  NRASR_REQUIRE(!words.count("<blank>"), "train: transcript word collides with the blank symbol");
  std::vector<std::string> vocab = {"<blank>"};
  vocab.insert(vocab.end(), words.begin(), words.end());
  return vocab;
}

int cmd_train(const RunConfig& cfg) {
  cfg.restrict_to({"train.manifest", "train.dev_manifest", "train.noise_set", "train.mode",
                   "train.base_lr", "train.epochs", "train.batch_size", "train.aug_prob",
                   "train.snr_set", "train.lambda", "train.eta0", "train.anneal_factor",
                   "train.soft_freeze_factor", "train.lambda_f", "train.lambda_r",
                   "train.lambda_n", "train.momentum", "train.clip_norm", "model.hidden_size",
                   "model.n_recurrent", "model.tap_index", "model.noise_hidden",
                   "model.noise_linear_hidden", "model.conv", "feat.window_len",
                   "feat.hop_len"});
  std::string out = cfg.out_dir();
  std::uint64_t seed = cfg.seed();

  TrainMode mode = train_mode_from_string(cfg.get_string("train.mode", "vanilla_dat"));
  TrainConfig tc = default_train_config(mode);
  tc.base_lr = cfg.get_double("train.base_lr", tc.base_lr);
  tc.epochs = cfg.get_size("train.epochs", tc.epochs);
  tc.batch_size = cfg.get_size("train.batch_size", tc.batch_size);
  tc.aug_prob = cfg.get_double("train.aug_prob", tc.aug_prob);
  tc.train_snr_set = cfg.get_double_list("train.snr_set", tc.train_snr_set);
  tc.lambda = cfg.get_double("train.lambda", tc.lambda);
  tc.eta0 = cfg.get_double("train.eta0", tc.eta0);
  tc.anneal_factor = cfg.get_double("train.anneal_factor", tc.anneal_factor);
  tc.soft_freeze_factor = cfg.get_double("train.soft_freeze_factor", tc.soft_freeze_factor);
  tc.lambda_f = cfg.get_double("train.lambda_f", tc.lambda_f);
  tc.lambda_r = cfg.get_double("train.lambda_r", tc.lambda_r);
  tc.lambda_n = cfg.get_double("train.lambda_n", tc.lambda_n);
  tc.momentum = cfg.get_double("train.momentum", tc.momentum);
  tc.clip_norm = cfg.get_double("train.clip_norm", tc.clip_norm);
  tc.seed = seed;
  validate_train_config(tc);

  SpectrogramConfig feat;
  feat.window_len = cfg.get_size("feat.window_len", feat.window_len);
  feat.hop_len = cfg.get_size("feat.hop_len", feat.hop_len);

  std::vector<ManifestEntry> train_entries = load_manifest(cfg.require_string("train.manifest"));
  std::vector<ManifestEntry> dev_entries = load_manifest(cfg.require_string("train.dev_manifest"));

  ModelConfig mc;
  mc.hidden_size = cfg.get_size("model.hidden_size", 32);
  mc.n_recurrent = cfg.get_size("model.n_recurrent", 2);
  mc.tap_index = cfg.get_size("model.tap_index", 0);
  mc.noise_hidden = cfg.get_size("model.noise_hidden", 0);
  mc.noise_linear_hidden = cfg.get_size("model.noise_linear_hidden", 0);
  mc.input_bins = feat.window_len / 2 + 1;
  mc.vocab = vocab_from_transcripts(train_entries, dev_entries);
  std::vector<std::size_t> conv = cfg.get_size_list("model.conv", {8, 5, 3, 4, 2});
  NRASR_REQUIRE(!conv.empty() && conv.size() % 5 == 0,
                "config key 'model.conv': expected 5 integers per conv layer "
                "(channels, freq kernel, time kernel, freq stride, time stride)");
  mc.convs.clear();
  for (std::size_t i = 0; i < conv.size(); i += 5)
    mc.convs.push_back({conv[i], conv[i + 1], conv[i + 2], conv[i + 3], conv[i + 4]});

  std::map<NoiseLabel, std::vector<AudioBuffer>> noise_audio;
  if (tc.aug_prob > 0.0)
    noise_audio = load_noise_audio(load_noise_set(cfg.require_string("train.noise_set")));

  std::cerr << "train: mode " << to_string(mode) << ", seed " << seed << ", init seed "
            << combine_seed(seed, "init") << ", " << train_entries.size() << " train / "
            << dev_entries.size() << " dev utterances\n";
  std::cerr << "train: vocab:";
  for (const std::string& w : mc.vocab) std::cerr << ' ' << w;
  std::cerr << "\n";

  std::vector<TrainUtterance> train_utts = load_train_utterances(train_entries, mc);
  std::vector<TrainUtterance> dev_utts = load_train_utterances(dev_entries, mc);
  ModelParams init = init_params(mc, combine_seed(seed, "init"));

  TrainResult result = train(tc, init, train_utts, dev_utts, noise_audio, feat, &std::cerr);
  save_checkpoint(join(out, "checkpoint.bin").string(), result.best_params);
  write_text_file(join(out, "metrics.csv").string(), metrics_to_csv(result.metrics));
  std::cerr << "train: best epoch " << result.best_epoch << " (dev WER "
            << format_wer(result.best_dev_wer) << "%), checkpoint and metrics under " << out
            << "\n";
  return 0;
}

// --- eval ----------------------------------------------------------------------

int cmd_eval(const RunConfig& cfg) {
  cfg.restrict_to({"eval.checkpoint", "eval.manifests", "eval.method", "feat.window_len",
                   "feat.hop_len"});
  std::string out = cfg.out_dir();
  std::size_t threads = cfg.get_size("threads", 1);
  NRASR_REQUIRE(threads >= 1, "config key 'threads': need at least one worker");

  ModelParams mp = load_checkpoint(cfg.require_string("eval.checkpoint"));
  SpectrogramConfig feat;
  feat.window_len = cfg.get_size("feat.window_len", feat.window_len);
  feat.hop_len = cfg.get_size("feat.hop_len", feat.hop_len);
  std::string method = cfg.get_string("eval.method", "model");

  std::vector<ManifestEntry> entries;
  for (const std::string& path : cfg.require_string_list("eval.manifests")) {
    std::vector<ManifestEntry> part = load_manifest(path);
    entries.insert(entries.end(), part.begin(), part.end());
  }
  std::cerr << "eval: " << entries.size() << " utterances, " << threads << " worker(s)\n";

  ResultsGrid grid = evaluate_grid(mp, entries, feat, method, threads);
  write_text_file(join(out, "results.csv").string(), results_grid_to_csv(grid));
  if (grid.has_clean)
    std::cerr << "eval: clean WER " << format_wer(grid.clean_wer) << "%\n";
  std::cerr << "eval: wrote " << grid.cells.size() << " grid cells to "
            << join(out, "results.csv").string() << "\n";
  return 0;
}

// --- decode --------------------------------------------------------------------

int cmd_decode(const RunConfig& cfg) {
  cfg.restrict_to({"decode.checkpoint", "decode.wav", "feat.window_len", "feat.hop_len"});
  ModelParams mp = load_checkpoint(cfg.require_string("decode.checkpoint"));
  SpectrogramConfig feat;
  feat.window_len = cfg.get_size("feat.window_len", feat.window_len);
  feat.hop_len = cfg.get_size("feat.hop_len", feat.hop_len);
  std::string wav = cfg.require_string("decode.wav");
  std::cout << decode_wav_file(mp, wav, feat) << "\n";
  return 0;
}

// --- gradcheck -------------------------------------------------------------------

int cmd_gradcheck(const RunConfig& cfg) {
  cfg.restrict_to({"gradcheck.step"});
  double h = cfg.get_double("gradcheck.step", 1e-3);
  GradCheckReport report = run_gradient_check(h);
  for (const GradCheckSeedResult& r : report.seeds) {
    char line[96];
    std::snprintf(line, sizeof(line), "gradcheck: seed %llu rel err %.3e",
                  static_cast<unsigned long long>(r.seed), r.rel_err);
    std::cerr << line << "\n";
  }
  char summary[64];
  std::snprintf(summary, sizeof(summary), "max relative error: %.3e", report.max_rel_err);
  std::cout << summary << "\n";
  if (report.max_rel_err < 1e-4) return 0;
  std::cerr << "gradcheck: max relative error exceeds 1e-4\n";
  return 1;
}

}  // namespace
}  // namespace nrasr

int main(int argc, char** argv) {
  CLI::App app{"Noise-robust ASR adaptation workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string train_mode;
  std::string decode_checkpoint;
  std::string decode_wav;

  struct SubSpec {
    CLI::App* sub = nullptr;
    CLI::Option* config = nullptr;
    CLI::Option* out = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
  };
  std::map<std::string, SubSpec> subs;
  auto add_sub = [&](const std::string& name, const std::string& desc) {
    SubSpec spec;
    spec.sub = app.add_subcommand(name, desc);
    spec.config = spec.sub->add_option("--config", config_path, "JSON config (flat dotted keys)");
    spec.out = spec.sub->add_option("--out", out_dir, "Output directory for artifacts");
    spec.seed_opt = spec.sub->add_option("--seed", seed, "Random seed (commands without randomness ignore it)");
    spec.threads_opt =
        spec.sub->add_option("--threads", threads, "Worker cap for parallel sections (default 1)");
    subs[name] = spec;
    return spec.sub;
  };

  add_sub("synth", "Generate a synthetic tone corpus and a synthetic noise set");
  add_sub("mix", "Mix a clean manifest against a noise set over an SNR grid");
  CLI::App* train_sub = add_sub("train", "Train an acoustic model (vanilla_dat, soft_freeze_dat, mtl, avt)");
  CLI::Option* mode_opt = train_sub->add_option("--mode", train_mode, "Training regime");
  add_sub("eval", "Decode manifests and write the WER results grid CSV");
  CLI::App* decode_sub = add_sub("decode", "Print the greedy transcript of one WAV to stdout");
  CLI::Option* ckpt_opt =
      decode_sub->add_option("--checkpoint", decode_checkpoint, "Model checkpoint to decode with");
  CLI::Option* wav_opt = decode_sub->add_option("wav", decode_wav, "WAV file to decode");
  add_sub("gradcheck", "Run the finite-difference gradient suite and print the max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::string name;
  for (const auto& [sub_name, spec] : subs)
    if (spec.sub->parsed()) name = sub_name;

  try {
    nrasr::RunConfig cfg;
    const SubSpec& spec = subs.at(name);
    if (spec.config->count()) cfg.load_file(config_path);
    if (spec.out->count()) cfg.set_override("out", out_dir);
    if (spec.seed_opt->count()) cfg.set_override("seed", seed);
    if (spec.threads_opt->count()) cfg.set_override("threads", threads);
    if (mode_opt->count()) cfg.set_override("train.mode", train_mode);
    if (ckpt_opt->count()) cfg.set_override("decode.checkpoint", decode_checkpoint);
    if (wav_opt->count()) cfg.set_override("decode.wav", decode_wav);

    if (name == "synth") return nrasr::cmd_synth(cfg);
    if (name == "mix") return nrasr::cmd_mix(cfg);
    if (name == "train") return nrasr::cmd_train(cfg);
    if (name == "eval") return nrasr::cmd_eval(cfg);
    if (name == "decode") return nrasr::cmd_decode(cfg);
    if (name == "gradcheck") return nrasr::cmd_gradcheck(cfg);
    std::cerr << "nrasr: error: no command\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "nrasr " << name << ": error: " << e.what() << "\n";
    return 1;
  }
}
