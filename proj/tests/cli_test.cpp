// nrasr/tests/cli_test.cpp

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

// Shells out to the nrasr binary and checks artifacts, exit codes, and
// diagnostics. The binary path comes from the NRASR_CLI_PATH compile
// definition.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nrasr/corpus.hpp"
#include "nrasr/csv.hpp"

namespace nrasr {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_or_empty(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in.good()) return "";
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / "nrasr_cli_test_io";
  fs::create_directories(dir);
  fs::path out_file = dir / ("out" + std::to_string(counter));
  fs::path err_file = dir / ("err" + std::to_string(counter));
  ++counter;
  std::string cmd = std::string(NRASR_CLI_PATH) + " " + args + " >" + out_file.string() + " 2>" +
                    err_file.string();
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_or_empty(out_file);
  r.err = read_or_empty(err_file);
  return r;
}

fs::path scratch_dir(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / ("nrasr_cli_test_" + leaf);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const std::string& body) {
  write_text_file(path.string(), body);
}

// Shared tiny corpus: built once, read by the pipeline tests.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch_dir("pipeline"));
    write_json(*dir_ / "synth.json", R"({
      "synth.train_utts": 10,
      "synth.test_utts": 3,
      "synth.symbol_ms": 40.0,
      "synth.min_symbols": 3,
      "synth.max_symbols": 4,
      "synth.noise_files_per_type": 2,
      "synth.noise_seconds": 0.5,
      "synth.noise_train_files": 1,
      "synth.noise_test_files": 1
    })");
    RunResult r = run_cli("synth --config " + (*dir_ / "synth.json").string() + " --out " +
                          (*dir_ / "data").string() + " --seed 3");
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }

  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static fs::path* dir_;
};

fs::path* CliPipeline::dir_ = nullptr;

TEST(CliHelp, ListsAllSubcommands) {
  RunResult r = run_cli("--help");
  EXPECT_EQ(r.exit_code, 0);
  for (const char* name : {"synth", "mix", "train", "eval", "decode", "gradcheck"})
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
  RunResult sub = run_cli("train --help");
  EXPECT_EQ(sub.exit_code, 0);
  for (const char* flag : {"--config", "--out", "--seed", "--threads", "--mode"})
    EXPECT_NE(sub.out.find(flag), std::string::npos) << flag;
}

TEST(CliHelp, MissingSubcommandIsAnError) {
  RunResult r = run_cli("");
  EXPECT_NE(r.exit_code, 0);
}

TEST(CliGradcheck, PassesAndPrintsMaxRelErr) {
  RunResult r = run_cli("gradcheck");
  EXPECT_EQ(r.exit_code, 0) << r.err;
  ASSERT_NE(r.out.find("max relative error:"), std::string::npos) << r.out;
  double value = std::stod(r.out.substr(r.out.find(':') + 1));
  EXPECT_LT(value, 1e-4);
  EXPECT_GT(value, 0.0);
}

TEST(CliErrors, UnknownTrainModeNamesValidModes) {
  fs::path dir = scratch_dir("badmode");
  RunResult r = run_cli("train --mode sgd --out " + dir.string());
  EXPECT_NE(r.exit_code, 0);
  for (const char* name : {"vanilla_dat", "soft_freeze_dat", "mtl", "avt"})
    EXPECT_NE(r.err.find(name), std::string::npos) << r.err;
}

TEST(CliErrors, UnknownConfigKeyRejected) {
  fs::path dir = scratch_dir("badkey");
  write_json(dir / "bad.json", R"({"synth.train_uttz": 5})");
  RunResult r = run_cli("synth --config " + (dir / "bad.json").string() + " --out " +
                        dir.string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.err.find("unknown key 'synth.train_uttz'"), std::string::npos) << r.err;
}

TEST(CliErrors, MissingFilesGiveOneLineDiagnostics) {
  fs::path dir = scratch_dir("missing");
  RunResult r = run_cli("decode --checkpoint " + (dir / "none.bin").string() + " " +
                        (dir / "none.wav").string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.err.find("error:"), std::string::npos) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
}

TEST_F(CliPipeline, SynthArtifactsAreCompleteAndLoadable) {
  fs::path data = *dir_ / "data";
  std::vector<ManifestEntry> train = load_manifest((data / "train_manifest.csv").string());
  std::vector<ManifestEntry> test = load_manifest((data / "test_manifest.csv").string());
  EXPECT_EQ(train.size(), 10u);
  EXPECT_EQ(test.size(), 3u);
  for (const ManifestEntry& e : train) {
    EXPECT_EQ(e.noise_label, NoiseLabel::kClean);
    EXPECT_TRUE(fs::exists(e.audio_path)) << e.audio_path;
  }
  auto all = load_noise_set((data / "noise_set.csv").string());
  auto train_noise = load_noise_set((data / "noise_train.csv").string());
  auto test_noise = load_noise_set((data / "noise_test.csv").string());
  EXPECT_EQ(all.size(), kNumNoiseTypes);
  for (const auto& [label, files] : all) EXPECT_EQ(files.size(), 2u);
  for (const auto& [label, files] : train_noise) {
    ASSERT_EQ(files.size(), 1u);
    ASSERT_EQ(test_noise[label].size(), 1u);
    EXPECT_NE(files[0], test_noise[label][0]);  // disjoint split
    EXPECT_TRUE(fs::exists(files[0]));
  }
}

TEST_F(CliPipeline, SynthRerunsAreByteIdenticalModuloPaths) {
  fs::path other = scratch_dir("synth_rerun");
  RunResult r = run_cli("synth --config " + (*dir_ / "synth.json").string() + " --out " +
                        (other / "data").string() + " --seed 3");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::vector<ManifestEntry> a = load_manifest((*dir_ / "data" / "train_manifest.csv").string());
  std::vector<ManifestEntry> b = load_manifest((other / "data" / "train_manifest.csv").string());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].utterance_id, b[i].utterance_id);
    EXPECT_EQ(a[i].transcript, b[i].transcript);
    EXPECT_EQ(read_or_empty(a[i].audio_path), read_or_empty(b[i].audio_path));
  }
}

TEST_F(CliPipeline, MixBuildsTheFullGridAndRerunsMatch) {
  fs::path data = *dir_ / "data";
  write_json(*dir_ / "mix.json", "{\n"
      "  \"mix.manifest\": \"" + (data / "test_manifest.csv").string() + "\",\n"
      "  \"mix.noise_set\": \"" + (data / "noise_test.csv").string() + "\",\n"
      "  \"mix.snr_set\": [0, 10]\n}");
  RunResult r = run_cli("mix --config " + (*dir_ / "mix.json").string() + " --out " +
                        (*dir_ / "mixed").string() + " --seed 4");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::vector<ManifestEntry> noisy =
      load_manifest((*dir_ / "mixed" / "noisy_manifest.csv").string());
  EXPECT_EQ(noisy.size(), 3u * 7u * 2u);
  for (const ManifestEntry& e : noisy) EXPECT_TRUE(fs::exists(e.audio_path)) << e.audio_path;

  RunResult r2 = run_cli("mix --config " + (*dir_ / "mix.json").string() + " --out " +
                         (*dir_ / "mixed2").string() + " --seed 4");
  ASSERT_EQ(r2.exit_code, 0) << r2.err;
  // Recipes carry no paths, so identical seeds give byte-identical files.
  EXPECT_EQ(read_or_empty(*dir_ / "mixed" / "recipes.csv"),
            read_or_empty(*dir_ / "mixed2" / "recipes.csv"));
}

TEST_F(CliPipeline, TrainEvalDecodeProduceArtifacts) {
  fs::path data = *dir_ / "data";
  write_json(*dir_ / "train.json", "{\n"
      "  \"train.manifest\": \"" + (data / "train_manifest.csv").string() + "\",\n"
      "  \"train.dev_manifest\": \"" + (data / "test_manifest.csv").string() + "\",\n"
      "  \"train.mode\": \"vanilla_dat\",\n"
      "  \"train.aug_prob\": 0.0,\n"
      "  \"train.epochs\": 2,\n"
      "  \"train.batch_size\": 5,\n"
      "  \"train.base_lr\": 0.01,\n"
      "  \"feat.window_len\": 64,\n"
      "  \"feat.hop_len\": 32,\n"
      "  \"model.hidden_size\": 8,\n"
      "  \"model.conv\": [4, 3, 3, 2, 2],\n"
      "  \"model.noise_hidden\": 4,\n"
      "  \"model.noise_linear_hidden\": 4\n}");
  RunResult rt = run_cli("train --config " + (*dir_ / "train.json").string() + " --out " +
                         (*dir_ / "run").string() + " --seed 5");
  ASSERT_EQ(rt.exit_code, 0) << rt.err;
  EXPECT_TRUE(fs::exists(*dir_ / "run" / "checkpoint.bin"));
  std::string metrics = read_or_empty(*dir_ / "run" / "metrics.csv");
  EXPECT_EQ(metrics.rfind("epoch,l_ctc,l_ce,l_hybrid,eta,dev_wer,noise_acc\n", 0), 0u) << metrics;
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3) << metrics;

  // Identical rerun: byte-identical metrics.
  RunResult rt2 = run_cli("train --config " + (*dir_ / "train.json").string() + " --out " +
                          (*dir_ / "run2").string() + " --seed 5");
  ASSERT_EQ(rt2.exit_code, 0) << rt2.err;
  EXPECT_EQ(metrics, read_or_empty(*dir_ / "run2" / "metrics.csv"));
  EXPECT_EQ(read_or_empty(*dir_ / "run" / "checkpoint.bin"),
            read_or_empty(*dir_ / "run2" / "checkpoint.bin"));

  write_json(*dir_ / "eval.json", "{\n"
      "  \"eval.checkpoint\": \"" + (*dir_ / "run" / "checkpoint.bin").string() + "\",\n"
      "  \"eval.manifests\": [\"" + (data / "test_manifest.csv").string() + "\"],\n"
      "  \"eval.method\": \"vanilla\",\n"
      "  \"feat.window_len\": 64,\n"
      "  \"feat.hop_len\": 32\n}");
  RunResult re = run_cli("eval --config " + (*dir_ / "eval.json").string() + " --out " +
                         (*dir_ / "results").string() + " --threads 2");
  ASSERT_EQ(re.exit_code, 0) << re.err;
  std::string results = read_or_empty(*dir_ / "results" / "results.csv");
  EXPECT_EQ(results.rfind("method,noise_label,snr_db,wer\n", 0), 0u) << results;
  EXPECT_NE(results.find("vanilla,Clean,,"), std::string::npos) << results;

  write_json(*dir_ / "decode.json", R"({"feat.window_len": 64, "feat.hop_len": 32})");
  std::vector<ManifestEntry> test = load_manifest((data / "test_manifest.csv").string());
  RunResult rd = run_cli("decode --config " + (*dir_ / "decode.json").string() +
                         " --checkpoint " + (*dir_ / "run" / "checkpoint.bin").string() + " " +
                         test[0].audio_path);
  EXPECT_EQ(rd.exit_code, 0) << rd.err;
  // Output is one line: space-separated vocabulary words (possibly empty).
  EXPECT_FALSE(rd.out.empty());
  EXPECT_EQ(rd.out.back(), '\n');
}

}  // namespace
}  // namespace nrasr
