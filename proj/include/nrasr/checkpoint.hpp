// nrasr/checkpoint.hpp

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

// Versioned textual checkpoint container: the model config followed by every
// parameter array with its tag. Values are printed with round-trip precision
// so save/load is bit-exact. Loading verifies the parameter skeleton (names,
// tags, shapes) against the config; any mismatch is an error.

#ifndef NRASR_CHECKPOINT_HPP_
#define NRASR_CHECKPOINT_HPP_

#include <sstream>
#include <string>
#include <vector>

#include "nrasr/common.hpp"
#include "nrasr/csv.hpp"
#include "nrasr/model.hpp"

namespace nrasr {

inline constexpr const char* kCheckpointMagic = "nrasr_checkpoint_v1";

namespace detail {

inline char group_letter(ParamGroup g) {
  switch (g) {
    case ParamGroup::kFeatureExtractor: return 'f';
    case ParamGroup::kRecognition: return 'r';
    case ParamGroup::kNoiseClassifier: return 'n';
  }
  return '?';
}

}  // namespace detail

inline std::string checkpoint_to_string(const ModelParams& mp) {
  const ModelConfig& cfg = mp.cfg;
  std::ostringstream out;
  out << kCheckpointMagic << "\n";
  for (const ConvSpec& c : cfg.convs)
    out << "conv " << c.out_channels << " " << c.kernel_f << " " << c.kernel_t << " "
        << c.stride_f << " " << c.stride_t << "\n";
  out << "n_recurrent " << cfg.n_recurrent << "\n";
  out << "hidden_size " << cfg.hidden_size << "\n";
  out << "tap_index " << cfg.tap_index << "\n";
  out << "n_noise_labels " << cfg.n_noise_labels << "\n";
  out << "noise_hidden " << cfg.noise_hidden << "\n";
  out << "noise_linear_hidden " << cfg.noise_linear_hidden << "\n";
  out << "input_bins " << cfg.input_bins << "\n";
  out << "blank_index " << cfg.blank_index << "\n";
  out << "vocab " << cfg.vocab.size();
  for (const std::string& s : cfg.vocab) out << " " << s;
  out << "\n";
  for (const Param& p : mp.params) {
    out << "param " << p.name << " " << detail::group_letter(p.tag.group) << " "
        << p.tag.layer_id << " " << (p.tag.soft_freeze_member ? 1 : 0) << " "
        << p.value.shape.size();
    for (std::size_t d : p.value.shape) out << " " << d;
    for (double v : p.value.data) out << " " << format_double(v);
    out << "\n";
  }
  out << "end\n";
  return out.str();
}

inline void save_checkpoint(const std::string& path, const ModelParams& mp) {
  write_text_file(path, checkpoint_to_string(mp));
}

inline ModelParams checkpoint_from_string(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  std::string line;
  NRASR_REQUIRE(std::getline(in, line) && line == kCheckpointMagic,
                where << ": not a checkpoint (missing '" << kCheckpointMagic << "' header)");

  ModelConfig cfg;
  cfg.convs.clear();
  std::vector<std::string> param_lines;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto want = [&](bool ok) { NRASR_REQUIRE(ok, where << ": bad checkpoint line '" << line << "'"); };
    if (key == "conv") {
      ConvSpec c;
      want(static_cast<bool>(ls >> c.out_channels >> c.kernel_f >> c.kernel_t >> c.stride_f >>
                             c.stride_t));
      cfg.convs.push_back(c);
    } else if (key == "n_recurrent") {
      want(static_cast<bool>(ls >> cfg.n_recurrent));
    } else if (key == "hidden_size") {
      want(static_cast<bool>(ls >> cfg.hidden_size));
    } else if (key == "tap_index") {
      want(static_cast<bool>(ls >> cfg.tap_index));
    } else if (key == "n_noise_labels") {
      want(static_cast<bool>(ls >> cfg.n_noise_labels));
    } else if (key == "noise_hidden") {
      want(static_cast<bool>(ls >> cfg.noise_hidden));
    } else if (key == "noise_linear_hidden") {
      want(static_cast<bool>(ls >> cfg.noise_linear_hidden));
    } else if (key == "input_bins") {
      want(static_cast<bool>(ls >> cfg.input_bins));
    } else if (key == "blank_index") {
      want(static_cast<bool>(ls >> cfg.blank_index));
    } else if (key == "vocab") {
      std::size_t n = 0;
      want(static_cast<bool>(ls >> n));
      cfg.vocab.resize(n);
      for (std::size_t i = 0; i < n; ++i) want(static_cast<bool>(ls >> cfg.vocab[i]));
    } else if (key == "param") {
      param_lines.push_back(line);
    } else if (key == "end") {
      saw_end = true;
      break;
    } else {
      NRASR_ERR(where << ": unknown checkpoint key '" << key << "'");
    }
  }
  NRASR_REQUIRE(saw_end, where << ": truncated checkpoint (missing 'end')");

  // Build the expected skeleton from the config, then fill values from the
  // param lines, requiring an exact match of order, names, tags and shapes.
  ModelParams mp = init_params(cfg, 0);
  NRASR_REQUIRE(param_lines.size() == mp.params.size(),
                where << ": checkpoint has " << param_lines.size() << " params, config implies "
                      << mp.params.size());
  for (std::size_t i = 0; i < mp.params.size(); ++i) {
    Param& p = mp.params[i];
    std::istringstream ls(param_lines[i]);
    std::string key, name, layer_id;
    char group = '?';
    int freeze = 0;
    std::size_t rank = 0;
    NRASR_REQUIRE(static_cast<bool>(ls >> key >> name >> group >> layer_id >> freeze >> rank),
                  where << ": bad param line '" << param_lines[i] << "'");
    NRASR_REQUIRE(name == p.name, where << ": parameter " << i << " is '" << name
                                        << "', config implies '" << p.name << "'");
    NRASR_REQUIRE(group == detail::group_letter(p.tag.group) && layer_id == p.tag.layer_id &&
                      (freeze != 0) == p.tag.soft_freeze_member,
                  where << ": tag mismatch for parameter '" << name << "'");
    Shape shape(rank);
    for (std::size_t d = 0; d < rank; ++d)
      NRASR_REQUIRE(static_cast<bool>(ls >> shape[d]),
                    where << ": bad shape in param line for '" << name << "'");
    NRASR_REQUIRE(shape == p.value.shape, where << ": shape mismatch for '" << name << "': file "
                                                << shape_str(shape) << ", config implies "
                                                << shape_str(p.value.shape));
    for (std::size_t k = 0; k < p.value.size(); ++k)
      NRASR_REQUIRE(static_cast<bool>(ls >> p.value.data[k]),
                    where << ": too few values for '" << name << "'");
    double extra;
    NRASR_REQUIRE(!(ls >> extra), where << ": too many values for '" << name << "'");
  }
  return mp;
}

inline ModelParams load_checkpoint(const std::string& path) {
  return checkpoint_from_string(read_text_file(path), path);
}

// Load and require the stored config to equal `expected`.
inline ModelParams load_checkpoint(const std::string& path, const ModelConfig& expected) {
  ModelParams mp = checkpoint_from_string(read_text_file(path), path);
  NRASR_REQUIRE(mp.cfg == resolved_config(expected),
                path << ": checkpoint config does not match the requested model config");
  return mp;
}

}  // namespace nrasr

#endif  // NRASR_CHECKPOINT_HPP_
