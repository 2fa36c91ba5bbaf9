// nrasr/wer.hpp

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

// Word error rate scoring: Levenshtein edit distance over word tokens,
// per-utterance WER, pooled (corpus-level) tallies, and the results grid
// (one WER cell per noise type x SNR plus a clean column) with its CSV form.

#ifndef NRASR_WER_HPP_
#define NRASR_WER_HPP_

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <string>
#include <vector>

#include "nrasr/common.hpp"
#include "nrasr/csv.hpp"

namespace nrasr {

// Lowercases, splits on whitespace, and strips leading/trailing punctuation
// from each token. Tokens that become empty are dropped.
inline std::vector<std::string> wer_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t end = i;
    while (start < end && std::ispunct(static_cast<unsigned char>(text[start]))) ++start;
    while (end > start && std::ispunct(static_cast<unsigned char>(text[end - 1]))) --end;
    if (start == end) continue;
    std::string tok = text.substr(start, end - start);
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(std::move(tok));
  }
  return out;
}

// Minimal substitutions + insertions + deletions turning ref into hyp.
inline std::size_t edit_distance(const std::vector<std::string>& ref,
                                 const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// 100 * edits / reference words. May exceed 100 when insertions dominate.
inline double wer(const std::string& ref, const std::string& hyp) {
  std::vector<std::string> r = wer_tokens(ref);
  NRASR_REQUIRE(!r.empty(), "wer: reference has no words");
  std::vector<std::string> h = wer_tokens(hyp);
  return 100.0 * static_cast<double>(edit_distance(r, h)) / static_cast<double>(r.size());
}

// Corpus-level tally: total edits over total reference words, which is not
// the mean of per-utterance WERs.
struct WerTally {
  std::size_t edits = 0;
  std::size_t ref_words = 0;

  void add(const std::string& ref, const std::string& hyp) {
    std::vector<std::string> r = wer_tokens(ref);
    NRASR_REQUIRE(!r.empty(), "wer tally: reference has no words");
    edits += edit_distance(r, wer_tokens(hyp));
    ref_words += r.size();
  }

  double percent() const {
    NRASR_REQUIRE(ref_words > 0, "wer tally: no reference words accumulated");
    return 100.0 * static_cast<double>(edits) / static_cast<double>(ref_words);
  }
};

struct GridCell {
  std::string noise_label;
  double snr_db = 0.0;
  double wer = 0.0;
};

struct ResultsGrid {
  std::string method;
  bool has_clean = false;
  double clean_wer = 0.0;
  std::vector<GridCell> cells;  // noisy cells, in output order
};

inline std::string format_wer(double w) {
  NRASR_REQUIRE(w >= 0.0, "results grid: negative WER " << w);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", w);
  return buf;
}

// Header method,noise_label,snr_db,wer; the clean row leaves snr_db empty;
// WER cells carry one decimal place.
inline std::string results_grid_to_csv(const ResultsGrid& grid) {
  std::string out = "method,noise_label,snr_db,wer\n";
  if (grid.has_clean) {
    out += join_csv_line({grid.method, "Clean", "", format_wer(grid.clean_wer)});
    out += "\n";
  }
  for (const GridCell& c : grid.cells) {
    out += join_csv_line({grid.method, c.noise_label, format_double(c.snr_db),
                          format_wer(c.wer)});
    out += "\n";
  }
  return out;
}

}  // namespace nrasr

#endif  // NRASR_WER_HPP_
