// nrasr/csv.hpp

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

// Minimal comma-separated-value helpers for the flat table formats used by
// the toolkit (manifests, recipes, metrics, results). Fields never contain
// commas or quotes, so no quoting layer is needed.

#ifndef NRASR_CSV_HPP_
#define NRASR_CSV_HPP_

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nrasr/common.hpp"

namespace nrasr {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string join_csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += fields[i];
  }
  return out;
}

// Reads all lines; strips trailing '\r' so CRLF files parse identically.
// Skips a trailing empty line but keeps interior empty lines (they are a
// format error the caller should report with a line number).
inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  NRASR_REQUIRE(in.good(), "cannot open " << path << " for reading");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  NRASR_REQUIRE(out.good(), "cannot open " << path << " for writing");
  out << content;
  NRASR_REQUIRE(out.good(), "write failed for " << path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  NRASR_REQUIRE(in.good(), "cannot open " << path << " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Strict numeric field parsers: the whole field must be consumed.
inline double parse_double_field(const std::string& s, const std::string& what) {
  NRASR_REQUIRE(!s.empty(), what << ": empty numeric field");
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    NRASR_ERR(what << ": bad number '" << s << "'");
  }
  NRASR_REQUIRE(pos == s.size(), what << ": bad number '" << s << "'");
  return v;
}

inline long long parse_int_field(const std::string& s, const std::string& what) {
  NRASR_REQUIRE(!s.empty(), what << ": empty integer field");
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    NRASR_ERR(what << ": bad integer '" << s << "'");
  }
  NRASR_REQUIRE(pos == s.size(), what << ": bad integer '" << s << "'");
  return v;
}

}  // namespace nrasr

#endif  // NRASR_CSV_HPP_
