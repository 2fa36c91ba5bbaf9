// nrasr/wav.hpp

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

// RIFF/WAVE reader and writer for mono files. Writing always produces
// 16-bit PCM; reading accepts 16-bit PCM and 32-bit IEEE float. Samples are
// exchanged as doubles in [-1, 1] (int16 value v maps to v / 32768).

#ifndef NRASR_WAV_HPP_
#define NRASR_WAV_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "nrasr/common.hpp"
#include "nrasr/csv.hpp"

namespace nrasr {

struct WavData {
  std::vector<double> samples;
  std::uint32_t sample_rate = 0;
};

namespace detail {

inline std::uint32_t read_u32le(const std::string& buf, std::size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 3])) << 24);
}

inline std::uint16_t read_u16le(const std::string& buf, std::size_t off) {
  return static_cast<std::uint16_t>(
      static_cast<std::uint16_t>(static_cast<unsigned char>(buf[off])) |
      (static_cast<std::uint16_t>(static_cast<unsigned char>(buf[off + 1])) << 8));
}

inline void append_u32le(std::string& buf, std::uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
  buf.push_back(static_cast<char>((v >> 16) & 0xff));
  buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void append_u16le(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

inline std::int16_t quantize_sample(double x) {
  // Scale by 32768 and clamp; keeps write-then-read within one 16-bit step.
  double v = std::nearbyint(x * 32768.0);
  if (v > 32767.0) v = 32767.0;
  if (v < -32768.0) v = -32768.0;
  return static_cast<std::int16_t>(v);
}

inline WavData read_wav(const std::string& path) {
  const std::string buf = read_text_file(path);
  NRASR_REQUIRE(buf.size() >= 44, path << ": too short to be a WAV file");
  NRASR_REQUIRE(buf.compare(0, 4, "RIFF") == 0, path << ": missing RIFF magic");
  NRASR_REQUIRE(buf.compare(8, 4, "WAVE") == 0, path << ": not a WAVE file");

  bool have_fmt = false;
  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  std::size_t data_off = 0, data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    std::string id = buf.substr(pos, 4);
    std::uint32_t len = detail::read_u32le(buf, pos + 4);
    std::size_t body = pos + 8;
    NRASR_REQUIRE(body + len <= buf.size(),
                  path << ": truncated '" << id << "' chunk");
    if (id == "fmt ") {
      NRASR_REQUIRE(len >= 16, path << ": fmt chunk too short");
      format_tag = detail::read_u16le(buf, body);
      channels = detail::read_u16le(buf, body + 2);
      sample_rate = detail::read_u32le(buf, body + 4);
      bits = detail::read_u16le(buf, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      data_off = body;
      data_len = len;
      break;  // fmt precedes data in every file we write or accept
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }
  NRASR_REQUIRE(have_fmt, path << ": missing fmt chunk");
  NRASR_REQUIRE(data_off != 0, path << ": missing data chunk");
  NRASR_REQUIRE(channels == 1, path << ": expected mono, got " << channels << " channels");

  WavData wav;
  wav.sample_rate = sample_rate;
  if (format_tag == 1) {  // integer PCM
    NRASR_REQUIRE(bits == 16, path << ": unsupported PCM bit depth " << bits);
    std::size_t n = data_len / 2;
    wav.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::int16_t v = static_cast<std::int16_t>(detail::read_u16le(buf, data_off + 2 * i));
      wav.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format_tag == 3) {  // IEEE float
    NRASR_REQUIRE(bits == 32, path << ": unsupported float bit depth " << bits);
    std::size_t n = data_len / 4;
    wav.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = detail::read_u32le(buf, data_off + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      wav.samples[i] = static_cast<double>(f);
    }
  } else {
    NRASR_ERR(path << ": unsupported WAV format tag " << format_tag
                   << " (want 16-bit PCM or 32-bit float)");
  }
  return wav;
}

inline void write_wav(const std::string& path, const std::vector<double>& samples,
                      std::uint32_t sample_rate) {
  NRASR_REQUIRE(sample_rate > 0, "write_wav: zero sample rate");
  std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
  std::string buf;
  buf.reserve(44 + data_len);
  buf += "RIFF";
  detail::append_u32le(buf, 36 + data_len);
  buf += "WAVE";
  buf += "fmt ";
  detail::append_u32le(buf, 16);
  detail::append_u16le(buf, 1);  // PCM
  detail::append_u16le(buf, 1);  // mono
  detail::append_u32le(buf, sample_rate);
  detail::append_u32le(buf, sample_rate * 2);  // byte rate
  detail::append_u16le(buf, 2);                // block align
  detail::append_u16le(buf, 16);               // bits per sample
  buf += "data";
  detail::append_u32le(buf, data_len);
  for (double s : samples)
    detail::append_u16le(buf, static_cast<std::uint16_t>(quantize_sample(s)));
  write_text_file(path, buf);
}

}  // namespace nrasr

#endif  // NRASR_WAV_HPP_
