// nrasr/rng.hpp

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

// Seeded randomness helpers. Draw functions are hand-rolled on top of
// std::mt19937_64 so sequences do not depend on the standard-library
// implementation of <random> distributions.

#ifndef NRASR_RNG_HPP_
#define NRASR_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "nrasr/common.hpp"

namespace nrasr {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-seeds.
inline std::uint64_t mix_bits(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t combine_seed(std::uint64_t seed, std::uint64_t salt) {
  return mix_bits(seed ^ mix_bits(salt));
}

inline std::uint64_t combine_seed(std::uint64_t seed, const std::string& salt) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : salt) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return combine_seed(seed, h);
}

// Uniform in [0, 1).
inline double uniform_real(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform in [lo, hi).
inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_real(rng);
}

// Uniform integer in [0, n). Modulo bias is irrelevant at our scales; the
// value of a fixed draw sequence everywhere is not.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  NRASR_REQUIRE(n > 0, "uniform_index: empty range");
  return rng() % n;
}

inline bool bernoulli(Rng& rng, double p) { return uniform_real(rng) < p; }

// Box-Muller; one draw per call keeps the sequence easy to reason about.
inline double gaussian(Rng& rng) {
  double u1 = 1.0 - uniform_real(rng);  // (0, 1]
  double u2 = uniform_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <typename T>
void shuffle_values(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace nrasr

#endif  // NRASR_RNG_HPP_
