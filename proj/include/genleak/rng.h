// Copyright 2026 The genleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GENLEAK_RNG_H_
#define GENLEAK_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "genleak/common.h"

GENLEAK_NAMESPACE_BEGIN

// Deterministic random source.
//
// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
// standard. The distribution transforms below are implemented here rather than
// taken from <random> because the standard leaves the algorithms behind
// std::normal_distribution and friends implementation-defined:
//
//   uniform()  = (next_u64() >> 11) * 2^-53             in [0, 1)
//   normal()   = Box-Muller on two uniforms, cosine branch only
//   index(n)   = rejection sampling on next_u64(), no modulo bias
//
// The stream position counts 64-bit words consumed since seeding.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent stream for a named purpose. Equal (seed, purpose, index)
  // always yields the same stream.
  static Rng derive(std::uint64_t seed, std::string_view purpose,
                    std::uint64_t index = 0);
  Rng fork(std::string_view purpose, std::uint64_t index = 0) const;

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev);
  bool bernoulli(double p);
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);

  // Fisher-Yates, drawing from index().
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  // Text snapshot of the full state; restore() reproduces the exact stream.
  std::string save() const;
  static Rng restore(const std::string& snapshot);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.position_ == b.position_ &&
           a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  std::uint64_t position_ = 0;
};

// SplitMix64 finalizer; used to mix seeds.
std::uint64_t mix64(std::uint64_t x);

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_RNG_H_
