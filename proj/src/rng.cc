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

#include "genleak/rng.h"

#include <cmath>
#include <numbers>
#include <sstream>

GENLEAK_NAMESPACE_BEGIN

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t hash_purpose(std::string_view purpose) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

Rng Rng::derive(std::uint64_t seed, std::string_view purpose,
                std::uint64_t index) {
  std::uint64_t s = mix64(seed ^ mix64(hash_purpose(purpose) + mix64(index)));
  return Rng(s);
}

Rng Rng::fork(std::string_view purpose, std::uint64_t index) const {
  return derive(seed_ ^ mix64(position_), purpose, index);
}

std::uint64_t Rng::next_u64() {
  ++position_;
  return engine_();
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::uint64_t Rng::index(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("Rng::index: n must be positive");
  // Largest multiple of n representable; values at or above it are rejected.
  std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::string Rng::save() const {
  std::ostringstream os;
  os << seed_ << ' ' << position_ << ' ' << engine_;
  return os.str();
}

Rng Rng::restore(const std::string& snapshot) {
  std::istringstream is(snapshot);
  Rng rng;
  is >> rng.seed_ >> rng.position_ >> rng.engine_;
  if (!is) throw FormatError("Rng::restore: malformed state snapshot");
  return rng;
}

GENLEAK_NAMESPACE_END
