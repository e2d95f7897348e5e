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

#ifndef GENLEAK_COMMON_H_
#define GENLEAK_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

// The numeric core is compiled once per precision. Each build lives in its own
// inline namespace so a 32-bit and a 64-bit build can be linked into the same
// binary (the gradient-check suites use the 64-bit one).
#if defined(GENLEAK_DOUBLE)
#define GENLEAK_PRECISION_NS f64
#else
#define GENLEAK_PRECISION_NS f32
#endif

#define GENLEAK_NAMESPACE_BEGIN \
  namespace genleak {           \
  inline namespace GENLEAK_PRECISION_NS {
#define GENLEAK_NAMESPACE_END \
  }                           \
  }

GENLEAK_NAMESPACE_BEGIN

#if defined(GENLEAK_DOUBLE)
using Real = double;
#else
using Real = float;
#endif

inline constexpr const char* kPrecisionName =
    sizeof(Real) == 8 ? "float64" : "float32";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input outside an operation's mathematical domain (log of a non-positive
// value, a zero-norm weight vector, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// The requested attack cannot run against the given target.
class UnsupportedTarget : public Error {
 public:
  using Error::Error;
};

namespace internal {

template <typename... Args>
std::string str_cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  return os.str();
}

}  // namespace internal

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_COMMON_H_
