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

#ifndef GENLEAK_OPTIMIZER_H_
#define GENLEAK_OPTIMIZER_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "genleak/common.h"
#include "genleak/tensor.h"

GENLEAK_NAMESPACE_BEGIN

enum class OptimizerKind { sgd, adam };

std::string_view optimizer_kind_name(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  // Throws InvalidArgument when a field is out of range.
  void validate() const;
};

// Adam moments are allocated on the first step and then tied to the shapes
// of the parameters seen there.
struct OptimizerState {
  OptimizerSettings settings;
  std::vector<std::vector<Real>> m;
  std::vector<std::vector<Real>> v;
  std::uint64_t t = 0;

  OptimizerState() = default;
  explicit OptimizerState(OptimizerSettings s) : settings(s) {}
};

// Applies one update using each parameter's gradient buffer. Throws
// ShapeError if the parameter list changed shape since the first step and
// DivergenceError on a non-finite gradient; in both cases nothing is
// modified.
void optimizer_step(OptimizerState& state, std::span<Tensor* const> params);

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_OPTIMIZER_H_
