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

#include "genleak/optimizer.h"

#include <cmath>
#include <string>
#include <utility>

GENLEAK_NAMESPACE_BEGIN

using internal::str_cat;

std::string_view optimizer_kind_name(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw InvalidArgument(str_cat("unknown optimizer '", name, "'"));
}

void OptimizerSettings::validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument(str_cat("learning_rate must be >= 0, got ", learning_rate));
  }
  if (kind == OptimizerKind::sgd) return;
  if (!(beta1 > 0 && beta1 < 1)) {
    throw InvalidArgument(str_cat("beta1 must lie in (0,1), got ", beta1));
  }
  if (!(beta2 > 0 && beta2 < 1)) {
    throw InvalidArgument(str_cat("beta2 must lie in (0,1), got ", beta2));
  }
  if (!(eps > 0 && eps <= 1e-4)) {
    throw InvalidArgument(str_cat("eps must lie in (0,1e-4], got ", eps));
  }
}

void optimizer_step(OptimizerState& state, std::span<Tensor* const> params) {
  const OptimizerSettings& s = state.settings;
  s.validate();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    std::span<const Real> g = std::as_const(p).grad();
    if (g.size() != p.numel()) {
      throw ShapeError(str_cat("optimizer_step: parameter ", i, " of shape ",
                               shape_str(p.shape()), " has ", g.size(),
                               " gradient values"));
    }
    for (Real x : g) {
      if (!std::isfinite(x)) {
        throw DivergenceError(str_cat("optimizer_step: non-finite gradient for parameter ", i));
      }
    }
  }

  if (s.kind == OptimizerKind::sgd) {
    Real lr = static_cast<Real>(s.learning_rate);
    for (Tensor* p : params) {
      std::span<const Real> g = std::as_const(*p).grad();
      for (std::size_t j = 0; j < p->numel(); ++j) (*p)[j] -= lr * g[j];
    }
    ++state.t;
    return;
  }

  if (state.m.empty() && state.t == 0) {
    for (Tensor* p : params) {
      state.m.emplace_back(p->numel(), Real(0));
      state.v.emplace_back(p->numel(), Real(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError(str_cat("optimizer_step: state tracks ", state.m.size(),
                             " parameters, got ", params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i]->numel() ||
        state.v[i].size() != params[i]->numel()) {
      throw ShapeError(str_cat("optimizer_step: moment buffers for parameter ", i,
                               " do not match shape ", shape_str(params[i]->shape())));
    }
  }

  std::uint64_t t = state.t + 1;
  double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
  double b1 = s.beta1, b2 = s.beta2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    std::span<const Real> g = std::as_const(p).grad();
    std::vector<Real>& m = state.m[i];
    std::vector<Real>& v = state.v[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      double gj = g[j];
      double mj = b1 * m[j] + (1.0 - b1) * gj;
      double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<Real>(mj);
      v[j] = static_cast<Real>(vj);
      double update = s.learning_rate * (mj / bc1) / (std::sqrt(vj / bc2) + s.eps);
      p[j] = static_cast<Real>(p[j] - update);
    }
  }
  state.t = t;
}

GENLEAK_NAMESPACE_END
