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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "genleak/optimizer.h"

namespace genleak {
namespace {

Tensor with_grad(std::vector<Real> values, std::vector<Real> grads) {
  Tensor t(Shape{values.size()}, values);
  auto g = t.grad();
  for (std::size_t i = 0; i < grads.size(); ++i) g[i] = grads[i];
  return t;
}

TEST(Sgd, SingleStep) {
  Tensor p = with_grad({1.0}, {2.0});
  OptimizerState s(OptimizerSettings{OptimizerKind::sgd, 0.1});
  Tensor* ps[] = {&p};
  optimizer_step(s, ps);
  EXPECT_FLOAT_EQ(p[0], 0.8f);
  EXPECT_EQ(s.t, 1u);
}

TEST(Adam, FirstStepAgainstHandComputation) {
  // m1 = (1-b1) g, v1 = (1-b2) g^2, mhat = g, vhat = g^2, so the first
  // update is lr * g / (|g| + eps) = lr * 1 / (1 + eps) for g = 1.
  OptimizerSettings cfg;
  cfg.learning_rate = 0.01;
  cfg.eps = 1e-8;
  Tensor p = with_grad({0.5, -0.5, 2.0}, {1.0, 1.0, 1.0});
  OptimizerState s(cfg);
  Tensor* ps[] = {&p};
  optimizer_step(s, ps);
  double step = 0.01 * 1.0 / (1.0 + 1e-8);
  EXPECT_FLOAT_EQ(p[0], static_cast<Real>(0.5 - step));
  EXPECT_FLOAT_EQ(p[1], static_cast<Real>(-0.5 - step));
  EXPECT_FLOAT_EQ(p[2], static_cast<Real>(2.0 - step));
  EXPECT_FLOAT_EQ(s.m[0][0], static_cast<Real>(1 - cfg.beta1));
  EXPECT_FLOAT_EQ(s.v[0][0], static_cast<Real>(1 - cfg.beta2));
}

TEST(Adam, SecondStepAgainstHandComputation) {
  OptimizerSettings cfg;
  cfg.learning_rate = 0.1;
  Tensor p = with_grad({0.0}, {2.0});
  OptimizerState s(cfg);
  Tensor* ps[] = {&p};
  optimizer_step(s, ps);
  p.grad()[0] = -1.0;
  optimizer_step(s, ps);
  double b1 = cfg.beta1, b2 = cfg.beta2;
  double m = (1 - b1) * 2.0, v = (1 - b2) * 4.0;
  double x = -0.1 * (m / (1 - b1)) / (std::sqrt(v / (1 - b2)) + cfg.eps);
  m = b1 * m + (1 - b1) * -1.0;
  v = b2 * v + (1 - b2) * 1.0;
  x -= 0.1 * (m / (1 - b1 * b1)) / (std::sqrt(v / (1 - b2 * b2)) + cfg.eps);
  EXPECT_NEAR(p[0], x, 1e-6);
  EXPECT_EQ(s.t, 2u);
}

TEST(Optimizer, ZeroGradientLeavesParameters) {
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
    Tensor p = with_grad({1.5, -2.0}, {0.0, 0.0});
    OptimizerSettings cfg;
    cfg.kind = kind;
    cfg.learning_rate = 0.5;
    OptimizerState s(cfg);
    Tensor* ps[] = {&p};
    for (int i = 0; i < 3; ++i) optimizer_step(s, ps);
    EXPECT_EQ(p[0], Real(1.5));
    EXPECT_EQ(p[1], Real(-2.0));
    EXPECT_EQ(s.t, 3u);
  }
}

TEST(Optimizer, RejectsNonFiniteGradient) {
  Tensor p = with_grad({1.0}, {NAN});
  OptimizerState s;
  Tensor* ps[] = {&p};
  EXPECT_THROW(optimizer_step(s, ps), DivergenceError);
  EXPECT_EQ(p[0], Real(1.0));
  EXPECT_EQ(s.t, 0u);
}

TEST(Optimizer, RejectsShapeChange) {
  Tensor p = with_grad({1.0}, {1.0});
  OptimizerState s;
  Tensor* ps[] = {&p};
  optimizer_step(s, ps);
  Tensor q = with_grad({1.0, 2.0}, {1.0, 1.0});
  Tensor* qs[] = {&q};
  EXPECT_THROW(optimizer_step(s, qs), ShapeError);
}

TEST(Optimizer, ValidatesSettings) {
  OptimizerSettings cfg;
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.eps = 1e-3;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  EXPECT_EQ(parse_optimizer_kind("sgd"), OptimizerKind::sgd);
  EXPECT_THROW(parse_optimizer_kind("rmsprop"), InvalidArgument);
}

}  // namespace
}  // namespace genleak
