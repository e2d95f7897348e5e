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

#ifndef GENLEAK_TESTS_GRADCHECK_H_
#define GENLEAK_TESTS_GRADCHECK_H_

// Finite-difference gradient checking shared by the unit and acceptance
// tests. Meant for the 64-bit build.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "genleak/rng.h"
#include "genleak/tape.h"

namespace genleak::testing {

// Builds a scalar loss from leaf variables recorded on `tape`.
using LossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckResult {
  double max_rel_error = 0;  // worst over inputs
  std::size_t worst_input = 0;
};

// Relative error of one gradient: |a - n| / max(|a|, |n|) with both taken as
// Euclidean norms over the whole input, so a gradient that is zero in both
// forms counts as exact.
inline double relative_error(const std::vector<double>& a,
                             const std::vector<double>& n) {
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  double denom = std::max(std::sqrt(na), std::sqrt(nn));
  if (denom == 0) return 0;
  return std::sqrt(diff) / denom;
}

inline double eval_loss(const LossFn& fn, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.input(t));
  return fn(tape, vars).value().item();
}

// Central differences with step h against Tape::backward.
inline GradCheckResult grad_check(const LossFn& fn, std::vector<Tensor> inputs,
                                  double h = 1e-4) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.input(t));
  Var loss = fn(tape, vars);
  tape.backward(loss);

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto g = tape.grad(vars[k]);
    std::vector<double> analytic(inputs[k].numel(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) analytic[i] = g[i];
    std::vector<double> numeric(inputs[k].numel());
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      Real saved = inputs[k][i];
      inputs[k][i] = static_cast<Real>(saved + h);
      double up = eval_loss(fn, inputs);
      inputs[k][i] = static_cast<Real>(saved - h);
      double down = eval_loss(fn, inputs);
      inputs[k][i] = saved;
      numeric[i] = (up - down) / (2 * h);
    }
    double err = relative_error(analytic, numeric);
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_input = k;
    }
  }
  return result;
}

// Normal entries pushed at least `margin` away from zero, so kinked
// activations are never probed at their kink.
inline Tensor random_tensor(Rng& rng, Shape shape, double sd = 1.0,
                            double margin = 0.05) {
  Tensor t(std::move(shape));
  for (Real& x : t.data()) {
    double v = rng.normal(0.0, sd);
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
    x = static_cast<Real>(v);
  }
  return t;
}

inline Tensor positive_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (Real& x : t.data()) x = static_cast<Real>(rng.uniform(0.5, 2.0));
  return t;
}

// Contracts any output with fixed random weights so every element carries a
// distinct gradient.
inline Var weighted_sum(Var y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w = random_tensor(rng, y.shape().empty() ? Shape{1} : y.shape());
  Tape& tape = *y.tape();
  if (y.shape().empty()) y = reshape(y, Shape{1});
  return sum(mul(y, tape.constant(std::move(w))));
}

struct OpCase {
  std::string name;
  LossFn fn;
  std::vector<Tensor> inputs;
};

// One case per differentiable operator.
inline std::vector<OpCase> operator_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<OpCase> cases;
  auto r = [&](Shape s) { return random_tensor(rng, std::move(s)); };

  cases.push_back({"add", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(add(v[0], v[1]), 1);
                   }, {r({3, 4}), r({3, 4})}});
  cases.push_back({"sub", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(sub(v[0], v[1]), 2);
                   }, {r({3, 4}), r({3, 4})}});
  cases.push_back({"mul", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(mul(v[0], v[1]), 3);
                   }, {r({2, 5}), r({2, 5})}});
  cases.push_back({"matmul", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(matmul(v[0], v[1]), 4);
                   }, {r({3, 4}), r({4, 2})}});
  cases.push_back({"conv2d", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(conv2d(v[0], v[1], 1, 0), 5);
                   }, {r({2, 2, 5, 5}), r({3, 2, 3, 3})}});
  cases.push_back({"conv2d_stride2_pad1", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(conv2d(v[0], v[1], 2, 1), 6);
                   }, {r({1, 2, 6, 6}), r({2, 2, 4, 4})}});
  cases.push_back({"transposed_conv2d", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(transposed_conv2d(v[0], v[1], 1, 0), 7);
                   }, {r({2, 2, 3, 3}), r({2, 3, 2, 2})}});
  cases.push_back({"transposed_conv2d_stride2_pad1",
                   [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(transposed_conv2d(v[0], v[1], 2, 1), 8);
                   }, {r({1, 3, 3, 3}), r({3, 2, 4, 4})}});
  cases.push_back({"leaky_relu", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(leaky_relu(v[0], 0.2), 9);
                   }, {r({4, 3})}});
  cases.push_back({"relu", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(relu(v[0]), 10);
                   }, {r({4, 3})}});
  cases.push_back({"sigmoid", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(sigmoid(v[0]), 11);
                   }, {r({4, 3})}});
  cases.push_back({"tanh", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(tanh(v[0]), 12);
                   }, {r({4, 3})}});
  cases.push_back({"log", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(log(v[0]), 13);
                   }, {positive_tensor(rng, {4, 3})}});
  cases.push_back({"exp", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(exp(v[0]), 14);
                   }, {r({4, 3})}});
  cases.push_back({"abs", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(abs(v[0]), 15);
                   }, {r({4, 3})}});
  cases.push_back({"scale", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(scale(v[0], -1.7), 16);
                   }, {r({4, 3})}});
  cases.push_back({"mean", [](Tape&, const std::vector<Var>& v) {
                     return mean(mul(v[0], v[0]));
                   }, {r({4, 3})}});
  cases.push_back({"sum", [](Tape&, const std::vector<Var>& v) {
                     return sum(mul(v[0], v[0]));
                   }, {r({4, 3})}});
  cases.push_back({"reshape", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(reshape(v[0], Shape{2, 6}), 17);
                   }, {r({4, 3})}});
  cases.push_back({"concat_axis0", [](Tape&, const std::vector<Var>& v) {
                     Var xs[] = {v[0], v[1]};
                     return weighted_sum(concat(xs, 0), 18);
                   }, {r({2, 3}), r({4, 3})}});
  cases.push_back({"concat_axis1", [](Tape&, const std::vector<Var>& v) {
                     Var xs[] = {v[0], v[1], v[2]};
                     return weighted_sum(concat(xs, 1), 19);
                   }, {r({2, 3}), r({2, 1}), r({2, 2})}});
  {
    Rng mrng(seed + 1);
    Tensor mask({4, 3});
    for (Real& m : mask.data()) m = mrng.bernoulli(0.5) ? Real(1) : Real(0);
    cases.push_back({"dropout_mask_apply",
                     [mask](Tape&, const std::vector<Var>& v) {
                       return weighted_sum(dropout_mask_apply(v[0], mask, 0.5), 20);
                     }, {r({4, 3})}});
  }
  {
    Tensor noise = r({4, 3});
    cases.push_back({"gaussian_noise_add",
                     [noise](Tape&, const std::vector<Var>& v) {
                       return weighted_sum(gaussian_noise_add(v[0], noise), 21);
                     }, {r({4, 3})}});
  }
  cases.push_back({"bias_add", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(bias_add(v[0], v[1]), 22);
                   }, {r({2, 3, 2, 2}), r({3})}});
  cases.push_back({"slice_cols", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(slice_cols(v[0], 1, 4), 23);
                   }, {r({3, 5})}});
  {
    Tensor targets({6});
    for (Real& t : targets.data()) t = static_cast<Real>(rng.uniform());
    cases.push_back({"bce_with_logits",
                     [targets](Tape&, const std::vector<Var>& v) {
                       return bce_with_logits(v[0], targets);
                     }, {r({6, 1})}});
  }
  cases.push_back({"weight_norm", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(weight_norm(v[0], v[1], 1), 24);
                   }, {r({3, 4}), r({4})}});
  cases.push_back({"batch_norm_train", [](Tape&, const std::vector<Var>& v) {
                     return weighted_sum(batch_norm(v[0], v[1], v[2], true), 25);
                   }, {r({5, 3}), r({3}), r({3})}});
  cases.push_back({"batch_norm_eval", [](Tape&, const std::vector<Var>& v) {
                     Tensor stats = Tensor::from({2, 2}, {0.1, -0.3, 1.5, 0.7});
                     return weighted_sum(batch_norm(v[0], v[1], v[2], false, stats), 26);
                   }, {r({3, 2, 2, 2}), r({2}), r({2})}});
  return cases;
}

// Random small network built directly from tape ops: 1 to 5 dense or conv
// layers with a random activation each, ending in a scalar loss.
inline OpCase random_network(std::uint64_t seed) {
  Rng rng(seed);
  bool conv = rng.bernoulli(0.3);
  std::size_t depth = 1 + rng.index(5);
  std::vector<int> acts;
  std::vector<Tensor> inputs;
  std::size_t batch = 2 + rng.index(3);

  if (conv) {
    std::size_t ch = 1 + rng.index(2);
    inputs.push_back(random_tensor(rng, {batch, ch, 5, 5}));
    depth = std::min<std::size_t>(depth, 3);
    for (std::size_t l = 0; l < depth; ++l) {
      std::size_t out = 1 + rng.index(3);
      inputs.push_back(random_tensor(rng, {out, ch, 2, 2}, 0.7));
      inputs.push_back(random_tensor(rng, {out}, 0.3));
      acts.push_back(static_cast<int>(rng.index(4)));
      ch = out;
    }
  } else {
    std::size_t width = 2 + rng.index(4);
    inputs.push_back(random_tensor(rng, {batch, width}));
    for (std::size_t l = 0; l < depth; ++l) {
      std::size_t out = 1 + rng.index(5);
      inputs.push_back(random_tensor(rng, {width, out}, 0.7));
      inputs.push_back(random_tensor(rng, {out}, 0.3));
      acts.push_back(static_cast<int>(rng.index(4)));
      width = out;
    }
  }

  LossFn fn = [conv, depth, acts, seed](Tape&, const std::vector<Var>& v) {
    Var h = v[0];
    for (std::size_t l = 0; l < depth; ++l) {
      Var w = v[1 + 2 * l];
      Var b = v[2 + 2 * l];
      h = conv ? conv2d(h, w, 1, 0) : matmul(h, w);
      h = bias_add(h, b);
      switch (acts[l]) {
        case 0: h = leaky_relu(h, 0.2); break;
        case 1: h = sigmoid(h); break;
        case 2: h = tanh(h); break;
        default: break;
      }
    }
    return weighted_sum(h, seed ^ 0x5eed);
  };
  return {"random_network_" + std::to_string(seed), fn, std::move(inputs)};
}

}  // namespace genleak::testing

#endif  // GENLEAK_TESTS_GRADCHECK_H_
