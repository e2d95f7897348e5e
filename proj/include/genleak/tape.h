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

#ifndef GENLEAK_TAPE_H_
#define GENLEAK_TAPE_H_

#include <cstdint>
#include <deque>
#include <span>
#include <string_view>
#include <vector>

#include "genleak/common.h"
#include "genleak/tensor.h"

GENLEAK_NAMESPACE_BEGIN

// Operator set of the engine. Shape rules:
//
//   add, sub, mul        a, b of identical shape -> same shape
//   matmul               [M,K] x [K,N] -> [M,N]
//   conv2d               x[B,C,H,W], w[O,C,KH,KW] -> [B,O,(H+2p-KH)/s+1, ...]
//   transposed_conv2d    x[B,C,H,W], w[C,O,KH,KW] -> [B,O,(H-1)s-2p+KH, ...]
//   leaky_relu, relu, sigmoid, tanh, log, exp, abs, scale
//                        elementwise, same shape
//   mean, sum            any -> scalar (rank 0)
//   reshape              any -> attrs.shape with equal element count
//   concat               inputs equal except along attrs.axis
//   dropout_mask_apply   x * mask / (1 - p); mask in attrs.aux, same shape
//   gaussian_noise_add   x + noise; noise in attrs.aux, same shape
//   bias_add             x[B,C,...] + b[C] broadcast along axis 1
//   slice_cols           x[B,F] -> x[:, begin:end]
//   bce_with_logits      logits, targets in attrs.aux -> scalar mean loss
//   weight_norm          v, g[v.dim(axis)] -> g * v / |v| per slice on axis
//   batch_norm           x[B,C] or x[B,C,H,W], gamma[C], beta[C]; batch
//                        statistics in training, attrs.aux = [mean; var]
//                        (shape [2,C]) otherwise
enum class OpKind : std::uint8_t {
  leaf,
  constant,
  add,
  sub,
  mul,
  matmul,
  conv2d,
  transposed_conv2d,
  leaky_relu,
  relu,
  sigmoid,
  tanh,
  log,
  exp,
  abs,
  scale,
  mean,
  sum,
  reshape,
  concat,
  dropout_mask_apply,
  gaussian_noise_add,
  bias_add,
  slice_cols,
  bce_with_logits,
  weight_norm,
  batch_norm,
};

std::string_view op_name(OpKind kind);

struct OpAttrs {
  Real alpha = Real(0.2);
  Real factor = Real(1);
  Real p = Real(0);
  Real eps = Real(1e-5);
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool training = true;
  Shape shape;
  Tensor aux;
};

class Tape;

// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::int32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

// Records operations in execution order, which is a topological order of the
// computation graph. backward() walks the nodes once in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf bound to external storage. backward() accumulates dloss/dparam into
  // param.grad(); callers zero gradients between steps. The tensor must
  // outlive the tape.
  Var parameter(Tensor& param);
  // Leaf that requires a gradient; read it back with grad().
  Var input(Tensor value);
  // Leaf excluded from differentiation.
  Var constant(Tensor value);

  Var record(OpKind kind, std::span<const Var> inputs, OpAttrs attrs = {});

  // Populates gradients of every differentiable node reachable from loss.
  // Parameters registered on this tape but not reachable get a zero buffer.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() w.r.t. a node; empty if not reached.
  std::span<const Real> grad(Var v) const;

  OpKind kind(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    OpKind kind = OpKind::constant;
    bool requires_grad = false;
    std::vector<std::int32_t> inputs;
    Tensor value;
    std::vector<Real> grad;
    OpAttrs attrs;
    std::vector<Real> saved;
    Tensor* param = nullptr;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Node n);
  void backward_node(Node& n);
  std::vector<Real>& grad_of(std::int32_t id);

  std::deque<Node> nodes_;
};

// forward_op: dispatches to Tape::record. All inputs must share a tape.
Var forward_op(OpKind kind, std::span<const Var> inputs, OpAttrs attrs = {});

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b);
Var conv2d(Var x, Var w, std::size_t stride = 1, std::size_t padding = 0);
Var transposed_conv2d(Var x, Var w, std::size_t stride = 1,
                      std::size_t padding = 0);
Var leaky_relu(Var x, Real alpha = Real(0.2));
Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var log(Var x);
Var exp(Var x);
Var abs(Var x);
Var scale(Var x, Real factor);
Var mean(Var x);
Var sum(Var x);
Var reshape(Var x, Shape shape);
Var concat(std::span<const Var> xs, std::size_t axis);
Var dropout_mask_apply(Var x, Tensor mask, Real p);
Var gaussian_noise_add(Var x, Tensor noise);
Var bias_add(Var x, Var b);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var bce_with_logits(Var logits, Tensor targets);
Var weight_norm(Var v, Var g, std::size_t axis);
Var batch_norm(Var x, Var gamma, Var beta, bool training,
               Tensor running_stats = {}, Real eps = Real(1e-5));

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_TAPE_H_
