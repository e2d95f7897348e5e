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

#include "genleak/tape.h"

#include <algorithm>
#include <cmath>

GENLEAK_NAMESPACE_BEGIN

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::constant: return "constant";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::matmul: return "matmul";
    case OpKind::conv2d: return "conv2d";
    case OpKind::transposed_conv2d: return "transposed_conv2d";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::tanh: return "tanh";
    case OpKind::log: return "log";
    case OpKind::exp: return "exp";
    case OpKind::abs: return "abs";
    case OpKind::scale: return "scale";
    case OpKind::mean: return "mean";
    case OpKind::sum: return "sum";
    case OpKind::reshape: return "reshape";
    case OpKind::concat: return "concat";
    case OpKind::dropout_mask_apply: return "dropout_mask_apply";
    case OpKind::gaussian_noise_add: return "gaussian_noise_add";
    case OpKind::bias_add: return "bias_add";
    case OpKind::slice_cols: return "slice_cols";
    case OpKind::bce_with_logits: return "bce_with_logits";
    case OpKind::weight_norm: return "weight_norm";
    case OpKind::batch_norm: return "batch_norm";
  }
  return "unknown";
}

namespace {

using internal::str_cat;

[[noreturn]] void shape_fail(OpKind kind, const Shape& a, const Shape& b,
                             std::string_view detail = {}) {
  throw ShapeError(str_cat(op_name(kind), ": incompatible shapes ",
                           shape_str(a), " and ", shape_str(b),
                           detail.empty() ? "" : " (", detail,
                           detail.empty() ? "" : ")"));
}

void expect_rank(OpKind kind, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw ShapeError(str_cat(op_name(kind), ": expected rank ", rank,
                             ", got shape ", shape_str(s)));
  }
}

void expect_same(OpKind kind, const Shape& a, const Shape& b) {
  if (a != b) shape_fail(kind, a, b);
}

void expect_arity(OpKind kind, std::size_t got, std::size_t want) {
  if (got != want) {
    throw InvalidArgument(str_cat(op_name(kind), ": expected ", want,
                                  " inputs, got ", got));
  }
}

struct ConvGeometry {
  std::size_t batch, in_ch, in_h, in_w, out_ch, kh, kw, out_h, out_w, stride,
      pad;
};

ConvGeometry conv_geometry(OpKind kind, const Shape& x, const Shape& w,
                           std::size_t stride, std::size_t pad) {
  expect_rank(kind, x, 4);
  expect_rank(kind, w, 4);
  if (stride == 0) throw InvalidArgument(str_cat(op_name(kind), ": stride 0"));
  ConvGeometry g{};
  g.batch = x[0];
  g.in_ch = x[1];
  g.in_h = x[2];
  g.in_w = x[3];
  g.kh = w[2];
  g.kw = w[3];
  g.stride = stride;
  g.pad = pad;
  if (kind == OpKind::conv2d) {
    if (w[1] != g.in_ch) shape_fail(kind, x, w, "channel mismatch");
    g.out_ch = w[0];
    if (g.in_h + 2 * pad < g.kh || g.in_w + 2 * pad < g.kw) {
      shape_fail(kind, x, w, "kernel larger than padded input");
    }
    g.out_h = (g.in_h + 2 * pad - g.kh) / stride + 1;
    g.out_w = (g.in_w + 2 * pad - g.kw) / stride + 1;
  } else {
    if (w[0] != g.in_ch) shape_fail(kind, x, w, "channel mismatch");
    g.out_ch = w[1];
    std::size_t full_h = (g.in_h - 1) * stride + g.kh;
    std::size_t full_w = (g.in_w - 1) * stride + g.kw;
    if (full_h <= 2 * pad || full_w <= 2 * pad) {
      shape_fail(kind, x, w, "padding consumes the output");
    }
    g.out_h = full_h - 2 * pad;
    g.out_w = full_w - 2 * pad;
  }
  return g;
}

// Channel-axis layout of a [B, C, ...] tensor.
struct ChannelLayout {
  std::size_t batch, channels, inner;
};

ChannelLayout channel_layout(OpKind kind, const Shape& s) {
  if (s.size() < 2) {
    throw ShapeError(str_cat(op_name(kind), ": expected rank >= 2, got ",
                             shape_str(s)));
  }
  ChannelLayout l{s[0], s[1], 1};
  for (std::size_t i = 2; i < s.size(); ++i) l.inner *= s[i];
  return l;
}

// Weight-norm slices: `outer` groups before the axis, `count` along it,
// `inner` after it.
struct AxisLayout {
  std::size_t outer, count, inner;
};

AxisLayout axis_layout(const Shape& s, std::size_t axis) {
  AxisLayout l{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) l.inner *= s[i];
  return l;
}

Real sigmoid_scalar(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  Real e = std::exp(x);
  return e / (Real(1) + e);
}

}  // namespace

const Tensor& Var::value() const {
  if (!tape_) throw InvalidArgument("value() on an unbound Var");
  return tape_->value(*this);
}

Tape::Node& Tape::node(Var v) {
  if (v.tape() != this || v.id() < 0 ||
      static_cast<std::size_t>(v.id()) >= nodes_.size()) {
    throw InvalidArgument("variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id())];
}

const Tape::Node& Tape::node(Var v) const {
  return const_cast<Tape*>(this)->node(v);
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

Var Tape::parameter(Tensor& param) {
  if (!param.all_finite()) {
    throw DivergenceError("parameter holds non-finite values");
  }
  Node n;
  n.kind = OpKind::leaf;
  n.requires_grad = true;
  n.value = Tensor(param.shape(), param.storage());
  n.param = &param;
  return push(std::move(n));
}

Var Tape::input(Tensor value) {
  Node n;
  n.kind = OpKind::leaf;
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.kind = OpKind::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

std::span<const Real> Tape::grad(Var v) const { return node(v).grad; }

OpKind Tape::kind(Var v) const { return node(v).kind; }

std::vector<Real>& Tape::grad_of(std::int32_t id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() != n.value.numel()) n.grad.assign(n.value.numel(), 0);
  return n.grad;
}

Var Tape::record(OpKind kind, std::span<const Var> inputs, OpAttrs attrs) {
  for (const Var& v : inputs) {
    if (v.tape() != this) {
      throw InvalidArgument(
          str_cat(op_name(kind), ": input belongs to a different tape"));
    }
  }
  auto in = [&](std::size_t i) -> const Tensor& { return node(inputs[i]).value; };

  Node n;
  n.kind = kind;
  for (const Var& v : inputs) {
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || node(v).requires_grad;
  }

  switch (kind) {
    case OpKind::leaf:
    case OpKind::constant:
      throw InvalidArgument("record(): use parameter/input/constant for leaves");

    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul: {
      expect_arity(kind, inputs.size(), 2);
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      expect_same(kind, a.shape(), b.shape());
      Tensor out(a.shape());
      for (std::size_t i = 0; i < a.numel(); ++i) {
        out[i] = kind == OpKind::add   ? a[i] + b[i]
                 : kind == OpKind::sub ? a[i] - b[i]
                                       : a[i] * b[i];
      }
      n.value = std::move(out);
      break;
    }

    case OpKind::matmul: {
      expect_arity(kind, inputs.size(), 2);
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      expect_rank(kind, a.shape(), 2);
      expect_rank(kind, b.shape(), 2);
      if (a.dim(1) != b.dim(0)) shape_fail(kind, a.shape(), b.shape());
      std::size_t m = a.dim(0), k = a.dim(1), cols = b.dim(1);
      Tensor out(Shape{m, cols});
      for (std::size_t i = 0; i < m; ++i) {
        Real* row = &out[i * cols];
        for (std::size_t p = 0; p < k; ++p) {
          Real av = a[i * k + p];
          const Real* brow = &b[p * cols];
          for (std::size_t j = 0; j < cols; ++j) row[j] += av * brow[j];
        }
      }
      n.value = std::move(out);
      break;
    }

    case OpKind::conv2d: {
      expect_arity(kind, inputs.size(), 2);
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      ConvGeometry g =
          conv_geometry(kind, x.shape(), w.shape(), attrs.stride, attrs.padding);
      Tensor out(Shape{g.batch, g.out_ch, g.out_h, g.out_w});
      for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t o = 0; o < g.out_ch; ++o)
          for (std::size_t oy = 0; oy < g.out_h; ++oy)
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              Real acc = 0;
              for (std::size_t c = 0; c < g.in_ch; ++c)
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                  std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                      static_cast<std::ptrdiff_t>(g.pad);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                  for (std::size_t kx = 0; kx < g.kw; ++kx) {
                    std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                    acc += x[((b * g.in_ch + c) * g.in_h + iy) * g.in_w + ix] *
                           w[((o * g.in_ch + c) * g.kh + ky) * g.kw + kx];
                  }
                }
              out[((b * g.out_ch + o) * g.out_h + oy) * g.out_w + ox] = acc;
            }
      n.value = std::move(out);
      break;
    }

    case OpKind::transposed_conv2d: {
      expect_arity(kind, inputs.size(), 2);
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      ConvGeometry g =
          conv_geometry(kind, x.shape(), w.shape(), attrs.stride, attrs.padding);
      Tensor out(Shape{g.batch, g.out_ch, g.out_h, g.out_w});
      for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t c = 0; c < g.in_ch; ++c)
          for (std::size_t iy = 0; iy < g.in_h; ++iy)
            for (std::size_t ix = 0; ix < g.in_w; ++ix) {
              Real xv = x[((b * g.in_ch + c) * g.in_h + iy) * g.in_w + ix];
              for (std::size_t o = 0; o < g.out_ch; ++o)
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                  std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy * g.stride + ky) -
                                      static_cast<std::ptrdiff_t>(g.pad);
                  if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(g.out_h)) continue;
                  for (std::size_t kx = 0; kx < g.kw; ++kx) {
                    std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(ix * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
                    if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(g.out_w)) continue;
                    out[((b * g.out_ch + o) * g.out_h + oy) * g.out_w + ox] +=
                        xv * w[((c * g.out_ch + o) * g.kh + ky) * g.kw + kx];
                  }
                }
            }
      n.value = std::move(out);
      break;
    }

    case OpKind::leaky_relu:
    case OpKind::relu:
    case OpKind::sigmoid:
    case OpKind::tanh:
    case OpKind::log:
    case OpKind::exp:
    case OpKind::abs:
    case OpKind::scale: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor& x = in(0);
      Tensor out(x.shape());
      for (std::size_t i = 0; i < x.numel(); ++i) {
        Real v = x[i];
        switch (kind) {
          case OpKind::leaky_relu: out[i] = v > 0 ? v : attrs.alpha * v; break;
          case OpKind::relu: out[i] = v > 0 ? v : Real(0); break;
          case OpKind::sigmoid: out[i] = sigmoid_scalar(v); break;
          case OpKind::tanh: out[i] = std::tanh(v); break;
          case OpKind::log:
            if (!(v > 0)) {
              throw DomainError(str_cat("log: non-positive input ", v,
                                        " at element ", i));
            }
            out[i] = std::log(v);
            break;
          case OpKind::exp: out[i] = std::exp(v); break;
          case OpKind::abs: out[i] = std::abs(v); break;
          default: out[i] = attrs.factor * v; break;
        }
      }
      n.value = std::move(out);
      break;
    }

    case OpKind::mean:
    case OpKind::sum: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor& x = in(0);
      double acc = 0;
      for (Real v : x.data()) acc += v;
      if (kind == OpKind::mean) acc /= static_cast<double>(x.numel());
      n.value = Tensor::scalar(static_cast<Real>(acc));
      break;
    }

    case OpKind::reshape: {
      expect_arity(kind, inputs.size(), 1);
      n.value = in(0).reshaped(attrs.shape);
      break;
    }

    case OpKind::concat: {
      if (inputs.empty()) throw InvalidArgument("concat: no inputs");
      const Shape& first = in(0).shape();
      if (attrs.axis >= first.size()) {
        throw ShapeError(str_cat("concat: axis ", attrs.axis,
                                 " out of range for ", shape_str(first)));
      }
      Shape out_shape = first;
      out_shape[attrs.axis] = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Shape& s = in(k).shape();
        if (s.size() != first.size()) shape_fail(kind, first, s);
        for (std::size_t d = 0; d < s.size(); ++d) {
          if (d != attrs.axis && s[d] != first[d]) shape_fail(kind, first, s);
        }
        out_shape[attrs.axis] += s[attrs.axis];
      }
      std::size_t outer = 1, inner = 1;
      for (std::size_t d = 0; d < attrs.axis; ++d) outer *= first[d];
      for (std::size_t d = attrs.axis + 1; d < first.size(); ++d) inner *= first[d];
      Tensor out(out_shape);
      std::size_t out_stride = out_shape[attrs.axis] * inner;
      std::size_t offset = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor& t = in(k);
        std::size_t chunk = t.dim(attrs.axis) * inner;
        for (std::size_t o = 0; o < outer; ++o) {
          std::copy_n(&t[o * chunk], chunk, &out[o * out_stride + offset]);
        }
        offset += chunk;
      }
      n.value = std::move(out);
      break;
    }

    case OpKind::dropout_mask_apply: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor& x = in(0);
      expect_same(kind, x.shape(), attrs.aux.shape());
      if (attrs.p < 0 || attrs.p > 1) {
        throw InvalidArgument("dropout_mask_apply: p outside [0,1]");
      }
      Real keep = attrs.p < 1 ? Real(1) / (Real(1) - attrs.p) : Real(0);
      Tensor out(x.shape());
      for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * attrs.aux[i] * keep;
      n.value = std::move(out);
      break;
    }

    case OpKind::gaussian_noise_add: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor& x = in(0);
      expect_same(kind, x.shape(), attrs.aux.shape());
      Tensor out(x.shape());
      for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] + attrs.aux[i];
      n.value = std::move(out);
      break;
    }

    case OpKind::bias_add: {
      expect_arity(kind, inputs.size(), 2);
      const Tensor& x = in(0);
      const Tensor& b = in(1);
      ChannelLayout l = channel_layout(kind, x.shape());
      if (b.rank() != 1 || b.dim(0) != l.channels) {
        shape_fail(kind, x.shape(), b.shape());
      }
      Tensor out(x.shape());
      for (std::size_t bi = 0; bi < l.batch; ++bi)
        for (std::size_t c = 0; c < l.channels; ++c)
          for (std::size_t i = 0; i < l.inner; ++i) {
            std::size_t idx = (bi * l.channels + c) * l.inner + i;
            out[idx] = x[idx] + b[c];
          }
      n.value = std::move(out);
      break;
    }

    case OpKind::slice_cols: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor& x = in(0);
      expect_rank(kind, x.shape(), 2);
      if (attrs.begin >= attrs.end || attrs.end > x.dim(1)) {
        throw ShapeError(str_cat("slice_cols: range [", attrs.begin, ",",
                                 attrs.end, ") invalid for ",
                                 shape_str(x.shape())));
      }
      std::size_t rows = x.dim(0), cols = x.dim(1), w = attrs.end - attrs.begin;
      Tensor out(Shape{rows, w});
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(&x[r * cols + attrs.begin], w, &out[r * w]);
      }
      n.value = std::move(out);
      break;
    }

    case OpKind::bce_with_logits: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor& l = in(0);
      if (attrs.aux.numel() != l.numel()) {
        shape_fail(kind, l.shape(), attrs.aux.shape(), "targets");
      }
      double acc = 0;
      for (std::size_t i = 0; i < l.numel(); ++i) {
        double x = l[i], y = attrs.aux[i];
        acc += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
      }
      n.value = Tensor::scalar(static_cast<Real>(acc / static_cast<double>(l.numel())));
      break;
    }

    case OpKind::weight_norm: {
      expect_arity(kind, inputs.size(), 2);
      const Tensor& v = in(0);
      const Tensor& g = in(1);
      if (attrs.axis >= v.rank()) {
        throw ShapeError(str_cat("weight_norm: axis ", attrs.axis,
                                 " out of range for ", shape_str(v.shape())));
      }
      AxisLayout l = axis_layout(v.shape(), attrs.axis);
      if (g.rank() != 1 || g.dim(0) != l.count) shape_fail(kind, v.shape(), g.shape());
      std::vector<Real> norms(l.count, 0);
      for (std::size_t o = 0; o < l.outer; ++o)
        for (std::size_t c = 0; c < l.count; ++c)
          for (std::size_t i = 0; i < l.inner; ++i) {
            Real x = v[(o * l.count + c) * l.inner + i];
            norms[c] += x * x;
          }
      for (std::size_t c = 0; c < l.count; ++c) {
        norms[c] = std::sqrt(norms[c]);
        if (!(norms[c] > 0)) {
          throw DomainError(str_cat("weight_norm: zero-norm direction at slice ", c));
        }
      }
      Tensor out(v.shape());
      for (std::size_t o = 0; o < l.outer; ++o)
        for (std::size_t c = 0; c < l.count; ++c)
          for (std::size_t i = 0; i < l.inner; ++i) {
            std::size_t idx = (o * l.count + c) * l.inner + i;
            out[idx] = g[c] * v[idx] / norms[c];
          }
      n.saved = std::move(norms);
      n.value = std::move(out);
      break;
    }

    case OpKind::batch_norm: {
      expect_arity(kind, inputs.size(), 3);
      const Tensor& x = in(0);
      const Tensor& gamma = in(1);
      const Tensor& beta = in(2);
      ChannelLayout l = channel_layout(kind, x.shape());
      if (gamma.numel() != l.channels) shape_fail(kind, x.shape(), gamma.shape());
      if (beta.numel() != l.channels) shape_fail(kind, x.shape(), beta.shape());
      std::vector<Real> mean_v(l.channels, 0), var_v(l.channels, 0);
      if (attrs.training) {
        double count = static_cast<double>(l.batch * l.inner);
        for (std::size_t c = 0; c < l.channels; ++c) {
          double s = 0, s2 = 0;
          for (std::size_t b = 0; b < l.batch; ++b)
            for (std::size_t i = 0; i < l.inner; ++i) {
              double v = x[(b * l.channels + c) * l.inner + i];
              s += v;
            }
          double mu = s / count;
          for (std::size_t b = 0; b < l.batch; ++b)
            for (std::size_t i = 0; i < l.inner; ++i) {
              double d = x[(b * l.channels + c) * l.inner + i] - mu;
              s2 += d * d;
            }
          mean_v[c] = static_cast<Real>(mu);
          var_v[c] = static_cast<Real>(s2 / count);
        }
      } else {
        if (attrs.aux.numel() != 2 * l.channels) {
          shape_fail(kind, x.shape(), attrs.aux.shape(), "running statistics");
        }
        for (std::size_t c = 0; c < l.channels; ++c) {
          mean_v[c] = attrs.aux[c];
          var_v[c] = attrs.aux[l.channels + c];
        }
      }
      // saved = [xhat..., inv_std per channel...]
      n.saved.assign(x.numel() + l.channels, 0);
      Tensor out(x.shape());
      for (std::size_t c = 0; c < l.channels; ++c) {
        Real inv_std = Real(1) / std::sqrt(var_v[c] + attrs.eps);
        n.saved[x.numel() + c] = inv_std;
        for (std::size_t b = 0; b < l.batch; ++b)
          for (std::size_t i = 0; i < l.inner; ++i) {
            std::size_t idx = (b * l.channels + c) * l.inner + i;
            Real xhat = (x[idx] - mean_v[c]) * inv_std;
            n.saved[idx] = xhat;
            out[idx] = gamma[c] * xhat + beta[c];
          }
      }
      n.value = std::move(out);
      break;
    }
  }

  if (!n.value.all_finite()) {
    throw DivergenceError(str_cat("non-finite output in forward of ",
                                  op_name(kind), " ",
                                  shape_str(n.value.shape())));
  }
  n.attrs = std::move(attrs);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) {
    throw InvalidArgument("backward: loss is not recorded on this tape");
  }
  Node& root = node(loss);
  if (root.value.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     shape_str(root.value.shape()));
  }
  for (Node& n : nodes_) n.grad.clear();
  grad_of(loss.id())[0] = Real(1);

  for (std::int32_t id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    for (Real g : n.grad) {
      if (!std::isfinite(g)) {
        throw DivergenceError(str_cat("non-finite gradient flowing into ",
                                      op_name(n.kind), " node ", id));
      }
    }
    if (n.kind == OpKind::leaf) {
      if (n.param) {
        std::span<Real> pg = n.param->grad();
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
      }
      continue;
    }
    backward_node(n);
  }
  for (Node& n : nodes_) {
    if (n.param && n.grad.empty()) n.param->grad();
  }
}

void Tape::backward_node(Node& n) {
  const std::vector<Real>& g = n.grad;
  auto input_node = [&](std::size_t k) -> Node& {
    return nodes_[static_cast<std::size_t>(n.inputs[k])];
  };
  auto wants = [&](std::size_t k) { return input_node(k).requires_grad; };
  auto gin = [&](std::size_t k) -> std::vector<Real>& { return grad_of(n.inputs[k]); };
  const OpAttrs& at = n.attrs;

  switch (n.kind) {
    case OpKind::leaf:
    case OpKind::constant:
      break;

    case OpKind::add:
    case OpKind::sub: {
      if (wants(0)) {
        auto& ga = gin(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        auto& gb = gin(1);
        Real sign = n.kind == OpKind::add ? Real(1) : Real(-1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      }
      break;
    }

    case OpKind::mul: {
      const Tensor& a = input_node(0).value;
      const Tensor& b = input_node(1).value;
      if (wants(0)) {
        auto& ga = gin(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (wants(1)) {
        auto& gb = gin(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      break;
    }

    case OpKind::matmul: {
      const Tensor& a = input_node(0).value;
      const Tensor& b = input_node(1).value;
      std::size_t m = a.dim(0), k = a.dim(1), cols = b.dim(1);
      if (wants(0)) {
        auto& ga = gin(0);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            Real acc = 0;
            const Real* grow = &g[i * cols];
            const Real* brow = &b[p * cols];
#pragma omp simd reduction(+ : acc)
            for (std::size_t j = 0; j < cols; ++j) acc += grow[j] * brow[j];
            ga[i * k + p] += acc;
          }
      }
      if (wants(1)) {
        auto& gb = gin(1);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            Real av = a[i * k + p];
            const Real* grow = &g[i * cols];
            Real* gbrow = &gb[p * cols];
            for (std::size_t j = 0; j < cols; ++j) gbrow[j] += av * grow[j];
          }
      }
      break;
    }

    case OpKind::conv2d: {
      const Tensor& x = input_node(0).value;
      const Tensor& w = input_node(1).value;
      ConvGeometry c = conv_geometry(n.kind, x.shape(), w.shape(), at.stride, at.padding);
      bool gx_on = wants(0), gw_on = wants(1);
      std::vector<Real>* gx = gx_on ? &gin(0) : nullptr;
      std::vector<Real>* gw = gw_on ? &gin(1) : nullptr;
      for (std::size_t b = 0; b < c.batch; ++b)
        for (std::size_t o = 0; o < c.out_ch; ++o)
          for (std::size_t oy = 0; oy < c.out_h; ++oy)
            for (std::size_t ox = 0; ox < c.out_w; ++ox) {
              Real go = g[((b * c.out_ch + o) * c.out_h + oy) * c.out_w + ox];
              if (go == 0) continue;
              for (std::size_t ch = 0; ch < c.in_ch; ++ch)
                for (std::size_t ky = 0; ky < c.kh; ++ky) {
                  std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                                      static_cast<std::ptrdiff_t>(c.pad);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(c.in_h)) continue;
                  for (std::size_t kx = 0; kx < c.kw; ++kx) {
                    std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                                        static_cast<std::ptrdiff_t>(c.pad);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(c.in_w)) continue;
                    std::size_t xi = ((b * c.in_ch + ch) * c.in_h + iy) * c.in_w + ix;
                    std::size_t wi = ((o * c.in_ch + ch) * c.kh + ky) * c.kw + kx;
                    if (gx) (*gx)[xi] += go * w[wi];
                    if (gw) (*gw)[wi] += go * x[xi];
                  }
                }
            }
      break;
    }

    case OpKind::transposed_conv2d: {
      const Tensor& x = input_node(0).value;
      const Tensor& w = input_node(1).value;
      ConvGeometry c = conv_geometry(n.kind, x.shape(), w.shape(), at.stride, at.padding);
      std::vector<Real>* gx = wants(0) ? &gin(0) : nullptr;
      std::vector<Real>* gw = wants(1) ? &gin(1) : nullptr;
      for (std::size_t b = 0; b < c.batch; ++b)
        for (std::size_t ch = 0; ch < c.in_ch; ++ch)
          for (std::size_t iy = 0; iy < c.in_h; ++iy)
            for (std::size_t ix = 0; ix < c.in_w; ++ix) {
              std::size_t xi = ((b * c.in_ch + ch) * c.in_h + iy) * c.in_w + ix;
              Real xv = x[xi];
              Real gxa = 0;
              for (std::size_t o = 0; o < c.out_ch; ++o)
                for (std::size_t ky = 0; ky < c.kh; ++ky) {
                  std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy * c.stride + ky) -
                                      static_cast<std::ptrdiff_t>(c.pad);
                  if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(c.out_h)) continue;
                  for (std::size_t kx = 0; kx < c.kw; ++kx) {
                    std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(ix * c.stride + kx) -
                                        static_cast<std::ptrdiff_t>(c.pad);
                    if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(c.out_w)) continue;
                    Real go = g[((b * c.out_ch + o) * c.out_h + oy) * c.out_w + ox];
                    std::size_t wi = ((ch * c.out_ch + o) * c.kh + ky) * c.kw + kx;
                    gxa += go * w[wi];
                    if (gw) (*gw)[wi] += go * xv;
                  }
                }
              if (gx) (*gx)[xi] += gxa;
            }
      break;
    }

    case OpKind::leaky_relu:
    case OpKind::relu:
    case OpKind::sigmoid:
    case OpKind::tanh:
    case OpKind::log:
    case OpKind::exp:
    case OpKind::abs:
    case OpKind::scale: {
      if (!wants(0)) break;
      const Tensor& x = input_node(0).value;
      const Tensor& y = n.value;
      auto& gx = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        Real d;
        switch (n.kind) {
          case OpKind::leaky_relu: d = x[i] > 0 ? Real(1) : at.alpha; break;
          case OpKind::relu: d = x[i] > 0 ? Real(1) : Real(0); break;
          case OpKind::sigmoid: d = y[i] * (Real(1) - y[i]); break;
          case OpKind::tanh: d = Real(1) - y[i] * y[i]; break;
          case OpKind::log: d = Real(1) / x[i]; break;
          case OpKind::exp: d = y[i]; break;
          case OpKind::abs: d = x[i] > 0 ? Real(1) : (x[i] < 0 ? Real(-1) : Real(0)); break;
          default: d = at.factor; break;
        }
        gx[i] += g[i] * d;
      }
      break;
    }

    case OpKind::mean:
    case OpKind::sum: {
      if (!wants(0)) break;
      auto& gx = gin(0);
      Real v = g[0];
      if (n.kind == OpKind::mean) v /= static_cast<Real>(gx.size());
      for (Real& e : gx) e += v;
      break;
    }

    case OpKind::reshape:
    case OpKind::gaussian_noise_add: {
      if (!wants(0)) break;
      auto& gx = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      break;
    }

    case OpKind::dropout_mask_apply: {
      if (!wants(0)) break;
      auto& gx = gin(0);
      Real keep = at.p < 1 ? Real(1) / (Real(1) - at.p) : Real(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * at.aux[i] * keep;
      break;
    }

    case OpKind::concat: {
      const Shape& out_shape = n.value.shape();
      std::size_t outer = 1, inner = 1;
      for (std::size_t d = 0; d < at.axis; ++d) outer *= out_shape[d];
      for (std::size_t d = at.axis + 1; d < out_shape.size(); ++d) inner *= out_shape[d];
      std::size_t out_stride = out_shape[at.axis] * inner;
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        std::size_t chunk = input_node(k).value.dim(at.axis) * inner;
        if (wants(k)) {
          auto& gk = gin(k);
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < chunk; ++i)
              gk[o * chunk + i] += g[o * out_stride + offset + i];
        }
        offset += chunk;
      }
      break;
    }

    case OpKind::bias_add: {
      ChannelLayout l = channel_layout(n.kind, n.value.shape());
      if (wants(0)) {
        auto& gx = gin(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (wants(1)) {
        auto& gb = gin(1);
        for (std::size_t b = 0; b < l.batch; ++b)
          for (std::size_t c = 0; c < l.channels; ++c)
            for (std::size_t i = 0; i < l.inner; ++i)
              gb[c] += g[(b * l.channels + c) * l.inner + i];
      }
      break;
    }

    case OpKind::slice_cols: {
      if (!wants(0)) break;
      auto& gx = gin(0);
      std::size_t cols = input_node(0).value.dim(1);
      std::size_t w = at.end - at.begin;
      std::size_t rows = n.value.dim(0);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < w; ++j) gx[r * cols + at.begin + j] += g[r * w + j];
      break;
    }

    case OpKind::bce_with_logits: {
      if (!wants(0)) break;
      const Tensor& l = input_node(0).value;
      auto& gx = gin(0);
      Real scale_v = g[0] / static_cast<Real>(l.numel());
      for (std::size_t i = 0; i < l.numel(); ++i) {
        gx[i] += scale_v * (sigmoid_scalar(l[i]) - at.aux[i]);
      }
      break;
    }

    case OpKind::weight_norm: {
      const Tensor& v = input_node(0).value;
      const Tensor& gain = input_node(1).value;
      AxisLayout l = axis_layout(v.shape(), at.axis);
      const std::vector<Real>& norms = n.saved;
      // dot[c] = <grad_w, v> over slice c
      std::vector<Real> dot(l.count, 0);
      for (std::size_t o = 0; o < l.outer; ++o)
        for (std::size_t c = 0; c < l.count; ++c)
          for (std::size_t i = 0; i < l.inner; ++i) {
            std::size_t idx = (o * l.count + c) * l.inner + i;
            dot[c] += g[idx] * v[idx];
          }
      if (wants(1)) {
        auto& gg = gin(1);
        for (std::size_t c = 0; c < l.count; ++c) gg[c] += dot[c] / norms[c];
      }
      if (wants(0)) {
        auto& gv = gin(0);
        for (std::size_t o = 0; o < l.outer; ++o)
          for (std::size_t c = 0; c < l.count; ++c) {
            Real nrm = norms[c];
            Real coef = gain[c] / nrm;
            Real proj = dot[c] / (nrm * nrm);
            for (std::size_t i = 0; i < l.inner; ++i) {
              std::size_t idx = (o * l.count + c) * l.inner + i;
              gv[idx] += coef * (g[idx] - proj * v[idx]);
            }
          }
      }
      break;
    }

    case OpKind::batch_norm: {
      const Tensor& x = input_node(0).value;
      const Tensor& gamma = input_node(1).value;
      ChannelLayout l = channel_layout(n.kind, x.shape());
      const Real* xhat = n.saved.data();
      const Real* inv_std = n.saved.data() + x.numel();
      std::vector<Real> sum_g(l.channels, 0), sum_gx(l.channels, 0);
      for (std::size_t b = 0; b < l.batch; ++b)
        for (std::size_t c = 0; c < l.channels; ++c)
          for (std::size_t i = 0; i < l.inner; ++i) {
            std::size_t idx = (b * l.channels + c) * l.inner + i;
            sum_g[c] += g[idx];
            sum_gx[c] += g[idx] * xhat[idx];
          }
      if (wants(1)) {
        auto& gg = gin(1);
        for (std::size_t c = 0; c < l.channels; ++c) gg[c] += sum_gx[c];
      }
      if (wants(2)) {
        auto& gb = gin(2);
        for (std::size_t c = 0; c < l.channels; ++c) gb[c] += sum_g[c];
      }
      if (wants(0)) {
        auto& gx = gin(0);
        Real count = static_cast<Real>(l.batch * l.inner);
        for (std::size_t b = 0; b < l.batch; ++b)
          for (std::size_t c = 0; c < l.channels; ++c)
            for (std::size_t i = 0; i < l.inner; ++i) {
              std::size_t idx = (b * l.channels + c) * l.inner + i;
              if (at.training) {
                gx[idx] += gamma[c] * inv_std[c] / count *
                           (count * g[idx] - sum_g[c] - xhat[idx] * sum_gx[c]);
              } else {
                gx[idx] += g[idx] * gamma[c] * inv_std[c];
              }
            }
      }
      break;
    }
  }
}

// --- free-function front end ----------------------------------------------

Var forward_op(OpKind kind, std::span<const Var> inputs, OpAttrs attrs) {
  if (inputs.empty() || !inputs[0].valid()) {
    throw InvalidArgument(str_cat(op_name(kind), ": missing inputs"));
  }
  return inputs[0].tape()->record(kind, inputs, std::move(attrs));
}

namespace {

Var unary(OpKind kind, Var x, OpAttrs attrs = {}) {
  Var in[] = {x};
  return forward_op(kind, in, std::move(attrs));
}

Var binary(OpKind kind, Var a, Var b, OpAttrs attrs = {}) {
  Var in[] = {a, b};
  return forward_op(kind, in, std::move(attrs));
}

}  // namespace

Var add(Var a, Var b) { return binary(OpKind::add, a, b); }
Var sub(Var a, Var b) { return binary(OpKind::sub, a, b); }
Var mul(Var a, Var b) { return binary(OpKind::mul, a, b); }
Var matmul(Var a, Var b) { return binary(OpKind::matmul, a, b); }

Var conv2d(Var x, Var w, std::size_t stride, std::size_t padding) {
  OpAttrs at;
  at.stride = stride;
  at.padding = padding;
  return binary(OpKind::conv2d, x, w, std::move(at));
}

Var transposed_conv2d(Var x, Var w, std::size_t stride, std::size_t padding) {
  OpAttrs at;
  at.stride = stride;
  at.padding = padding;
  return binary(OpKind::transposed_conv2d, x, w, std::move(at));
}

Var leaky_relu(Var x, Real alpha) {
  OpAttrs at;
  at.alpha = alpha;
  return unary(OpKind::leaky_relu, x, std::move(at));
}

Var relu(Var x) { return unary(OpKind::relu, x); }
Var sigmoid(Var x) { return unary(OpKind::sigmoid, x); }
Var tanh(Var x) { return unary(OpKind::tanh, x); }
Var log(Var x) { return unary(OpKind::log, x); }
Var exp(Var x) { return unary(OpKind::exp, x); }
Var abs(Var x) { return unary(OpKind::abs, x); }

Var scale(Var x, Real factor) {
  OpAttrs at;
  at.factor = factor;
  return unary(OpKind::scale, x, std::move(at));
}

Var mean(Var x) { return unary(OpKind::mean, x); }
Var sum(Var x) { return unary(OpKind::sum, x); }

Var reshape(Var x, Shape shape) {
  OpAttrs at;
  at.shape = std::move(shape);
  return unary(OpKind::reshape, x, std::move(at));
}

Var concat(std::span<const Var> xs, std::size_t axis) {
  OpAttrs at;
  at.axis = axis;
  return forward_op(OpKind::concat, xs, std::move(at));
}

Var dropout_mask_apply(Var x, Tensor mask, Real p) {
  OpAttrs at;
  at.p = p;
  at.aux = std::move(mask);
  return unary(OpKind::dropout_mask_apply, x, std::move(at));
}

Var gaussian_noise_add(Var x, Tensor noise) {
  OpAttrs at;
  at.aux = std::move(noise);
  return unary(OpKind::gaussian_noise_add, x, std::move(at));
}

Var bias_add(Var x, Var b) { return binary(OpKind::bias_add, x, b); }

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  OpAttrs at;
  at.begin = begin;
  at.end = end;
  return unary(OpKind::slice_cols, x, std::move(at));
}

Var bce_with_logits(Var logits, Tensor targets) {
  OpAttrs at;
  at.aux = std::move(targets);
  return unary(OpKind::bce_with_logits, logits, std::move(at));
}

Var weight_norm(Var v, Var g, std::size_t axis) {
  OpAttrs at;
  at.axis = axis;
  return binary(OpKind::weight_norm, v, g, std::move(at));
}

Var batch_norm(Var x, Var gamma, Var beta, bool training, Tensor running_stats,
               Real eps) {
  OpAttrs at;
  at.training = training;
  at.aux = std::move(running_stats);
  at.eps = eps;
  Var in[] = {x, gamma, beta};
  return forward_op(OpKind::batch_norm, in, std::move(at));
}

GENLEAK_NAMESPACE_END
