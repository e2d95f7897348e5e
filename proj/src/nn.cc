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

#include "genleak/nn.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

GENLEAK_NAMESPACE_BEGIN

using internal::str_cat;

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::transposed_conv2d: return "transposed_conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::activation: return "activation";
    case LayerKind::dropout: return "dropout";
    case LayerKind::gaussian_noise: return "gaussian_noise";
    case LayerKind::reshape: return "reshape";
  }
  return "?";
}

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::none: return "none";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

std::string_view role_name(NetworkRole role) {
  switch (role) {
    case NetworkRole::generator: return "generator";
    case NetworkRole::discriminator: return "discriminator";
    case NetworkRole::encoder: return "encoder";
    case NetworkRole::autoencoder: return "autoencoder";
  }
  return "?";
}

std::string_view prior_name(LatentPrior prior) {
  return prior == LatentPrior::uniform ? "uniform" : "standard_normal";
}

LayerSpec LayerSpec::dense(std::size_t units, Activation act) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.units = units;
  l.activation = act;
  return l;
}

LayerSpec LayerSpec::conv(std::size_t channels, std::size_t kernel,
                          std::size_t stride, std::size_t padding, Activation act) {
  LayerSpec l;
  l.kind = LayerKind::conv2d;
  l.channels = channels;
  l.kernel_h = l.kernel_w = kernel;
  l.stride = stride;
  l.padding = padding;
  l.activation = act;
  return l;
}

LayerSpec LayerSpec::tconv(std::size_t channels, std::size_t kernel,
                           std::size_t stride, std::size_t padding, Activation act) {
  LayerSpec l = conv(channels, kernel, stride, padding, act);
  l.kind = LayerKind::transposed_conv2d;
  return l;
}

LayerSpec LayerSpec::batchnorm(Activation act) {
  LayerSpec l;
  l.kind = LayerKind::batchnorm;
  l.activation = act;
  return l;
}

LayerSpec LayerSpec::act(Activation act) {
  LayerSpec l;
  l.kind = LayerKind::activation;
  l.activation = act;
  return l;
}

LayerSpec LayerSpec::dropout(double p) {
  LayerSpec l;
  l.kind = LayerKind::dropout;
  l.dropout_p = p;
  return l;
}

LayerSpec LayerSpec::noise(double sigma) {
  LayerSpec l;
  l.kind = LayerKind::gaussian_noise;
  l.noise_sigma = sigma;
  return l;
}

LayerSpec LayerSpec::reshape(Shape shape) {
  LayerSpec l;
  l.kind = LayerKind::reshape;
  l.shape = std::move(shape);
  return l;
}

bool LayerSpec::has_weights() const {
  return kind == LayerKind::dense || kind == LayerKind::conv2d ||
         kind == LayerKind::transposed_conv2d;
}

namespace {

[[noreturn]] void layer_fail(std::size_t i, const LayerSpec& l, const std::string& msg) {
  throw ShapeError(str_cat("layer ", i, " (", layer_kind_name(l.kind), "): ", msg));
}

std::string lname(std::size_t i, const char* what) {
  return str_cat("l", i, ".", what);
}

}  // namespace

std::vector<Shape> NetworkSpec::layer_shapes() const {
  if (input_shape.empty()) throw ShapeError("network input_shape is empty");
  for (std::size_t d : input_shape) {
    if (d == 0) throw ShapeError("network input_shape has a zero extent");
  }
  std::vector<Shape> shapes{input_shape};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const Shape& in = shapes.back();
    Shape out = in;
    if (l.dropout_p != 0 && l.kind != LayerKind::dropout) {
      layer_fail(i, l, "dropout_p is only valid on dropout layers");
    }
    if (l.weight_norm && !l.has_weights()) {
      layer_fail(i, l, "weight_norm applies to dense and conv layers only");
    }
    switch (l.kind) {
      case LayerKind::dense:
        if (l.units == 0) layer_fail(i, l, "units must be positive");
        out = {l.units};
        break;
      case LayerKind::conv2d:
      case LayerKind::transposed_conv2d: {
        if (in.size() != 3) {
          layer_fail(i, l, str_cat("expects [C,H,W] input, got ", shape_str(in)));
        }
        if (l.channels == 0 || l.kernel_h == 0 || l.kernel_w == 0 || l.stride == 0) {
          layer_fail(i, l, "channels, kernel and stride must be positive");
        }
        if (l.kind == LayerKind::conv2d) {
          if (in[1] + 2 * l.padding < l.kernel_h || in[2] + 2 * l.padding < l.kernel_w) {
            layer_fail(i, l, str_cat("kernel larger than padded input ", shape_str(in)));
          }
          out = {l.channels, (in[1] + 2 * l.padding - l.kernel_h) / l.stride + 1,
                 (in[2] + 2 * l.padding - l.kernel_w) / l.stride + 1};
        } else {
          std::size_t fh = (in[1] - 1) * l.stride + l.kernel_h;
          std::size_t fw = (in[2] - 1) * l.stride + l.kernel_w;
          if (fh <= 2 * l.padding || fw <= 2 * l.padding) {
            layer_fail(i, l, "padding consumes the output");
          }
          out = {l.channels, fh - 2 * l.padding, fw - 2 * l.padding};
        }
        break;
      }
      case LayerKind::batchnorm:
        if (in.size() != 1 && in.size() != 3) {
          layer_fail(i, l, str_cat("expects [F] or [C,H,W] input, got ", shape_str(in)));
        }
        break;
      case LayerKind::dropout:
        if (!(l.dropout_p >= 0 && l.dropout_p <= 1)) {
          layer_fail(i, l, "dropout_p must lie in [0,1]");
        }
        break;
      case LayerKind::gaussian_noise:
        if (!(l.noise_sigma >= 0)) layer_fail(i, l, "noise_sigma must be >= 0");
        break;
      case LayerKind::activation:
        break;
      case LayerKind::reshape:
        if (l.shape.empty() || shape_numel(l.shape) != shape_numel(in)) {
          layer_fail(i, l, str_cat("cannot reshape ", shape_str(in), " to ",
                                   shape_str(l.shape)));
        }
        out = l.shape;
        break;
    }
    shapes.push_back(std::move(out));
  }
  return shapes;
}

Shape NetworkSpec::output_shape() const { return layer_shapes().back(); }

void NetworkSpec::validate() const {
  Shape out = output_shape();
  if (layers.empty()) throw InvalidArgument("network has no layers");
  if (!(init_stddev > 0)) throw InvalidArgument("init_stddev must be positive");
  switch (role) {
    case NetworkRole::generator:
      if (latent_dim == 0 || input_shape != Shape{latent_dim}) {
        throw InvalidArgument(str_cat("generator input must be [latent_dim], got ",
                                      shape_str(input_shape)));
      }
      break;
    case NetworkRole::discriminator:
      if (shape_numel(out) != 1 || layers.back().activation != Activation::sigmoid) {
        throw InvalidArgument(
            "discriminator must end in a sigmoid over a single unit");
      }
      break;
    case NetworkRole::encoder:
      if (latent_dim == 0 || out != Shape{2 * latent_dim}) {
        throw InvalidArgument(str_cat("encoder must output [2*latent_dim], got ",
                                      shape_str(out)));
      }
      break;
    case NetworkRole::autoencoder:
      if (out != input_shape) {
        throw InvalidArgument(str_cat("autoencoder output ", shape_str(out),
                                      " differs from input ", shape_str(input_shape)));
      }
      break;
  }
}

// --- Parameters ------------------------------------------------------------

std::size_t Parameters::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return entries_.size();
}

void Parameters::add(std::string name, Tensor tensor, bool trainable) {
  if (contains(name)) throw InvalidArgument(str_cat("duplicate parameter '", name, "'"));
  entries_.push_back({std::move(name), std::move(tensor), trainable});
}

bool Parameters::contains(std::string_view name) const {
  return index_of(name) < entries_.size();
}

Tensor& Parameters::at(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

const Tensor& Parameters::at(std::string_view name) const {
  std::size_t i = index_of(name);
  if (i == entries_.size()) throw InvalidArgument(str_cat("no parameter '", name, "'"));
  if (log_on_) log_.emplace_back(name);
  return entries_[i].tensor;
}

void Parameters::remove(std::string_view name) {
  std::size_t i = index_of(name);
  if (i < entries_.size()) entries_.erase(entries_.begin() + static_cast<long>(i));
}

std::vector<Tensor*> Parameters::trainable() {
  std::vector<Tensor*> out;
  for (Entry& e : entries_) {
    if (e.trainable) out.push_back(&e.tensor);
  }
  return out;
}

std::size_t Parameters::trainable_count() const {
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [](const Entry& e) { return e.trainable; }));
}

void Parameters::zero_grad() {
  for (Entry& e : entries_) {
    if (e.trainable) e.tensor.zero_grad();
  }
}

bool operator==(const Parameters& a, const Parameters& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.trainable != y.trainable || !(x.tensor == y.tensor)) {
      return false;
    }
  }
  return true;
}

// --- construction ----------------------------------------------------------

std::size_t weight_norm_axis(LayerKind kind) {
  // dense [in, out], conv [out, in, kh, kw], transposed [in, out, kh, kw]
  return kind == LayerKind::conv2d ? 0 : 1;
}

namespace {

Shape weight_shape(const LayerSpec& l, const Shape& in) {
  switch (l.kind) {
    case LayerKind::dense: return {shape_numel(in), l.units};
    case LayerKind::conv2d: return {l.channels, in[0], l.kernel_h, l.kernel_w};
    default: return {in[0], l.channels, l.kernel_h, l.kernel_w};
  }
}

std::size_t out_features(const LayerSpec& l) {
  return l.kind == LayerKind::dense ? l.units : l.channels;
}

// g_c = |v| over the slice of v at index c along axis.
std::vector<Real> slice_norms(const Tensor& v, std::size_t axis) {
  std::size_t outer = 1, inner = 1, count = v.dim(axis);
  for (std::size_t i = 0; i < axis; ++i) outer *= v.dim(i);
  for (std::size_t i = axis + 1; i < v.rank(); ++i) inner *= v.dim(i);
  std::vector<double> acc(count, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t c = 0; c < count; ++c)
      for (std::size_t i = 0; i < inner; ++i) {
        double x = v[(o * count + c) * inner + i];
        acc[c] += x * x;
      }
  std::vector<Real> out(count);
  for (std::size_t c = 0; c < count; ++c) out[c] = static_cast<Real>(std::sqrt(acc[c]));
  return out;
}

}  // namespace

Parameters build_network(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<Shape> shapes = spec.layer_shapes();
  Parameters params;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const Shape& in = shapes[i];
    if (l.has_weights()) {
      Tensor w(weight_shape(l, in));
      for (Real& x : w.data()) x = static_cast<Real>(rng.normal(0.0, spec.init_stddev));
      if (l.weight_norm) {
        std::size_t axis = weight_norm_axis(l.kind);
        std::vector<Real> g = slice_norms(w, axis);
        for (Real n : g) {
          if (!(n > 0)) throw DomainError(str_cat("layer ", i, ": zero-norm weight slice"));
        }
        params.add(lname(i, "weight_v"), std::move(w));
        params.add(lname(i, "weight_g"), Tensor(Shape{g.size()}, g));
      } else {
        params.add(lname(i, "weight"), std::move(w));
      }
      params.add(lname(i, "bias"), Tensor(Shape{out_features(l)}, 0.0));
    } else if (l.kind == LayerKind::batchnorm) {
      std::size_t c = in[0];
      params.add(lname(i, "gamma"), Tensor(Shape{c}, 1.0));
      params.add(lname(i, "beta"), Tensor(Shape{c}, 0.0));
      Tensor running(Shape{2, c}, 0.0);
      for (std::size_t k = 0; k < c; ++k) running[c + k] = 1;
      params.add(lname(i, "running_stats"), std::move(running), false);
    }
  }
  return params;
}

// --- forward ---------------------------------------------------------------

namespace {

constexpr double kBatchNormMomentum = 0.1;

Var apply_activation(Var h, Activation act, double alpha) {
  switch (act) {
    case Activation::none: return h;
    case Activation::leaky_relu: return leaky_relu(h, static_cast<Real>(alpha));
    case Activation::relu: return relu(h);
    case Activation::sigmoid: return sigmoid(h);
    case Activation::tanh: return tanh(h);
  }
  return h;
}

Var bind(Tape& tape, Tensor& t, Binding binding) {
  return binding == Binding::trainable ? tape.parameter(t) : tape.constant(t);
}

Var flatten(Var h) {
  const Shape& s = h.shape();
  if (s.size() == 2) return h;
  return reshape(h, Shape{s[0], shape_numel(s) / s[0]});
}

void update_running_stats(Tensor& running, const Tensor& x) {
  std::size_t b = x.dim(0), c = x.dim(1);
  std::size_t inner = x.numel() / (b * c);
  double count = static_cast<double>(b * inner);
  for (std::size_t k = 0; k < c; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < inner; ++j) s += x[(i * c + k) * inner + j];
    double mu = s / count, ss = 0;
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < inner; ++j) {
        double d = x[(i * c + k) * inner + j] - mu;
        ss += d * d;
      }
    double var = count > 1 ? ss / (count - 1) : 0.0;
    running[k] = static_cast<Real>((1 - kBatchNormMomentum) * running[k] +
                                   kBatchNormMomentum * mu);
    running[c + k] = static_cast<Real>((1 - kBatchNormMomentum) * running[c + k] +
                                       kBatchNormMomentum * var);
  }
}

}  // namespace

ForwardTrace forward_network(Tape& tape, Parameters& params,
                             const NetworkSpec& spec, Var batch, Mode mode,
                             Rng& rng, Binding binding) {
  std::vector<Shape> shapes = spec.layer_shapes();
  const Shape& bs = batch.shape();
  if (bs.size() != spec.input_shape.size() + 1 ||
      !std::equal(spec.input_shape.begin(), spec.input_shape.end(), bs.begin() + 1)) {
    throw ShapeError(str_cat("forward_network: batch ", shape_str(bs),
                             " does not match input ", shape_str(spec.input_shape)));
  }
  std::size_t batch_size = bs[0];
  bool train = mode == Mode::train;

  std::size_t last_weighted = spec.layers.size();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].has_weights()) last_weighted = i;
  }

  ForwardTrace trace;
  Var h = batch;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (i == last_weighted) trace.features = flatten(h);
    Var w;
    if (l.has_weights()) {
      if (l.weight_norm) {
        Var v = bind(tape, params.at(lname(i, "weight_v")), binding);
        Var g = bind(tape, params.at(lname(i, "weight_g")), binding);
        w = weight_norm(v, g, weight_norm_axis(l.kind));
      } else {
        w = bind(tape, params.at(lname(i, "weight")), binding);
      }
    }
    switch (l.kind) {
      case LayerKind::dense:
        h = bias_add(matmul(flatten(h), w), bind(tape, params.at(lname(i, "bias")), binding));
        break;
      case LayerKind::conv2d:
        h = bias_add(conv2d(h, w, l.stride, l.padding),
                     bind(tape, params.at(lname(i, "bias")), binding));
        break;
      case LayerKind::transposed_conv2d:
        h = bias_add(transposed_conv2d(h, w, l.stride, l.padding),
                     bind(tape, params.at(lname(i, "bias")), binding));
        break;
      case LayerKind::batchnorm: {
        Tensor& running = params.at(lname(i, "running_stats"));
        Var gamma = bind(tape, params.at(lname(i, "gamma")), binding);
        Var beta = bind(tape, params.at(lname(i, "beta")), binding);
        if (train) update_running_stats(running, h.value());
        h = batch_norm(h, gamma, beta, train, train ? Tensor() : running);
        break;
      }
      case LayerKind::dropout:
        if (train && l.dropout_p > 0) {
          Tensor mask(h.shape());
          for (Real& m : mask.data()) m = rng.bernoulli(1.0 - l.dropout_p) ? 1 : 0;
          h = dropout_mask_apply(h, std::move(mask), static_cast<Real>(l.dropout_p));
        }
        break;
      case LayerKind::gaussian_noise:
        if (train && l.noise_sigma > 0) {
          Tensor noise(h.shape());
          for (Real& n : noise.data()) n = static_cast<Real>(rng.normal(0.0, l.noise_sigma));
          h = gaussian_noise_add(h, std::move(noise));
        }
        break;
      case LayerKind::activation:
        break;
      case LayerKind::reshape: {
        Shape target{batch_size};
        target.insert(target.end(), l.shape.begin(), l.shape.end());
        h = reshape(h, std::move(target));
        break;
      }
    }
    trace.logits = h;
    h = apply_activation(h, l.activation, l.alpha);
  }
  if (!trace.features.valid()) trace.features = flatten(batch);
  trace.output = h;
  return trace;
}

namespace {

ForwardTrace eval_trace(Tape& tape, const Parameters& params,
                        const NetworkSpec& spec, const Tensor& batch) {
  Rng unused(0);
  // Frozen eval mode neither writes parameters nor samples from rng.
  return forward_network(tape, const_cast<Parameters&>(params), spec,
                         tape.constant(batch), Mode::eval, unused, Binding::frozen);
}

}  // namespace

Tensor forward_network(const Parameters& params, const NetworkSpec& spec,
                       const Tensor& batch) {
  Tape tape;
  return eval_trace(tape, params, spec, batch).output.value();
}

Tensor forward_logits(const Parameters& params, const NetworkSpec& spec,
                      const Tensor& batch) {
  Tape tape;
  return eval_trace(tape, params, spec, batch).logits.value();
}

Tensor sample_latent(const NetworkSpec& spec, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw InvalidArgument("sample_latent: batch_size must be >= 1");
  if (spec.latent_dim == 0) throw InvalidArgument("sample_latent: latent_dim is 0");
  Tensor z(Shape{batch_size, spec.latent_dim});
  for (Real& x : z.data()) {
    x = static_cast<Real>(spec.latent_prior == LatentPrior::uniform ? rng.uniform(-1.0, 1.0)
                                                                    : rng.normal());
  }
  return z;
}

Var reparameterize(Var mu, Var log_var, Rng& rng) {
  if (mu.shape() != log_var.shape()) {
    throw ShapeError(str_cat("reparameterize: mu ", shape_str(mu.shape()),
                             " vs log_var ", shape_str(log_var.shape())));
  }
  Tensor eps(mu.shape());
  for (Real& e : eps.data()) e = static_cast<Real>(rng.normal());
  Var sd = exp(scale(log_var, Real(0.5)));
  return add(mu, mul(sd, mu.tape()->constant(std::move(eps))));
}

void apply_weight_norm(Parameters& params, NetworkSpec& spec) {
  // Validate everything before mutating.
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (!l.has_weights() || l.weight_norm) continue;
    const Tensor& w = params.at(lname(i, "weight"));
    for (Real n : slice_norms(w, weight_norm_axis(l.kind))) {
      if (!(n > 0)) {
        throw DomainError(str_cat("apply_weight_norm: layer ", i, " has a zero-norm weight slice"));
      }
    }
    todo.push_back(i);
  }
  if (todo.empty() && std::none_of(spec.layers.begin(), spec.layers.end(),
                                   [](const LayerSpec& l) { return l.has_weights(); })) {
    throw InvalidArgument("apply_weight_norm: network has no dense or conv weights");
  }
  for (std::size_t i : todo) {
    LayerSpec& l = spec.layers[i];
    std::string wname = lname(i, "weight");
    auto& entries = params.entries();
    auto it = std::find_if(entries.begin(), entries.end(),
                           [&](const Parameters::Entry& e) { return e.name == wname; });
    Tensor w = it->tensor;
    std::vector<Real> g = slice_norms(w, weight_norm_axis(l.kind));
    it->name = lname(i, "weight_v");
    it->tensor = std::move(w);
    entries.insert(it + 1, Parameters::Entry{lname(i, "weight_g"), Tensor(Shape{g.size()}, g), true});
    l.weight_norm = true;
  }
}

// --- presets ---------------------------------------------------------------

namespace {

void push_hidden(std::vector<LayerSpec>& layers, LayerSpec weighted,
                 const PresetOptions& o, bool dropout) {
  weighted.weight_norm = o.weight_norm;
  weighted.alpha = o.alpha;
  if (o.batchnorm) {
    Activation act = weighted.activation;
    weighted.activation = Activation::none;
    layers.push_back(weighted);
    LayerSpec bn = LayerSpec::batchnorm(act);
    bn.alpha = o.alpha;
    layers.push_back(bn);
  } else {
    layers.push_back(weighted);
  }
  if (dropout && o.dropout_p > 0) layers.push_back(LayerSpec::dropout(o.dropout_p));
}

LayerSpec final_layer(LayerSpec l, const PresetOptions& o) {
  l.weight_norm = o.weight_norm;
  l.alpha = o.alpha;
  return l;
}

struct ConvPlan {
  std::size_t kernel, stride, padding, h, w;
};

ConvPlan conv_plan(const Shape& record) {
  std::size_t h = record[1], w = record[2];
  if (h >= 8 && w >= 8 && h % 4 == 0 && w % 4 == 0) return {4, 2, 1, h / 4, w / 4};
  return {3, 1, 1, h, w};
}

}  // namespace

NetworkSpec make_network(std::string_view preset, NetworkRole role,
                         const Shape& record_shape, const PresetOptions& o) {
  NetworkSpec spec;
  spec.role = role;
  spec.preset = std::string(preset);
  spec.init_stddev = o.init_stddev;
  spec.latent_dim = role == NetworkRole::discriminator ? 0 : o.latent_dim;
  std::size_t record_numel = shape_numel(record_shape);
  auto& L = spec.layers;
  const Activation lrelu = Activation::leaky_relu;
  bool is_disc = role == NetworkRole::discriminator;

  if (preset == "mlp-small") {
    spec.input_shape = role == NetworkRole::generator ? Shape{o.latent_dim} : record_shape;
    switch (role) {
      case NetworkRole::generator:
        for (std::size_t d = 0; d < o.depth; ++d) push_hidden(L, LayerSpec::dense(o.hidden, lrelu), o, false);
        L.push_back(final_layer(LayerSpec::dense(record_numel, Activation::tanh), o));
        if (record_shape.size() != 1) L.push_back(LayerSpec::reshape(record_shape));
        break;
      case NetworkRole::discriminator:
      case NetworkRole::encoder:
        for (std::size_t d = 0; d < o.depth; ++d) push_hidden(L, LayerSpec::dense(o.hidden, lrelu), o, is_disc);
        L.push_back(final_layer(is_disc ? LayerSpec::dense(1, Activation::sigmoid)
                                        : LayerSpec::dense(2 * o.latent_dim),
                                o));
        break;
      case NetworkRole::autoencoder:
        push_hidden(L, LayerSpec::dense(o.hidden, lrelu), o, false);
        L.push_back(final_layer(LayerSpec::dense(o.latent_dim), o));
        push_hidden(L, LayerSpec::dense(o.hidden, lrelu), o, false);
        L.push_back(final_layer(LayerSpec::dense(record_numel, Activation::tanh), o));
        if (record_shape.size() != 1) L.push_back(LayerSpec::reshape(record_shape));
        break;
    }
  } else if (preset == "conv-small") {
    if (record_shape.size() != 3) {
      throw InvalidArgument(str_cat("conv-small needs [C,H,W] records, got ",
                                    shape_str(record_shape)));
    }
    ConvPlan p = conv_plan(record_shape);
    std::size_t c1 = o.channels, c2 = 2 * o.channels;
    Shape bottleneck{c2, p.h, p.w};
    auto down = [&](bool dropout) {
      push_hidden(L, LayerSpec::conv(c1, p.kernel, p.stride, p.padding, lrelu), o, dropout);
      push_hidden(L, LayerSpec::conv(c2, p.kernel, p.stride, p.padding, lrelu), o, dropout);
    };
    auto up = [&] {
      push_hidden(L, LayerSpec::dense(shape_numel(bottleneck), lrelu), o, false);
      L.push_back(LayerSpec::reshape(bottleneck));
      push_hidden(L, LayerSpec::tconv(c1, p.kernel, p.stride, p.padding, lrelu), o, false);
      L.push_back(final_layer(
          LayerSpec::tconv(record_shape[0], p.kernel, p.stride, p.padding, Activation::tanh), o));
    };
    spec.input_shape = role == NetworkRole::generator ? Shape{o.latent_dim} : record_shape;
    switch (role) {
      case NetworkRole::generator:
        up();
        break;
      case NetworkRole::discriminator:
        down(true);
        L.push_back(final_layer(LayerSpec::dense(1, Activation::sigmoid), o));
        break;
      case NetworkRole::encoder:
        down(false);
        L.push_back(final_layer(LayerSpec::dense(2 * o.latent_dim), o));
        break;
      case NetworkRole::autoencoder:
        down(false);
        L.push_back(final_layer(LayerSpec::dense(o.latent_dim), o));
        up();
        break;
    }
  } else {
    throw InvalidArgument(str_cat("unknown network preset '", preset,
                                  "' (expected mlp-small or conv-small)"));
  }
  spec.validate();
  return spec;
}

// --- serialization ---------------------------------------------------------

namespace {

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out;
}

Shape parse_shape_text(std::string_view text) {
  Shape s;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('x', start);
    if (end == std::string_view::npos) end = text.size();
    std::size_t v = 0;
    auto r = std::from_chars(text.data() + start, text.data() + end, v);
    if (r.ec != std::errc() || r.ptr != text.data() + end || v == 0) {
      throw ConfigError(str_cat("malformed shape '", text, "'"));
    }
    s.push_back(v);
    start = end + 1;
  }
  return s;
}

std::string num_text(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string layer_to_text(const LayerSpec& l) {
  std::string s(layer_kind_name(l.kind));
  switch (l.kind) {
    case LayerKind::dense:
      s += str_cat(" units=", l.units);
      break;
    case LayerKind::conv2d:
    case LayerKind::transposed_conv2d:
      s += str_cat(" channels=", l.channels, " kernel=", l.kernel_h, "x", l.kernel_w,
                   " stride=", l.stride, " padding=", l.padding);
      break;
    case LayerKind::dropout:
      s += " p=" + num_text(l.dropout_p);
      break;
    case LayerKind::gaussian_noise:
      s += " sigma=" + num_text(l.noise_sigma);
      break;
    case LayerKind::reshape:
      s += " shape=" + shape_text(l.shape);
      break;
    default:
      break;
  }
  if (l.activation != Activation::none) s += str_cat(" act=", activation_name(l.activation));
  if (l.activation == Activation::leaky_relu) s += " alpha=" + num_text(l.alpha);
  if (l.weight_norm) s += " weight_norm=true";
  return s;
}

LayerSpec layer_from_text(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string kind;
  is >> kind;
  LayerSpec l;
  bool found = false;
  for (LayerKind k : {LayerKind::dense, LayerKind::conv2d, LayerKind::transposed_conv2d,
                      LayerKind::batchnorm, LayerKind::activation, LayerKind::dropout,
                      LayerKind::gaussian_noise, LayerKind::reshape}) {
    if (layer_kind_name(k) == kind) {
      l.kind = k;
      found = true;
    }
  }
  if (!found) throw ConfigError(str_cat("unknown layer kind '", kind, "'"));
  std::string tok;
  auto to_size = [&](const std::string& key, const std::string& v) {
    std::size_t out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
      throw ConfigError(str_cat("layer '", text, "': bad integer for ", key));
    }
    return out;
  };
  auto to_double = [&](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError(str_cat("layer '", text, "': bad number for ", key));
    }
  };
  while (is >> tok) {
    std::size_t eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError(str_cat("layer '", text, "': expected key=value"));
    std::string key = tok.substr(0, eq), v = tok.substr(eq + 1);
    if (key == "units") {
      l.units = to_size(key, v);
    } else if (key == "channels") {
      l.channels = to_size(key, v);
    } else if (key == "kernel") {
      Shape k = parse_shape_text(v);
      if (k.size() == 1) k.push_back(k[0]);
      if (k.size() != 2) throw ConfigError(str_cat("layer '", text, "': kernel must be KxK"));
      l.kernel_h = k[0];
      l.kernel_w = k[1];
    } else if (key == "stride") {
      l.stride = to_size(key, v);
    } else if (key == "padding") {
      l.padding = to_size(key, v);
    } else if (key == "p") {
      l.dropout_p = to_double(key, v);
    } else if (key == "sigma") {
      l.noise_sigma = to_double(key, v);
    } else if (key == "shape") {
      l.shape = parse_shape_text(v);
    } else if (key == "alpha") {
      l.alpha = to_double(key, v);
    } else if (key == "weight_norm") {
      if (v != "true" && v != "false") throw ConfigError(str_cat("layer '", text, "': weight_norm must be true/false"));
      l.weight_norm = v == "true";
    } else if (key == "act") {
      bool ok = false;
      for (Activation a : {Activation::none, Activation::leaky_relu, Activation::relu,
                           Activation::sigmoid, Activation::tanh}) {
        if (activation_name(a) == v) {
          l.activation = a;
          ok = true;
        }
      }
      if (!ok) throw ConfigError(str_cat("layer '", text, "': unknown activation '", v, "'"));
    } else {
      throw ConfigError(str_cat("layer '", text, "': unknown attribute '", key, "'"));
    }
  }
  return l;
}

void write_network(const NetworkSpec& spec, ConfigSection& section) {
  section.set("role", ConfigValue(std::string(role_name(spec.role))));
  if (!spec.preset.empty()) section.set("preset", ConfigValue(spec.preset));
  ConfigValue::List shape;
  for (std::size_t d : spec.input_shape) shape.emplace_back(static_cast<std::int64_t>(d));
  section.set("input_shape", ConfigValue(std::move(shape)));
  section.set("latent_dim", ConfigValue(static_cast<std::int64_t>(spec.latent_dim)));
  section.set("latent_prior", ConfigValue(std::string(prior_name(spec.latent_prior))));
  section.set("init_stddev", ConfigValue(spec.init_stddev));
  ConfigValue::List layers;
  for (const LayerSpec& l : spec.layers) layers.emplace_back(layer_to_text(l));
  section.set("layers", ConfigValue(std::move(layers)));
}

NetworkSpec read_network(const ConfigSection& section) {
  NetworkSpec spec;
  std::string role = section.at("role").as_string();
  bool ok = false;
  for (NetworkRole r : {NetworkRole::generator, NetworkRole::discriminator,
                        NetworkRole::encoder, NetworkRole::autoencoder}) {
    if (role_name(r) == role) {
      spec.role = r;
      ok = true;
    }
  }
  if (!ok) {
    throw ConfigError(str_cat(section.at("role").pos().line, ":", section.at("role").pos().column,
                              ": unknown network role '", role, "'"));
  }
  spec.preset = section.get_string("preset", "");
  for (std::int64_t d : section.get_ints("input_shape", {})) {
    if (d <= 0) throw ConfigError("input_shape extents must be positive");
    spec.input_shape.push_back(static_cast<std::size_t>(d));
  }
  std::int64_t latent = section.get_int("latent_dim", 0);
  if (latent < 0) throw ConfigError("latent_dim must be >= 0");
  spec.latent_dim = static_cast<std::size_t>(latent);
  std::string prior = section.get_string("latent_prior", "standard_normal");
  if (prior == "uniform") {
    spec.latent_prior = LatentPrior::uniform;
  } else if (prior != "standard_normal") {
    throw ConfigError(str_cat("unknown latent_prior '", prior, "'"));
  }
  spec.init_stddev = section.get_double("init_stddev", 0.02);
  for (const std::string& text : section.get_strings("layers", {})) {
    spec.layers.push_back(layer_from_text(text));
  }
  spec.validate();
  return spec;
}

GENLEAK_NAMESPACE_END
