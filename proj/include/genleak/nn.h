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

#ifndef GENLEAK_NN_H_
#define GENLEAK_NN_H_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "genleak/common.h"
#include "genleak/config.h"
#include "genleak/rng.h"
#include "genleak/tape.h"
#include "genleak/tensor.h"

GENLEAK_NAMESPACE_BEGIN

enum class LayerKind {
  dense,
  conv2d,
  transposed_conv2d,
  batchnorm,
  activation,
  dropout,
  gaussian_noise,
  reshape,
};

enum class Activation { none, leaky_relu, relu, sigmoid, tanh };

std::string_view layer_kind_name(LayerKind kind);
std::string_view activation_name(Activation act);

// One layer. Shapes are per record, without the batch dimension.
//
//   dense              any input (flattened) -> [units]
//   conv2d             [C,H,W] -> [channels, (H+2p-kh)/s+1, (W+2p-kw)/s+1]
//   transposed_conv2d  [C,H,W] -> [channels, (H-1)s-2p+kh, (W-1)s-2p+kw]
//   batchnorm          [F] or [C,H,W], normalized per feature / channel
//   activation         elementwise
//   dropout            keeps each value with probability 1-p in train mode
//   gaussian_noise     adds N(0, noise_sigma^2) in train mode
//   reshape            -> shape
//
// dense and conv layers carry a bias and apply `activation` after it; the
// other kinds apply it after their own transform.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;
  std::size_t channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Activation activation = Activation::none;
  double alpha = 0.2;
  bool weight_norm = false;
  double dropout_p = 0.0;
  double noise_sigma = 0.0;
  Shape shape;

  static LayerSpec dense(std::size_t units, Activation act = Activation::none);
  static LayerSpec conv(std::size_t channels, std::size_t kernel,
                        std::size_t stride, std::size_t padding,
                        Activation act = Activation::none);
  static LayerSpec tconv(std::size_t channels, std::size_t kernel,
                         std::size_t stride, std::size_t padding,
                         Activation act = Activation::none);
  static LayerSpec batchnorm(Activation act = Activation::none);
  static LayerSpec act(Activation act);
  static LayerSpec dropout(double p = 0.5);
  static LayerSpec noise(double sigma);
  static LayerSpec reshape(Shape shape);

  bool has_weights() const;
};

enum class NetworkRole { generator, discriminator, encoder, autoencoder };
enum class LatentPrior { standard_normal, uniform };

std::string_view role_name(NetworkRole role);
std::string_view prior_name(LatentPrior prior);

struct NetworkSpec {
  NetworkRole role = NetworkRole::discriminator;
  std::vector<LayerSpec> layers;
  Shape input_shape;
  std::size_t latent_dim = 0;
  LatentPrior latent_prior = LatentPrior::standard_normal;
  double init_stddev = 0.02;
  std::string preset;

  // Per-record shape after each layer; throws ShapeError naming the layer on
  // inconsistent sizes.
  std::vector<Shape> layer_shapes() const;
  Shape output_shape() const;
  // Checks role invariants: discriminators end in a sigmoid over one unit,
  // encoders emit 2 * latent_dim values, generators read latent_dim values.
  void validate() const;
};

// Named tensors bound to a NetworkSpec. Buffers (batchnorm running
// statistics) are not trainable. When the access log is enabled every read
// through at() or find() records the tensor name.
class Parameters {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool trainable = true;
  };

  void add(std::string name, Tensor tensor, bool trainable = true);
  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  void remove(std::string_view name);

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Tensor*> trainable();
  std::size_t size() const { return entries_.size(); }
  std::size_t trainable_count() const;
  void zero_grad();

  void enable_access_log(bool on) const { log_on_ = on; }
  const std::vector<std::string>& access_log() const { return log_; }
  void clear_access_log() const { log_.clear(); }

  friend bool operator==(const Parameters& a, const Parameters& b);

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<Entry> entries_;
  mutable bool log_on_ = false;
  mutable std::vector<std::string> log_;
};

// Weights ~ N(0, spec.init_stddev^2), biases 0, batchnorm gamma 1 and beta 0.
// Layers with weight_norm get (v, g) initialized from the sampled weight.
Parameters build_network(const NetworkSpec& spec, Rng& rng);

enum class Mode { train, eval };

// How parameters enter the tape: as trainable leaves receiving gradients,
// or as constants (used to hold a network fixed while its input is trained).
enum class Binding { trainable, frozen };

struct ForwardTrace {
  Var output;    // probabilities for discriminators
  Var logits;    // input of the final activation
  Var features;  // input of the last weighted layer, flattened
};

// `batch` is [B, input_shape...]. Train mode samples dropout masks and noise
// from rng and updates batchnorm running statistics.
ForwardTrace forward_network(Tape& tape, Parameters& params,
                             const NetworkSpec& spec, Var batch, Mode mode,
                             Rng& rng, Binding binding = Binding::trainable);

// Eval-mode forward without gradients.
Tensor forward_network(const Parameters& params, const NetworkSpec& spec,
                       const Tensor& batch);
// Same, returning the logits of the final activation.
Tensor forward_logits(const Parameters& params, const NetworkSpec& spec,
                      const Tensor& batch);

// [batch_size, latent_dim] draws from spec.latent_prior.
Tensor sample_latent(const NetworkSpec& spec, std::size_t batch_size, Rng& rng);

// mu + exp(log_var / 2) * eps with eps ~ N(0, I) drawn from rng and held
// constant on the tape.
Var reparameterize(Var mu, Var log_var, Rng& rng);

// Replaces each weight w of a dense or conv layer by (v, g) with v = w and
// g = |w| per output unit, and marks the layer weight_norm. Throws
// DomainError on a zero-norm slice.
void apply_weight_norm(Parameters& params, NetworkSpec& spec);

// The output-unit axis used for weight-norm slices of a layer's weight.
std::size_t weight_norm_axis(LayerKind kind);

struct PresetOptions {
  std::size_t hidden = 128;
  std::size_t depth = 2;  // hidden layers of the mlp presets
  std::size_t latent_dim = 8;
  std::size_t channels = 16;
  double dropout_p = 0.0;        // discriminator dropout; 0 disables
  bool weight_norm = false;      // all weighted layers
  bool batchnorm = false;        // hidden layers
  double init_stddev = 0.02;
  double alpha = 0.2;
};

// Reference architectures:
//   mlp-small   dense hidden layers with LeakyReLU, for flat records
//   conv-small  two conv / two transposed-conv layers, for [C,H,W] records
// make_network builds the role-specific variant for the given record shape.
NetworkSpec make_network(std::string_view preset, NetworkRole role,
                         const Shape& record_shape, const PresetOptions& options);

// Config serialization. write_network emits keys into `section`;
// read_network consumes them and validates.
void write_network(const NetworkSpec& spec, ConfigSection& section);
NetworkSpec read_network(const ConfigSection& section);

std::string layer_to_text(const LayerSpec& layer);
LayerSpec layer_from_text(std::string_view text);

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_NN_H_
