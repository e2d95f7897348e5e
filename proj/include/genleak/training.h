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

#ifndef GENLEAK_TRAINING_H_
#define GENLEAK_TRAINING_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genleak/common.h"
#include "genleak/config.h"
#include "genleak/nn.h"
#include "genleak/optimizer.h"
#include "genleak/rng.h"
#include "genleak/tensor.h"

GENLEAK_NAMESPACE_BEGIN

enum class ModelFamily { gan, vaegan, began };
enum class Defense { none, dropout, weight_norm, dp };
enum class DpSite { forward_pass, gradient };
enum class LabelRole { real, fake };

std::string_view family_name(ModelFamily f);
ModelFamily parse_family(std::string_view s);
std::string_view defense_name(Defense d);
Defense parse_defense(std::string_view s);
std::string_view dp_site_name(DpSite s);
DpSite parse_dp_site(std::string_view s);

struct DPConfig {
  double noise_sigma = 1.0;
  DpSite site = DpSite::gradient;
  double clip_norm = 1.0;  // gradient mode only
  double delta = 1e-4;
  double sampling_rate = 1.0;  // batch_size / training-set size

  void validate() const;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  // Training length: epochs when non-zero, else max_steps.
  std::size_t epochs = 0;
  std::size_t max_steps = 0;
  double label_smooth_real_lo = 0.7;
  double label_smooth_real_hi = 1.2;
  double label_smooth_fake_lo = 0.0;
  double label_smooth_fake_hi = 0.3;
  double label_flip_prob = 0.05;
  // Generator loss -log D(G(z)) when true, log(1 - D(G(z))) otherwise.
  bool non_saturating = true;
  OptimizerSettings g_optimizer;
  OptimizerSettings d_optimizer;
  std::uint64_t seed = 0;
  Defense defense = Defense::none;
  double dropout_p = 0.5;
  DPConfig dp;
  double recon_weight = 1.0;  // VAE-GAN feature reconstruction weight
  double began_gamma = 0.5;
  double began_lambda_k = 0.001;
  double began_k0 = 0.0;

  void validate() const;
  // ceil(n / batch_size)
  std::size_t steps_per_epoch(std::size_t n) const;
  std::size_t total_steps(std::size_t n) const;
};

void write_train_config(const TrainConfig& cfg, ConfigSection& section);
TrainConfig read_train_config(const ConfigSection& section);

struct BeganState {
  double k = 0.0;
  double gamma = 0.5;
  double lambda_k = 0.001;
};

// One trainable network with its optimizer.
struct Network {
  NetworkSpec spec;
  Parameters params;
  OptimizerState opt;
};

struct GanModel {
  ModelFamily family = ModelFamily::gan;
  Network generator;
  Network discriminator;  // an autoencoder for began
  std::optional<Network> encoder;  // vaegan only
  BeganState began;
};

struct ModelOptions {
  std::string preset = "mlp-small";
  PresetOptions g;
  PresetOptions d;
};

// Builds generator/discriminator (and encoder for vaegan) from presets,
// applying the architecture side of cfg.defense: dropout layers in the
// discriminator, weight normalization everywhere, or a noise layer after the
// first hidden activation of the discriminator for forward-pass DP.
GanModel make_model(ModelFamily family, const Shape& record_shape,
                    const ModelOptions& options, const TrainConfig& cfg, Rng& rng);

struct StepLosses {
  double d_loss = 0;
  double g_loss = 0;
  std::map<std::string, double> aux;  // family-specific extras
};

// Each label is uniform on the role's interval; with probability
// label_flip_prob the whole batch uses the other role's interval.
Tensor smooth_labels(LabelRole role, std::size_t batch_size,
                     const TrainConfig& cfg, Rng& rng);

// One discriminator update then one generator update. When `extra_fake`
// is given its rows replace that many generated records in the
// discriminator's fake batch.
StepLosses gan_step(GanModel& model, const Tensor& real_batch,
                    const TrainConfig& cfg, Rng& rng,
                    const Tensor* extra_fake = nullptr);

// KL(q(z|x) || N(0, I)) summed over latent dimensions, averaged over the
// batch, for diagonal Gaussians given mu and log variance.
Var kl_standard_normal(Var mu, Var log_var);

struct VaeLoss {
  Var loss;   // negative ELBO
  Var kl;
  Var recon;  // -log p(x|z) under a unit-variance Gaussian, up to a constant
};

// Negative lower bound with one Monte-Carlo sample of z.
VaeLoss vae_elbo(Tape& tape, Var x, Network& encoder, Network& decoder,
                 Rng& rng, Mode mode = Mode::train);

// Discriminator as in gan_step; encoder on KL + w * feature reconstruction;
// generator on GAN loss + w * feature reconstruction. Features are the
// discriminator's penultimate activations.
StepLosses vaegan_step(GanModel& model, const Tensor& real_batch,
                       const TrainConfig& cfg, Rng& rng);

// k <- clamp(k + lambda_k * (gamma * l_real - l_fake), 0, 1)
void began_update_k(BeganState& state, double l_real, double l_fake);
double began_convergence(const BeganState& state, double l_real, double l_fake);

StepLosses began_step(GanModel& model, const Tensor& real_batch,
                      const TrainConfig& cfg, Rng& rng);

// Per-record mean |x - D(x)| of an autoencoding discriminator.
std::vector<double> reconstruction_errors(const Network& autoencoder,
                                          const Tensor& records);

// Forward-pass mode: x + N(0, sigma^2) element-wise.
Tensor dp_apply(const Tensor& activations, const DPConfig& dp, Rng& rng);

// Scales g in place so that |g| <= clip_norm. Returns the original norm.
double clip_to_norm(std::span<Real> g, double clip_norm);

// Gradient mode: clips every per-record gradient to clip_norm, sums them and
// adds N(0, sigma^2 C^2) per coordinate. The caller averages.
std::vector<Real> dp_aggregate(std::span<const std::vector<Real>> per_record,
                               const DPConfig& dp, Rng& rng);

// Renyi accountant for the sampled Gaussian mechanism. Returns nullopt for
// forward-pass mode, which has no accounted guarantee.
std::optional<double> epsilon_account(const DPConfig& dp, std::uint64_t steps);

// log A_alpha for integer alpha >= 2, exposed for testing.
double sampled_gaussian_log_a(double q, double sigma, int alpha);

// Smallest sigma (to within 1e-3 relative) whose accounted epsilon is at
// most target_epsilon.
double sigma_for_epsilon(double target_epsilon, double q, std::uint64_t steps,
                         double delta);

// --- checkpoints -------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  GanModel model;
  TrainConfig config;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::string rng_state;
  std::string metrics_path;
};

// Little-endian: "GLCK", u32 version, u64 config length, config text, u32
// tensor count, then per tensor u32 name length, name, u8 dtype (0 = f32,
// 1 = f64), u32 rank, u64 dims, raw values. Written atomically.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Reads the header and tensor index; tensor data is decoded on request and
// every request is logged.
class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path);

  const ConfigDocument& header() const { return header_; }
  std::uint32_t version() const { return version_; }
  std::vector<std::string> tensor_names() const;
  bool has_tensor(const std::string& name) const;
  Tensor read_tensor(const std::string& name);
  bool has_network(const std::string& role) const;
  // Spec and parameters stored under "<role>/".
  Network read_network(const std::string& role);
  const std::vector<std::string>& access_log() const { return log_; }

 private:
  struct Slot {
    std::uint8_t dtype;
    Shape shape;
    std::size_t offset;
  };
  std::string bytes_;
  std::uint32_t version_ = 0;
  ConfigDocument header_;
  std::vector<std::string> order_;
  std::map<std::string, Slot> slots_;
  std::vector<std::string> log_;
};

// Generator-only artifact in the same container: the generator section and
// its tensors, nothing else.
void save_generator(const Network& generator, const std::string& path);

// Generator only; discriminator tensors are never decoded.
Network load_generator(const std::string& path);

// --- trainer -----------------------------------------------------------------

struct MetricRow {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  StepLosses losses;
};

std::string metrics_header(ModelFamily family);
std::string metrics_line(ModelFamily family, const MetricRow& row);

class Trainer {
 public:
  // `records` is the training split, [n, record...].
  Trainer(GanModel model, Tensor records, TrainConfig cfg);
  static Trainer resume(Checkpoint ckpt, Tensor records);

  // Runs until total_steps() or `until` steps, whichever is first. Each row
  // is passed to `sink` if given. On divergence the model is restored to the
  // last completed step and DivergenceError is rethrown with the step number
  // and the last checkpoint path.
  void run(std::size_t until = SIZE_MAX,
           const std::function<void(const MetricRow&)>& sink = {});
  StepLosses step();

  std::uint64_t steps_done() const { return step_; }
  std::uint64_t epoch() const;
  std::size_t total_steps() const;
  bool finished() const { return step_ >= total_steps(); }

  const GanModel& model() const { return model_; }
  GanModel& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }

  Checkpoint checkpoint() const;
  void set_last_checkpoint(std::string path) { last_checkpoint_ = std::move(path); }

 private:
  Tensor batch_for_step(std::uint64_t step) const;

  GanModel model_;
  Tensor records_;
  TrainConfig cfg_;
  std::uint64_t step_ = 0;
  std::string last_checkpoint_;
};

// Rows gathered into the CSV form.
std::string metrics_csv(ModelFamily family, std::span<const MetricRow> rows);

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_TRAINING_H_
