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

#include "genleak/training.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

GENLEAK_NAMESPACE_BEGIN

using internal::str_cat;

std::string_view family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::gan: return "gan";
    case ModelFamily::vaegan: return "vaegan";
    case ModelFamily::began: return "began";
  }
  return "?";
}

ModelFamily parse_family(std::string_view s) {
  for (ModelFamily f : {ModelFamily::gan, ModelFamily::vaegan, ModelFamily::began}) {
    if (family_name(f) == s) return f;
  }
  throw ConfigError(str_cat("unknown model family '", s, "' (gan, vaegan, began)"));
}

std::string_view defense_name(Defense d) {
  switch (d) {
    case Defense::none: return "none";
    case Defense::dropout: return "dropout";
    case Defense::weight_norm: return "weight_norm";
    case Defense::dp: return "dp";
  }
  return "?";
}

Defense parse_defense(std::string_view s) {
  for (Defense d : {Defense::none, Defense::dropout, Defense::weight_norm, Defense::dp}) {
    if (defense_name(d) == s) return d;
  }
  throw ConfigError(str_cat("unknown defense '", s, "' (none, dropout, weight_norm, dp)"));
}

std::string_view dp_site_name(DpSite s) {
  return s == DpSite::gradient ? "gradient" : "forward_pass";
}

DpSite parse_dp_site(std::string_view s) {
  if (s == "gradient") return DpSite::gradient;
  if (s == "forward_pass") return DpSite::forward_pass;
  throw ConfigError(str_cat("unknown dp site '", s, "' (gradient, forward_pass)"));
}

void DPConfig::validate() const {
  if (!(noise_sigma > 0) || !std::isfinite(noise_sigma)) {
    throw InvalidArgument(str_cat("dp noise_sigma must be positive, got ", noise_sigma));
  }
  if (!(delta > 0 && delta < 1)) {
    throw InvalidArgument(str_cat("dp delta must lie in (0,1), got ", delta));
  }
  if (!(sampling_rate > 0 && sampling_rate <= 1)) {
    throw InvalidArgument(str_cat("dp sampling rate must lie in (0,1], got ", sampling_rate));
  }
  if (site == DpSite::gradient && !(clip_norm > 0)) {
    throw InvalidArgument(str_cat("dp clip_norm must be positive, got ", clip_norm));
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  if (!(label_smooth_real_lo <= label_smooth_real_hi) ||
      !(label_smooth_fake_lo <= label_smooth_fake_hi)) {
    throw InvalidArgument("label smoothing intervals must be ordered");
  }
  if (!(label_flip_prob >= 0 && label_flip_prob <= 1)) {
    throw InvalidArgument(str_cat("label_flip_prob must lie in [0,1], got ", label_flip_prob));
  }
  if (!(dropout_p >= 0 && dropout_p <= 1)) {
    throw InvalidArgument(str_cat("dropout_p must lie in [0,1], got ", dropout_p));
  }
  if (!(recon_weight >= 0)) throw InvalidArgument("recon_weight must be >= 0");
  if (!(began_gamma > 0 && began_gamma <= 1)) {
    throw InvalidArgument(str_cat("began_gamma must lie in (0,1], got ", began_gamma));
  }
  if (!(began_lambda_k >= 0)) throw InvalidArgument("began_lambda_k must be >= 0");
  if (!(began_k0 >= 0 && began_k0 <= 1)) throw InvalidArgument("began_k0 must lie in [0,1]");
  g_optimizer.validate();
  d_optimizer.validate();
  if (defense == Defense::dp) dp.validate();
}

std::size_t TrainConfig::steps_per_epoch(std::size_t n) const {
  if (n == 0) throw InvalidArgument("training set is empty");
  return (n + batch_size - 1) / batch_size;
}

std::size_t TrainConfig::total_steps(std::size_t n) const {
  return epochs > 0 ? epochs * steps_per_epoch(n) : max_steps;
}

void write_train_config(const TrainConfig& c, ConfigSection& s) {
  auto i = [](std::uint64_t v) { return ConfigValue(static_cast<std::int64_t>(v)); };
  auto pair = [](double a, double b) {
    return ConfigValue(ConfigValue::List{ConfigValue(a), ConfigValue(b)});
  };
  s.set("batch_size", i(c.batch_size));
  s.set("epochs", i(c.epochs));
  s.set("max_steps", i(c.max_steps));
  s.set("label_smooth_real", pair(c.label_smooth_real_lo, c.label_smooth_real_hi));
  s.set("label_smooth_fake", pair(c.label_smooth_fake_lo, c.label_smooth_fake_hi));
  s.set("label_flip_prob", ConfigValue(c.label_flip_prob));
  s.set("non_saturating", ConfigValue(c.non_saturating));
  s.set("optimizer", ConfigValue(std::string(optimizer_kind_name(c.g_optimizer.kind))));
  s.set("g_lr", ConfigValue(c.g_optimizer.learning_rate));
  s.set("d_lr", ConfigValue(c.d_optimizer.learning_rate));
  s.set("beta1", ConfigValue(c.g_optimizer.beta1));
  s.set("beta2", ConfigValue(c.g_optimizer.beta2));
  s.set("adam_eps", ConfigValue(c.g_optimizer.eps));
  s.set("train_seed", i(c.seed));
  s.set("defense", ConfigValue(std::string(defense_name(c.defense))));
  s.set("dropout_p", ConfigValue(c.dropout_p));
  s.set("dp_sigma", ConfigValue(c.dp.noise_sigma));
  s.set("dp_site", ConfigValue(std::string(dp_site_name(c.dp.site))));
  s.set("dp_clip", ConfigValue(c.dp.clip_norm));
  s.set("dp_delta", ConfigValue(c.dp.delta));
  s.set("dp_sampling_rate", ConfigValue(c.dp.sampling_rate));
  s.set("recon_weight", ConfigValue(c.recon_weight));
  s.set("began_gamma", ConfigValue(c.began_gamma));
  s.set("began_lambda_k", ConfigValue(c.began_lambda_k));
  s.set("began_k0", ConfigValue(c.began_k0));
}

TrainConfig read_train_config(const ConfigSection& s) {
  TrainConfig c;
  auto nonneg = [&](const char* key, std::int64_t fallback) {
    std::int64_t v = s.get_int(key, fallback);
    if (v < 0) {
      throw ConfigError(str_cat(s.at(key).pos().line, ":", s.at(key).pos().column,
                                ": ", key, " must be >= 0"));
    }
    return static_cast<std::size_t>(v);
  };
  c.batch_size = nonneg("batch_size", 32);
  c.epochs = nonneg("epochs", 0);
  c.max_steps = nonneg("max_steps", 0);
  auto interval = [&](const char* key, double& lo, double& hi) {
    std::vector<double> v = s.get_doubles(key, {lo, hi});
    if (v.size() != 2) throw ConfigError(str_cat(key, " must be a [lo, hi] pair"));
    lo = v[0];
    hi = v[1];
  };
  interval("label_smooth_real", c.label_smooth_real_lo, c.label_smooth_real_hi);
  interval("label_smooth_fake", c.label_smooth_fake_lo, c.label_smooth_fake_hi);
  c.label_flip_prob = s.get_double("label_flip_prob", c.label_flip_prob);
  c.non_saturating = s.get_bool("non_saturating", c.non_saturating);
  OptimizerKind kind = parse_optimizer_kind(s.get_string("optimizer", "adam"));
  double lr = s.get_double("lr", 2e-4);
  for (OptimizerSettings* o : {&c.g_optimizer, &c.d_optimizer}) {
    o->kind = kind;
    o->learning_rate = lr;
    o->beta1 = s.get_double("beta1", o->beta1);
    o->beta2 = s.get_double("beta2", o->beta2);
    o->eps = s.get_double("adam_eps", o->eps);
  }
  c.g_optimizer.learning_rate = s.get_double("g_lr", lr);
  c.d_optimizer.learning_rate = s.get_double("d_lr", lr);
  c.seed = static_cast<std::uint64_t>(s.get_int("train_seed", 0));
  c.defense = parse_defense(s.get_string("defense", "none"));
  c.dropout_p = s.get_double("dropout_p", c.dropout_p);
  c.dp.noise_sigma = s.get_double("dp_sigma", c.dp.noise_sigma);
  c.dp.site = parse_dp_site(s.get_string("dp_site", "gradient"));
  c.dp.clip_norm = s.get_double("dp_clip", c.dp.clip_norm);
  c.dp.delta = s.get_double("dp_delta", c.dp.delta);
  c.dp.sampling_rate = s.get_double("dp_sampling_rate", c.dp.sampling_rate);
  c.recon_weight = s.get_double("recon_weight", c.recon_weight);
  c.began_gamma = s.get_double("began_gamma", c.began_gamma);
  c.began_lambda_k = s.get_double("began_lambda_k", c.began_lambda_k);
  c.began_k0 = s.get_double("began_k0", c.began_k0);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(str_cat("[", s.name(), "]: ", e.what()));
  }
  return c;
}

// --- model construction ------------------------------------------------------

GanModel make_model(ModelFamily family, const Shape& record_shape,
                    const ModelOptions& options, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  PresetOptions g = options.g;
  PresetOptions d = options.d;
  if (cfg.defense == Defense::dropout) d.dropout_p = cfg.dropout_p;
  if (cfg.defense == Defense::weight_norm) g.weight_norm = d.weight_norm = true;

  GanModel m;
  m.family = family;
  m.generator.spec = make_network(options.preset, NetworkRole::generator, record_shape, g);
  m.discriminator.spec =
      make_network(options.preset,
                   family == ModelFamily::began ? NetworkRole::autoencoder
                                                : NetworkRole::discriminator,
                   record_shape, d);
  if (cfg.defense == Defense::dp && cfg.dp.site == DpSite::forward_pass) {
    auto& layers = m.discriminator.spec.layers;
    auto it = std::find_if(layers.begin(), layers.end(), [](const LayerSpec& l) {
      return l.activation != Activation::none;
    });
    if (it == layers.end()) throw InvalidArgument("discriminator has no hidden activation");
    layers.insert(it + 1, LayerSpec::noise(cfg.dp.noise_sigma));
    m.discriminator.spec.validate();
  }
  Rng g_rng = rng.fork("generator");
  Rng d_rng = rng.fork("discriminator");
  m.generator.params = build_network(m.generator.spec, g_rng);
  m.discriminator.params = build_network(m.discriminator.spec, d_rng);
  m.generator.opt = OptimizerState(cfg.g_optimizer);
  m.discriminator.opt = OptimizerState(cfg.d_optimizer);
  if (family == ModelFamily::vaegan) {
    PresetOptions e = d;
    e.dropout_p = 0;
    e.latent_dim = g.latent_dim;
    Network enc;
    enc.spec = make_network(options.preset, NetworkRole::encoder, record_shape, e);
    Rng e_rng = rng.fork("encoder");
    enc.params = build_network(enc.spec, e_rng);
    enc.opt = OptimizerState(cfg.g_optimizer);
    m.encoder = std::move(enc);
  }
  m.began = BeganState{cfg.began_k0, cfg.began_gamma, cfg.began_lambda_k};
  return m;
}

// --- labels and step helpers ---------------------------------------------------

Tensor smooth_labels(LabelRole role, std::size_t batch_size, const TrainConfig& cfg,
                     Rng& rng) {
  if (batch_size == 0) throw InvalidArgument("smooth_labels: empty batch");
  bool real = role == LabelRole::real;
  // The flip draw happens every call so streams stay aligned across settings.
  if (rng.uniform() < cfg.label_flip_prob) real = !real;
  double lo = real ? cfg.label_smooth_real_lo : cfg.label_smooth_fake_lo;
  double hi = real ? cfg.label_smooth_real_hi : cfg.label_smooth_fake_hi;
  Tensor y(Shape{batch_size, 1});
  for (Real& v : y.data()) v = static_cast<Real>(rng.uniform(lo, hi));
  return y;
}

namespace {

Tensor row(const Tensor& batch, std::size_t i) {
  Shape s = batch.shape();
  std::size_t stride = batch.numel() / s[0];
  s[0] = 1;
  Tensor out(s);
  std::copy_n(batch.data().begin() + static_cast<long>(i * stride), stride, out.data().begin());
  return out;
}

std::vector<Real> flat_grads(std::vector<Tensor*>& params) {
  std::vector<Real> out;
  for (Tensor* p : params) {
    auto g = std::as_const(*p).grad();
    if (g.empty()) {
      out.insert(out.end(), p->numel(), Real(0));
    } else {
      out.insert(out.end(), g.begin(), g.end());
    }
  }
  return out;
}

void set_grads(std::vector<Tensor*>& params, std::span<const Real> flat) {
  std::size_t k = 0;
  for (Tensor* p : params) {
    auto g = p->grad();
    for (Real& x : g) x = flat[k++];
  }
}

Tensor generate(Network& g, std::size_t count, Rng& rng) {
  Tape tape;
  Tensor z = sample_latent(g.spec, count, rng);
  return forward_network(tape, g.params, g.spec, tape.constant(std::move(z)), Mode::train,
                         rng, Binding::frozen)
      .output.value();
}

// Binary cross-entropy of the discriminator on a real and a fake batch;
// returns (real term, fake term) and leaves gradients in D's parameters.
std::pair<double, double> discriminator_update(GanModel& m, const Tensor& real,
                                               const Tensor& fake,
                                               const TrainConfig& cfg, Rng& rng) {
  Network& d = m.discriminator;
  std::size_t b = real.dim(0);
  Tensor y_real = smooth_labels(LabelRole::real, b, cfg, rng);
  Tensor y_fake = smooth_labels(LabelRole::fake, fake.dim(0), cfg, rng);
  d.params.zero_grad();
  double l_real = 0, l_fake = 0;
  bool private_grads = cfg.defense == Defense::dp && cfg.dp.site == DpSite::gradient;
  if (private_grads) {
    std::vector<Tensor*> params = d.params.trainable();
    {
      Tape tape;
      auto tr = forward_network(tape, d.params, d.spec, tape.constant(fake), Mode::train, rng);
      Var loss = bce_with_logits(tr.logits, y_fake);
      tape.backward(loss);
      l_fake = loss.value().item();
    }
    std::vector<Real> fake_grad = flat_grads(params);
    std::vector<std::vector<Real>> per_record;
    per_record.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
      d.params.zero_grad();
      Tape tape;
      auto tr = forward_network(tape, d.params, d.spec, tape.constant(row(real, i)),
                                Mode::train, rng);
      Var loss = bce_with_logits(tr.logits, Tensor(Shape{1, 1}, y_real[i]));
      tape.backward(loss);
      l_real += loss.value().item() / static_cast<double>(b);
      per_record.push_back(flat_grads(params));
    }
    std::vector<Real> noisy = dp_aggregate(per_record, cfg.dp, rng);
    for (std::size_t k = 0; k < noisy.size(); ++k) {
      noisy[k] = noisy[k] / static_cast<Real>(b) + fake_grad[k];
    }
    set_grads(params, noisy);
  } else {
    Tape tape;
    auto tr = forward_network(tape, d.params, d.spec, tape.constant(real), Mode::train, rng);
    auto tf = forward_network(tape, d.params, d.spec, tape.constant(fake), Mode::train, rng);
    Var lr = bce_with_logits(tr.logits, y_real);
    Var lf = bce_with_logits(tf.logits, y_fake);
    tape.backward(add(lr, lf));
    l_real = lr.value().item();
    l_fake = lf.value().item();
  }
  auto params = d.params.trainable();
  optimizer_step(d.opt, params);
  return {l_real, l_fake};
}

Var generator_adversarial_loss(Var logits, const TrainConfig& cfg) {
  std::size_t b = logits.shape()[0];
  if (cfg.non_saturating) return bce_with_logits(logits, Tensor(Shape{b, 1}, 1.0));
  // log(1 - D) = -BCE(logits, 0)
  return scale(bce_with_logits(logits, Tensor(Shape{b, 1}, 0.0)), Real(-1));
}

void check_batch(const GanModel& m, const Tensor& real) {
  const Shape& in = m.discriminator.spec.input_shape;
  if (real.rank() != in.size() + 1 ||
      !std::equal(in.begin(), in.end(), real.shape().begin() + 1)) {
    throw ShapeError(str_cat("real batch ", shape_str(real.shape()),
                             " does not match record shape ", shape_str(in)));
  }
}

}  // namespace

StepLosses gan_step(GanModel& m, const Tensor& real, const TrainConfig& cfg, Rng& rng,
                    const Tensor* extra_fake) {
  check_batch(m, real);
  std::size_t b = real.dim(0);
  Tensor fake;
  if (extra_fake) {
    std::size_t k = extra_fake->dim(0);
    fake = k < b ? concat_rows(generate(m.generator, b - k, rng), *extra_fake) : *extra_fake;
  } else {
    fake = generate(m.generator, b, rng);
  }
  auto [l_real, l_fake] = discriminator_update(m, real, fake, cfg, rng);

  Network& g = m.generator;
  g.params.zero_grad();
  Tape tape;
  Tensor z = sample_latent(g.spec, b, rng);
  auto gt = forward_network(tape, g.params, g.spec, tape.constant(std::move(z)), Mode::train, rng);
  auto dt = forward_network(tape, m.discriminator.params, m.discriminator.spec, gt.output,
                            Mode::train, rng, Binding::frozen);
  Var g_loss = generator_adversarial_loss(dt.logits, cfg);
  tape.backward(g_loss);
  auto params = g.params.trainable();
  optimizer_step(g.opt, params);

  StepLosses out;
  out.d_loss = l_real + l_fake;
  out.g_loss = g_loss.value().item();
  out.aux["d_loss_real"] = l_real;
  out.aux["d_loss_fake"] = l_fake;
  return out;
}

Var kl_standard_normal(Var mu, Var log_var) {
  if (mu.shape() != log_var.shape() || mu.shape().size() != 2) {
    throw ShapeError(str_cat("kl_standard_normal: mu ", shape_str(mu.shape()),
                             " vs log_var ", shape_str(log_var.shape())));
  }
  Tape& tape = *mu.tape();
  std::size_t b = mu.shape()[0];
  // 0.5 * sum(mu^2 + exp(lv) - 1 - lv) / B
  Var inner = sub(add(mul(mu, mu), exp(log_var)), log_var);
  Var total = sub(sum(inner), tape.constant(Tensor::scalar(static_cast<Real>(mu.value().numel()))));
  return scale(total, static_cast<Real>(0.5 / static_cast<double>(b)));
}

namespace {

std::pair<Var, Var> split_encoder_output(Var out, std::size_t latent) {
  return {slice_cols(out, 0, latent), slice_cols(out, latent, 2 * latent)};
}

}  // namespace

VaeLoss vae_elbo(Tape& tape, Var x, Network& encoder, Network& decoder, Rng& rng,
                 Mode mode) {
  std::size_t latent = encoder.spec.latent_dim;
  auto et = forward_network(tape, encoder.params, encoder.spec, x, mode, rng);
  auto [mu, lv] = split_encoder_output(et.output, latent);
  for (Real v : lv.value().data()) {
    if (!std::isfinite(std::exp(0.5 * static_cast<double>(v)))) {
      throw DivergenceError("vae_elbo: non-finite sigma from encoder");
    }
  }
  Var z = reparameterize(mu, lv, rng);
  auto dt = forward_network(tape, decoder.params, decoder.spec, z, mode, rng);
  std::size_t b = x.shape()[0];
  Var diff = sub(dt.output, x);
  Var recon = scale(sum(mul(diff, diff)), static_cast<Real>(0.5 / static_cast<double>(b)));
  Var kl = kl_standard_normal(mu, lv);
  return {add(kl, recon), kl, recon};
}

StepLosses vaegan_step(GanModel& m, const Tensor& real, const TrainConfig& cfg, Rng& rng) {
  if (!m.encoder) throw InvalidArgument("vaegan_step: model has no encoder");
  check_batch(m, real);
  std::size_t b = real.dim(0);
  Tensor fake = generate(m.generator, b, rng);
  auto [l_real, l_fake] = discriminator_update(m, real, fake, cfg, rng);

  Network& g = m.generator;
  Network& e = *m.encoder;
  Network& d = m.discriminator;
  g.params.zero_grad();
  e.params.zero_grad();
  Tape tape;
  // Adversarial term first, drawing randomness in the same order as gan_step.
  Tensor z = sample_latent(g.spec, b, rng);
  auto gt = forward_network(tape, g.params, g.spec, tape.constant(std::move(z)), Mode::train, rng);
  auto dt = forward_network(tape, d.params, d.spec, gt.output, Mode::train, rng, Binding::frozen);
  Var adv = generator_adversarial_loss(dt.logits, cfg);

  Var x = tape.constant(real);
  auto et = forward_network(tape, e.params, e.spec, x, Mode::train, rng);
  auto [mu, lv] = split_encoder_output(et.output, e.spec.latent_dim);
  Var z_enc = reparameterize(mu, lv, rng);
  auto rec = forward_network(tape, g.params, g.spec, z_enc, Mode::train, rng);
  auto f_real = forward_network(tape, d.params, d.spec, x, Mode::eval, rng, Binding::frozen);
  auto f_rec = forward_network(tape, d.params, d.spec, rec.output, Mode::eval, rng, Binding::frozen);
  Var fd = sub(f_rec.features, f_real.features);
  Var recon = scale(sum(mul(fd, fd)), static_cast<Real>(1.0 / static_cast<double>(b)));
  Var kl = kl_standard_normal(mu, lv);
  Var weighted = scale(recon, static_cast<Real>(cfg.recon_weight));
  tape.backward(add(add(adv, kl), weighted));
  auto gp = g.params.trainable();
  optimizer_step(g.opt, gp);
  auto ep = e.params.trainable();
  optimizer_step(e.opt, ep);

  StepLosses out;
  out.d_loss = l_real + l_fake;
  out.g_loss = adv.value().item() + weighted.value().item();
  out.aux["kl"] = kl.value().item();
  out.aux["recon"] = recon.value().item();
  return out;
}

void began_update_k(BeganState& s, double l_real, double l_fake) {
  s.k = std::clamp(s.k + s.lambda_k * (s.gamma * l_real - l_fake), 0.0, 1.0);
}

double began_convergence(const BeganState& s, double l_real, double l_fake) {
  return l_real + std::abs(s.gamma * l_real - l_fake);
}

namespace {

Var recon_l1(Var v, Var reconstructed) { return mean(abs(sub(v, reconstructed))); }

}  // namespace

StepLosses began_step(GanModel& m, const Tensor& real, const TrainConfig& cfg, Rng& rng) {
  (void)cfg;
  check_batch(m, real);
  std::size_t b = real.dim(0);
  Network& g = m.generator;
  Network& d = m.discriminator;
  Tensor fake = generate(g, b, rng);

  d.params.zero_grad();
  double l_real, l_fake, d_loss;
  {
    Tape tape;
    Var x = tape.constant(real);
    Var f = tape.constant(fake);
    Var lx = recon_l1(x, forward_network(tape, d.params, d.spec, x, Mode::train, rng).output);
    Var lg = recon_l1(f, forward_network(tape, d.params, d.spec, f, Mode::train, rng).output);
    Var loss = sub(lx, scale(lg, static_cast<Real>(m.began.k)));
    tape.backward(loss);
    l_real = lx.value().item();
    l_fake = lg.value().item();
    d_loss = loss.value().item();
  }
  auto dp = d.params.trainable();
  optimizer_step(d.opt, dp);

  g.params.zero_grad();
  Tape tape;
  Tensor z = sample_latent(g.spec, b, rng);
  auto gt = forward_network(tape, g.params, g.spec, tape.constant(std::move(z)), Mode::train, rng);
  auto rt = forward_network(tape, d.params, d.spec, gt.output, Mode::train, rng, Binding::frozen);
  Var g_loss = recon_l1(gt.output, rt.output);
  tape.backward(g_loss);
  auto gp = g.params.trainable();
  optimizer_step(g.opt, gp);

  StepLosses out;
  out.d_loss = d_loss;
  out.g_loss = g_loss.value().item();
  out.aux["convergence"] = began_convergence(m.began, l_real, l_fake);
  began_update_k(m.began, l_real, l_fake);
  out.aux["k"] = m.began.k;
  return out;
}

std::vector<double> reconstruction_errors(const Network& ae, const Tensor& records) {
  Tensor rec = forward_network(ae.params, ae.spec, records);
  std::size_t n = records.dim(0);
  std::size_t per = records.numel() / n;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < per; ++j) s += std::abs(records[i * per + j] - rec[i * per + j]);
    out[i] = s / static_cast<double>(per);
  }
  return out;
}

// --- differential privacy ----------------------------------------------------

Tensor dp_apply(const Tensor& x, const DPConfig& dp, Rng& rng) {
  if (!(dp.noise_sigma > 0)) throw InvalidArgument("dp_apply: sigma must be positive");
  Tensor out = x;
  for (Real& v : out.data()) v = static_cast<Real>(v + rng.normal(0.0, dp.noise_sigma));
  return out;
}

double clip_to_norm(std::span<Real> g, double clip_norm) {
  double ss = 0;
  for (Real v : g) ss += static_cast<double>(v) * v;
  double norm = std::sqrt(ss);
  if (norm > clip_norm) {
    double f = clip_norm / norm;
    for (Real& v : g) v = static_cast<Real>(v * f);
  }
  return norm;
}

std::vector<Real> dp_aggregate(std::span<const std::vector<Real>> per_record,
                               const DPConfig& dp, Rng& rng) {
  if (per_record.empty()) throw InvalidArgument("dp_aggregate: no records");
  if (!(dp.noise_sigma > 0)) throw InvalidArgument("dp_aggregate: sigma must be positive");
  std::size_t dim = per_record[0].size();
  std::vector<double> acc(dim, 0.0);
  std::vector<Real> tmp;
  for (const auto& g : per_record) {
    if (g.size() != dim) throw ShapeError("dp_aggregate: ragged per-record gradients");
    tmp = g;
    clip_to_norm(tmp, dp.clip_norm);
    for (std::size_t k = 0; k < dim; ++k) acc[k] += tmp[k];
  }
  std::vector<Real> out(dim);
  double sd = dp.noise_sigma * dp.clip_norm;
  for (std::size_t k = 0; k < dim; ++k) out[k] = static_cast<Real>(acc[k] + rng.normal(0.0, sd));
  return out;
}

double sampled_gaussian_log_a(double q, double sigma, int alpha) {
  if (alpha < 2) throw InvalidArgument("sampled_gaussian_log_a: alpha must be >= 2");
  if (!(q >= 0 && q <= 1)) throw InvalidArgument("sampling rate must lie in [0,1]");
  if (!(sigma > 0)) throw InvalidArgument("sigma must be positive");
  if (q == 0) return 0;
  // A = sum_k C(a,k) (1-q)^(a-k) q^k exp((k^2 - k) / (2 sigma^2))
  std::vector<double> terms;
  double log_q = std::log(q);
  double log_1mq = q < 1 ? std::log1p(-q) : -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= alpha; ++k) {
    if (q == 1 && k < alpha) continue;
    double log_binom = std::lgamma(alpha + 1.0) - std::lgamma(k + 1.0) - std::lgamma(alpha - k + 1.0);
    double t = log_binom + k * log_q + (k < alpha ? (alpha - k) * log_1mq : 0.0) +
               (static_cast<double>(k) * k - k) / (2 * sigma * sigma);
    terms.push_back(t);
  }
  double mx = *std::max_element(terms.begin(), terms.end());
  double s = 0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

std::optional<double> epsilon_account(const DPConfig& dp, std::uint64_t steps) {
  if (!(dp.sampling_rate > 0 && dp.sampling_rate <= 1)) {
    throw InvalidArgument(str_cat("epsilon_account: sampling rate must lie in (0,1], got ",
                                  dp.sampling_rate));
  }
  if (!(dp.noise_sigma > 0)) {
    throw InvalidArgument(str_cat("epsilon_account: sigma must be positive, got ", dp.noise_sigma));
  }
  if (!(dp.delta > 0 && dp.delta < 1)) {
    throw InvalidArgument("epsilon_account: delta must lie in (0,1)");
  }
  if (dp.site == DpSite::forward_pass) return std::nullopt;
  if (steps == 0) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  double t = static_cast<double>(steps);
  for (int alpha = 2; alpha <= 64; ++alpha) {
    double rdp = sampled_gaussian_log_a(dp.sampling_rate, dp.noise_sigma, alpha) / (alpha - 1);
    double eps = t * rdp + std::log(1 / dp.delta) / (alpha - 1);
    best = std::min(best, eps);
  }
  return best;
}

double sigma_for_epsilon(double target, double q, std::uint64_t steps, double delta) {
  if (!(target > 0)) throw InvalidArgument("sigma_for_epsilon: target must be positive");
  DPConfig dp;
  dp.sampling_rate = q;
  dp.delta = delta;
  auto eps_at = [&](double s) {
    dp.noise_sigma = s;
    return *epsilon_account(dp, steps);
  };
  double lo = 1e-3, hi = 1.0;
  while (eps_at(hi) > target) {
    lo = hi;
    hi *= 2;
    if (hi > 1e9) throw InvalidArgument("sigma_for_epsilon: target unreachable");
  }
  if (eps_at(lo) <= target) return lo;
  while ((hi - lo) > 1e-3 * hi) {
    double mid = 0.5 * (lo + hi);
    (eps_at(mid) > target ? lo : hi) = mid;
  }
  return hi;
}

GENLEAK_NAMESPACE_END
