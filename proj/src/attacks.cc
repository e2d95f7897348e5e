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

#include "genleak/attacks.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "genleak/optimizer.h"
#include "genleak/tape.h"

GENLEAK_NAMESPACE_BEGIN

using internal::str_cat;

Ranking rank_scores(std::vector<double> scores, std::size_t claimed_n) {
  if (claimed_n > scores.size()) {
    throw InvalidArgument(str_cat("claimed_n ", claimed_n, " exceeds the ", scores.size(),
                                  " candidates"));
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw DomainError(str_cat("score of candidate ", i, " is not finite"));
    }
  }
  Ranking r;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.scores = std::move(scores);
  r.claimed_n = claimed_n;
  return r;
}

namespace {

Shape record_shape_of(const Tensor& candidates) {
  if (candidates.rank() < 2 || candidates.dim(0) == 0) {
    throw ShapeError(str_cat("candidates must be a non-empty [N, ...] batch, got ",
                             shape_str(candidates.shape())));
  }
  return Shape(candidates.shape().begin() + 1, candidates.shape().end());
}

void check_input(const NetworkSpec& spec, const Tensor& candidates) {
  Shape rs = record_shape_of(candidates);
  if (rs != spec.input_shape) {
    throw ShapeError(str_cat("candidate records ", shape_str(rs),
                             " do not match discriminator input ",
                             shape_str(spec.input_shape)));
  }
}

}  // namespace

std::vector<double> discriminator_scores(const Network& d, const Tensor& candidates) {
  check_input(d.spec, candidates);
  if (d.spec.role == NetworkRole::autoencoder) {
    std::vector<double> err = reconstruction_errors(d, candidates);
    for (double& e : err) e = -e;
    return err;
  }
  Tensor logits = forward_logits(d.params, d.spec, candidates);
  std::vector<double> out(logits.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i];
  return out;
}

Ranking score_and_rank(const Network& d, const Tensor& candidates, std::size_t claimed_n) {
  return rank_scores(discriminator_scores(d, candidates), claimed_n);
}

WhiteBoxTarget WhiteBoxTarget::from_model(const GanModel& model) {
  return WhiteBoxTarget{model.discriminator};
}

WhiteBoxTarget WhiteBoxTarget::from_checkpoint(const std::string& path) {
  CheckpointReader reader(path);
  WhiteBoxTarget t;
  if (reader.has_network("discriminator")) t.discriminator = reader.read_network("discriminator");
  return t;
}

BlackBoxTarget BlackBoxTarget::from_generator(Network generator, std::uint64_t seed) {
  auto g = std::make_shared<Network>(std::move(generator));
  auto rng = std::make_shared<Rng>(Rng::derive(seed, "target_samples"));
  return BlackBoxTarget([g, rng](std::size_t count) {
    return forward_network(g->params, g->spec, sample_latent(g->spec, count, *rng));
  });
}

Tensor BlackBoxTarget::sample(std::size_t count) {
  Tensor out = fn_(count);
  if (out.rank() < 1 || out.dim(0) != count) {
    throw Error(str_cat("target returned ", out.rank() ? out.dim(0) : 0, " records, ",
                        count, " requested"));
  }
  queries_ += count;
  return out;
}

std::string_view aux_setting_name(AuxSetting s) {
  switch (s) {
    case AuxSetting::test_only: return "test_only";
    case AuxSetting::train_only: return "train_only";
    case AuxSetting::train_and_test: return "train_and_test";
  }
  return "?";
}

AuxSetting parse_aux_setting(std::string_view s) {
  if (s == "test_only") return AuxSetting::test_only;
  if (s == "train_only") return AuxSetting::train_only;
  if (s == "train_and_test") return AuxSetting::train_and_test;
  throw InvalidArgument(str_cat("unknown aux setting '", s,
                                "' (expected test_only, train_only or train_and_test)"));
}

AttackOutput whitebox_attack(const WhiteBoxTarget& target, const Tensor& candidates,
                             std::size_t claimed_n) {
  if (!target.discriminator) {
    throw UnsupportedTarget("white-box attack needs a discriminator; the target has none");
  }
  AttackOutput out;
  out.ranking = score_and_rank(*target.discriminator, candidates, claimed_n);
  return out;
}

namespace {

constexpr std::size_t kBlackboxSteps = 50000;
constexpr std::size_t kGenerativeSteps = 15000;

std::size_t steps_or(const AttackerConfig& cfg, std::size_t fallback) {
  return cfg.steps ? cfg.steps : fallback;
}

void check_config(const AttackerConfig& cfg, const Tensor& candidates, std::size_t claimed_n) {
  cfg.train.validate();
  if (cfg.eval_interval == 0) throw InvalidArgument("eval_interval must be positive");
  record_shape_of(candidates);
  if (claimed_n > candidates.dim(0)) {
    throw InvalidArgument(str_cat("claimed_n ", claimed_n, " exceeds the ", candidates.dim(0),
                                  " candidates"));
  }
}

void check_indices(std::span<const std::size_t> idx, std::size_t n, const char* what) {
  for (std::size_t i : idx) {
    if (i >= n) throw InvalidArgument(str_cat(what, " index ", i, " out of range for ", n,
                                              " candidates"));
  }
}

// `count` rows drawn uniformly with replacement from `pool`.
Tensor draw_rows(const Tensor& pool, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.index(pool.dim(0)));
  return take_rows(pool, idx);
}

// Where each attacker step's real and extra fake rows come from.
struct StepSources {
  std::function<Tensor(std::uint64_t step, std::size_t b)> real;
  std::function<std::optional<Tensor>(std::uint64_t step, std::size_t b)> extra_fake;
};

GanModel train_attacker_gan(const Shape& record_shape, const AttackerConfig& cfg,
                            std::size_t steps, const StepSources& src,
                            const Tensor& candidates, std::size_t claimed_n,
                            const RankingObserver& observer) {
  Rng init = Rng::derive(cfg.seed, "attacker_model");
  GanModel model = make_model(ModelFamily::gan, record_shape, cfg.model, cfg.train, init);
  std::size_t b = cfg.train.batch_size;
  for (std::uint64_t step = 1; step <= steps; ++step) {
    Rng rng = Rng::derive(cfg.seed, "attacker_step", step);
    Tensor real = src.real(step, b);
    std::optional<Tensor> extra;
    if (src.extra_fake) extra = src.extra_fake(step, b);
    gan_step(model, real, cfg.train, rng, extra ? &*extra : nullptr);
    if (observer && (step % cfg.eval_interval == 0 || step == steps)) {
      observer(step, score_and_rank(model.discriminator, candidates, claimed_n));
    }
  }
  return model;
}

AttackOutput finish(const GanModel& model, const BlackBoxTarget& target,
                    const Tensor& candidates, std::size_t claimed_n, std::size_t steps) {
  AttackOutput out;
  out.ranking = score_and_rank(model.discriminator, candidates, claimed_n);
  out.queries = target.queries();
  out.steps = steps;
  return out;
}

}  // namespace

AttackOutput blackbox_attack(BlackBoxTarget& target, const Tensor& candidates,
                             std::size_t claimed_n, const AttackerConfig& cfg,
                             const RankingObserver& observer) {
  check_config(cfg, candidates, claimed_n);
  std::size_t steps = steps_or(cfg, kBlackboxSteps);
  StepSources src;
  src.real = [&](std::uint64_t, std::size_t b) { return target.sample(b); };
  GanModel model = train_attacker_gan(record_shape_of(candidates), cfg, steps, src, candidates,
                                      claimed_n, observer);
  return finish(model, target, candidates, claimed_n, steps);
}

AttackOutput discriminative_aux_attack(BlackBoxTarget& target, const Tensor& candidates,
                                       std::size_t claimed_n, const AuxKnowledge& aux,
                                       AuxSetting setting, const AttackerConfig& cfg,
                                       const RankingObserver& observer) {
  check_config(cfg, candidates, claimed_n);
  std::size_t n = candidates.dim(0);
  check_indices(aux.known_members, n, "known member");
  check_indices(aux.known_nonmembers, n, "known non-member");
  if (setting == AuxSetting::train_only) {
    throw InvalidArgument("discriminative attack supports test_only and train_and_test");
  }
  if (aux.known_nonmembers.empty()) {
    throw InvalidArgument("discriminative attack needs known non-members");
  }
  bool use_members = setting == AuxSetting::train_and_test;
  if (use_members && aux.known_members.empty()) {
    throw InvalidArgument("train_and_test needs known members");
  }
  if (aux.known_members.size() + aux.known_nonmembers.size() >= n) {
    throw InvalidArgument("auxiliary knowledge covers every candidate; nothing left to infer");
  }
  Tensor nonmembers = take_rows(candidates, aux.known_nonmembers);
  Tensor members = use_members ? take_rows(candidates, aux.known_members) : Tensor();

  std::size_t steps = steps_or(cfg, kBlackboxSteps);
  Rng init = Rng::derive(cfg.seed, "attacker_model");
  GanModel model =
      make_model(ModelFamily::gan, record_shape_of(candidates), cfg.model, cfg.train, init);
  Network& d = model.discriminator;
  Rng aux_rng = Rng::derive(cfg.seed, "aux_draws");
  std::size_t b = cfg.train.batch_size;
  for (std::uint64_t step = 1; step <= steps; ++step) {
    Rng rng = Rng::derive(cfg.seed, "attacker_step", step);
    Tensor real;
    if (use_members) {
      std::size_t half = b / 2;
      real = concat_rows(target.sample(b - half), draw_rows(members, half, aux_rng));
    } else {
      real = target.sample(b);
    }
    Tensor fake = draw_rows(nonmembers, b, aux_rng);
    Tensor y_real = smooth_labels(LabelRole::real, b, cfg.train, rng);
    Tensor y_fake = smooth_labels(LabelRole::fake, b, cfg.train, rng);
    d.params.zero_grad();
    Tape tape;
    auto tr = forward_network(tape, d.params, d.spec, tape.constant(real), Mode::train, rng);
    auto tf = forward_network(tape, d.params, d.spec, tape.constant(fake), Mode::train, rng);
    tape.backward(add(bce_with_logits(tr.logits, y_real), bce_with_logits(tf.logits, y_fake)));
    auto params = d.params.trainable();
    optimizer_step(d.opt, params);
    if (observer && (step % cfg.eval_interval == 0 || step == steps)) {
      observer(step, score_and_rank(d, candidates, claimed_n));
    }
  }
  return finish(model, target, candidates, claimed_n, steps);
}

AttackOutput generative_aux_attack(BlackBoxTarget& target, const Tensor& candidates,
                                   std::size_t claimed_n, const AuxKnowledge& aux,
                                   AuxSetting setting, const AttackerConfig& cfg,
                                   std::size_t delay_steps, const RankingObserver& observer) {
  check_config(cfg, candidates, claimed_n);
  std::size_t n = candidates.dim(0);
  check_indices(aux.known_members, n, "known member");
  check_indices(aux.known_nonmembers, n, "known non-member");
  if (setting == AuxSetting::test_only) {
    throw InvalidArgument("generative attack supports train_only and train_and_test");
  }
  std::size_t steps = steps_or(cfg, kGenerativeSteps);
  // No knowledge at all: the plain black-box attack.
  bool use_members = !aux.empty();
  bool use_nonmembers = use_members && setting == AuxSetting::train_and_test;
  if (use_members && aux.known_members.empty()) {
    throw InvalidArgument("generative attack needs known members");
  }
  if (use_nonmembers && aux.known_nonmembers.empty()) {
    throw InvalidArgument("train_and_test needs known non-members");
  }
  Tensor members = use_members ? take_rows(candidates, aux.known_members) : Tensor();
  Tensor nonmembers = use_nonmembers ? take_rows(candidates, aux.known_nonmembers) : Tensor();

  Rng aux_rng = Rng::derive(cfg.seed, "aux_draws");
  StepSources src;
  src.real = [&](std::uint64_t step, std::size_t b) {
    if (!use_members || step <= delay_steps) return target.sample(b);
    std::size_t half = b / 2;
    return concat_rows(target.sample(b - half), draw_rows(members, half, aux_rng));
  };
  if (use_nonmembers) {
    src.extra_fake = [&](std::uint64_t step, std::size_t b) -> std::optional<Tensor> {
      if (step <= delay_steps) return std::nullopt;
      return draw_rows(nonmembers, b / 2, aux_rng);
    };
  }
  GanModel model = train_attacker_gan(record_shape_of(candidates), cfg, steps, src, candidates,
                                      claimed_n, observer);
  return finish(model, target, candidates, claimed_n, steps);
}

AttackOutput euclidean_attack(BlackBoxTarget& target, const Tensor& candidates,
                              std::size_t claimed_n, std::size_t num_generated) {
  if (num_generated == 0) throw InvalidArgument("num_generated must be at least 1");
  Shape rs = record_shape_of(candidates);
  Tensor gen = target.sample(num_generated);
  if (Shape(gen.shape().begin() + 1, gen.shape().end()) != rs) {
    throw ShapeError(str_cat("target samples ", shape_str(gen.shape()),
                             " do not match candidate records ", shape_str(rs)));
  }
  std::size_t n = candidates.dim(0);
  std::size_t per = shape_numel(rs);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0;
    for (std::size_t g = 0; g < num_generated; ++g) {
      double s = 0;
      for (std::size_t j = 0; j < per; ++j) {
        double diff = static_cast<double>(candidates[i * per + j]) - gen[g * per + j];
        s += diff * diff;
      }
      total += std::sqrt(s);
    }
    scores[i] = -total / static_cast<double>(num_generated);
  }
  AttackOutput out;
  out.ranking = rank_scores(std::move(scores), claimed_n);
  out.queries = target.queries();
  return out;
}

Network train_shadow_generator(const Tensor& members, const AttackerConfig& cfg) {
  cfg.train.validate();
  std::size_t steps = steps_or(cfg, kBlackboxSteps);
  Rng init = Rng::derive(cfg.seed, "shadow_model");
  GanModel shadow =
      make_model(ModelFamily::gan, record_shape_of(members), cfg.model, cfg.train, init);
  Rng draws = Rng::derive(cfg.seed, "shadow_draws");
  for (std::uint64_t step = 1; step <= steps; ++step) {
    Rng rng = Rng::derive(cfg.seed, "shadow_step", step);
    gan_step(shadow, draw_rows(members, cfg.train.batch_size, draws), cfg.train, rng);
  }
  return std::move(shadow.generator);
}

AttackOutput shadow_attack(BlackBoxTarget& target, const Tensor& candidates,
                           std::size_t claimed_n, const AuxKnowledge& aux,
                           const AttackerConfig& cfg, const RankingObserver& observer) {
  check_config(cfg, candidates, claimed_n);
  check_indices(aux.known_members, candidates.dim(0), "known member");
  if (aux.known_members.empty()) throw InvalidArgument("shadow attack needs known members");
  Network shadow = train_shadow_generator(take_rows(candidates, aux.known_members), cfg);
  Rng shadow_rng = Rng::derive(cfg.seed, "shadow_samples");
  Rng coin = Rng::derive(cfg.seed, "shadow_coin");
  std::uint64_t from_target = 0, from_shadow = 0;
  StepSources src;
  src.real = [&](std::uint64_t, std::size_t b) {
    if (coin.bernoulli(0.5)) {
      ++from_target;
      return target.sample(b);
    }
    ++from_shadow;
    return forward_network(shadow.params, shadow.spec, sample_latent(shadow.spec, b, shadow_rng));
  };
  std::size_t steps = steps_or(cfg, kBlackboxSteps);
  GanModel model = train_attacker_gan(record_shape_of(candidates), cfg, steps, src, candidates,
                                      claimed_n, observer);
  AttackOutput out = finish(model, target, candidates, claimed_n, steps);
  out.target_batches = from_target;
  out.shadow_batches = from_shadow;
  return out;
}

GENLEAK_NAMESPACE_END
