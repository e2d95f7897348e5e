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

#ifndef GENLEAK_ATTACKS_H_
#define GENLEAK_ATTACKS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genleak/common.h"
#include "genleak/datasets.h"
#include "genleak/nn.h"
#include "genleak/tensor.h"
#include "genleak/training.h"

GENLEAK_NAMESPACE_BEGIN

// Candidates sorted by descending score, ties by ascending index. The
// predicted members are the first claimed_n entries of `order`.
struct Ranking {
  std::vector<double> scores;
  std::vector<std::size_t> order;
  std::size_t claimed_n = 0;

  std::span<const std::size_t> predicted() const {
    return std::span<const std::size_t>(order).first(claimed_n);
  }
};

Ranking rank_scores(std::vector<double> scores, std::size_t claimed_n);

// Per-record confidence of a discriminator in eval mode: the logit of a
// classifying discriminator (monotone in its probability), or the negative
// reconstruction error of an autoencoding one.
std::vector<double> discriminator_scores(const Network& d, const Tensor& candidates);

Ranking score_and_rank(const Network& d, const Tensor& candidates, std::size_t claimed_n);

// What a white-box attacker holds: the target's discriminator, if any.
struct WhiteBoxTarget {
  std::optional<Network> discriminator;

  static WhiteBoxTarget from_model(const GanModel& model);
  static WhiteBoxTarget from_checkpoint(const std::string& path);
};

// Opaque sampler: the attacker sees generated records only. The sampler
// owns its randomness. Every returned record counts as one query.
class BlackBoxTarget {
 public:
  using SampleFn = std::function<Tensor(std::size_t count)>;

  explicit BlackBoxTarget(SampleFn fn) : fn_(std::move(fn)) {}
  static BlackBoxTarget from_generator(Network generator, std::uint64_t seed);

  Tensor sample(std::size_t count);
  std::uint64_t queries() const { return queries_; }

 private:
  SampleFn fn_;
  std::uint64_t queries_ = 0;
};

// Called with the attacker step and the current ranking every eval_interval
// steps and after the last step.
using RankingObserver = std::function<void(std::uint64_t step, const Ranking&)>;

struct AttackerConfig {
  ModelOptions model;
  TrainConfig train;
  // 0 selects the attack's default: 15000 steps for the generative
  // auxiliary attack, 50000 otherwise.
  std::size_t steps = 0;
  std::size_t eval_interval = 500;
  std::uint64_t seed = 0;
};

struct AttackOutput {
  Ranking ranking;
  std::uint64_t queries = 0;
  std::uint64_t steps = 0;
  // Shadow attack only: mini-batches whose real stream came from each source.
  std::uint64_t target_batches = 0;
  std::uint64_t shadow_batches = 0;
};

// Scores candidates with the target's own discriminator; no training.
// Throws UnsupportedTarget when the target has no discriminator.
AttackOutput whitebox_attack(const WhiteBoxTarget& target, const Tensor& candidates,
                             std::size_t claimed_n);

// Trains a local GAN whose real stream is target samples, then ranks with
// its discriminator.
AttackOutput blackbox_attack(BlackBoxTarget& target, const Tensor& candidates,
                             std::size_t claimed_n, const AttackerConfig& cfg,
                             const RankingObserver& observer = {});

enum class AuxSetting { test_only, train_only, train_and_test };

std::string_view aux_setting_name(AuxSetting s);
AuxSetting parse_aux_setting(std::string_view s);

// Trains a standalone discriminator: real stream is target samples (plus
// known members for train_and_test, half of each batch), fake stream is
// known non-members.
AttackOutput discriminative_aux_attack(BlackBoxTarget& target, const Tensor& candidates,
                                       std::size_t claimed_n, const AuxKnowledge& aux,
                                       AuxSetting setting, const AttackerConfig& cfg,
                                       const RankingObserver& observer = {});

// blackbox_attack for delay_steps, then half of each real batch is known
// members and, for train_and_test, half of each fake batch is known
// non-members. Empty knowledge leaves the plain black-box attack.
AttackOutput generative_aux_attack(BlackBoxTarget& target, const Tensor& candidates,
                                   std::size_t claimed_n, const AuxKnowledge& aux,
                                   AuxSetting setting, const AttackerConfig& cfg,
                                   std::size_t delay_steps = 1000,
                                   const RankingObserver& observer = {});

// Ranks by ascending mean distance to num_generated target samples.
AttackOutput euclidean_attack(BlackBoxTarget& target, const Tensor& candidates,
                              std::size_t claimed_n, std::size_t num_generated = 256);

// GAN trained on `members` (rows drawn with replacement) for cfg.steps;
// returns its generator.
Network train_shadow_generator(const Tensor& members, const AttackerConfig& cfg);

// Trains a shadow GAN on the known members for cfg.steps, then an attacker
// GAN whose real batches come from the target or the shadow generator with
// equal probability.
AttackOutput shadow_attack(BlackBoxTarget& target, const Tensor& candidates,
                           std::size_t claimed_n, const AuxKnowledge& aux,
                           const AttackerConfig& cfg, const RankingObserver& observer = {});

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_ATTACKS_H_
