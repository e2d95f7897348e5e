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

#ifndef GENLEAK_TESTS_FIXTURES_H_
#define GENLEAK_TESTS_FIXTURES_H_

// Shared toy experiments for the attack, evaluation and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>

#include "genleak/attacks.h"
#include "genleak/datasets.h"
#include "genleak/evaluation.h"
#include "genleak/training.h"

namespace genleak::fixtures {

// 320 points on an 8-mode ring, 32 of them members.
struct RingExperiment {
  Dataset data;
  MembershipSplit split;
  Tensor members() const { return data.gather(split.train); }
};

inline RingExperiment ring_experiment(std::uint64_t seed, std::size_t count = 320,
                                      double train_fraction = 0.1) {
  SyntheticSpec s;
  s.kind = SynthKind::ring;
  s.count = count;
  s.seed = seed;
  s.noise_sigma = 0.1;
  RingExperiment e;
  e.data = synth_generate(s);
  e.split = split_random_fraction(e.data, train_fraction, seed);
  return e;
}

// Target trained to memorize: full-batch updates, a fast learning rate and
// a wider initialization than the default.
inline TrainConfig overfit_train_config(std::uint64_t seed, std::size_t epochs = 2000) {
  TrainConfig c;
  c.batch_size = 32;
  c.epochs = epochs;
  c.seed = seed;
  c.g_optimizer.learning_rate = 1e-3;
  c.d_optimizer.learning_rate = 1e-3;
  return c;
}

inline ModelOptions overfit_model_options() {
  ModelOptions o;
  o.g.hidden = 128;
  o.d.hidden = 128;
  o.g.init_stddev = 0.3;
  o.d.init_stddev = 0.3;
  return o;
}

inline GanModel train_target(const RingExperiment& e, const TrainConfig& cfg,
                             const ModelOptions& options = overfit_model_options()) {
  Rng init = Rng::derive(cfg.seed, "target_model");
  Trainer trainer(make_model(ModelFamily::gan, e.data.record_shape, options, cfg, init),
                  e.members(), cfg);
  trainer.run();
  return trainer.model();
}

inline AttackerConfig attacker_config(std::uint64_t seed, std::size_t steps) {
  AttackerConfig a;
  a.model = overfit_model_options();
  a.train = overfit_train_config(seed);
  a.steps = steps;
  a.seed = seed;
  return a;
}

// Oracle that knows nothing about the members: fresh draws from the ring.
inline BlackBoxTarget fresh_ring_sampler(std::uint64_t seed, double noise_sigma = 0.1) {
  auto counter = std::make_shared<std::uint64_t>(0);
  return BlackBoxTarget([=](std::size_t count) {
    SyntheticSpec s;
    s.kind = SynthKind::ring;
    s.count = std::max<std::size_t>(count, 64);
    s.seed = mix64(seed ^ (*counter)++);
    s.noise_sigma = noise_sigma;
    Tensor pool = synth_generate(s).records;
    std::vector<std::size_t> rows(count);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return take_rows(pool, rows);
  });
}

}  // namespace genleak::fixtures

#endif  // GENLEAK_TESTS_FIXTURES_H_
