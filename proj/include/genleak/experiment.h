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

#ifndef GENLEAK_EXPERIMENT_H_
#define GENLEAK_EXPERIMENT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "genleak/attacks.h"
#include "genleak/common.h"
#include "genleak/config.h"
#include "genleak/datasets.h"
#include "genleak/evaluation.h"
#include "genleak/training.h"

GENLEAK_NAMESPACE_BEGIN

inline constexpr const char* kToolVersion = "0.1.0";

enum class DataSource { synthetic, idx, csv };

struct DatasetConfig {
  DataSource source = DataSource::synthetic;
  SyntheticSpec synth;
  std::string path;
  std::string labels_path;
  CsvOptions csv;
  SplitKind split = SplitKind::random_fraction;
  double train_fraction = 0.1;
  std::size_t top_k = 10;
};

struct TargetConfig {
  ModelFamily family = ModelFamily::gan;
  ModelOptions model;
  TrainConfig train;
  std::size_t checkpoint_every = 0;  // steps; 0 writes only the final checkpoint
  bool export_generator = false;     // also write generator.ckpt
};

enum class AttackKind { whitebox, blackbox, discriminative_aux, generative_aux, euclidean, shadow };

std::string_view attack_kind_name(AttackKind k);
AttackKind parse_attack_kind(std::string_view s);

struct AttackSection {
  std::vector<AttackKind> kinds = {AttackKind::whitebox};
  AttackerConfig attacker;
  double aux_train_fraction = 0;
  double aux_test_fraction = 0;
  // Unset: test_only for the discriminative attack, train_and_test for the
  // generative one.
  std::optional<AuxSetting> aux_setting;
  std::size_t delay_steps = 1000;
  std::size_t num_generated = 256;
  std::string checkpoint;  // attack subcommand input; default <out>/target.ckpt
};

struct EvaluationConfig {
  std::vector<double> topk_bins = kDefaultProfileBins;
  std::optional<double> threshold;
  double price_per_1000 = 1.50;
  std::uint64_t free_quota = 1000;
};

// Sections [dataset], [target], [attack], [evaluation] plus root keys seed
// and output_dir. Unknown sections and keys are rejected with their
// position.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir;
  DatasetConfig dataset;
  TargetConfig target;
  AttackSection attack;
  EvaluationConfig evaluation;
  std::string source_text;  // the document the config was read from

  // `seed` replaces the root seed, and with it every seed derived from it.
  static ExperimentConfig parse(std::string_view text,
                                std::optional<std::uint64_t> seed = std::nullopt);
  static ExperimentConfig load(const std::string& path,
                               std::optional<std::uint64_t> seed = std::nullopt);
};

struct PreparedData {
  Dataset data;
  MembershipSplit split;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

struct RunOptions {
  std::string out_dir;
  bool resume = false;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> checkpoints;  // paths relative to the run directory
  std::vector<std::string> csvs;
  std::vector<std::string> svgs;
  std::string summary;
  std::vector<std::pair<std::string, double>> timings;  // stage, seconds

  std::string to_json() const;
};

// Per attack run: the evaluated result and the kind that produced it.
struct AttackRun {
  AttackKind kind;
  AttackResult result;
  OrderingProfile profile;
  std::optional<ThresholdResult> threshold;
  double cost = 0;
};

// Stages. Each writes its artifacts into options.out_dir and, on success,
// manifest.json. A failing stage leaves partial artifacts and failure.json.
RunManifest run_train(const ExperimentConfig& cfg, const RunOptions& options);
RunManifest run_attack(const ExperimentConfig& cfg, const RunOptions& options,
                       std::vector<AttackRun>* runs = nullptr);
RunManifest run_pipeline(const ExperimentConfig& cfg, const RunOptions& options,
                         std::vector<AttackRun>* runs = nullptr);

// Full pipeline for every (axis value, seed) in <out>/<axis>=<value>/seed=<s>,
// then sweep.csv and sweep.svg. The axis is train_fraction or top_k; the
// first configured attack is the one summarized.
RunManifest run_sweep(const ExperimentConfig& cfg, const RunOptions& options,
                      const std::string& axis, const std::vector<double>& values,
                      std::size_t seeds, std::size_t workers, SweepResult* out = nullptr);

// One SVG with a polyline per input CSV (accuracy, or mean_improvement for
// sweep summaries).
RunManifest run_report(const std::vector<std::string>& csv_paths, const RunOptions& options);

// Generator of a checkpoint for black-box use; records which tensors were
// decoded in `access_log` when given.
BlackBoxTarget open_blackbox_target(const std::string& checkpoint_path, std::uint64_t seed,
                                    std::vector<std::string>* access_log = nullptr);

// Parses "name=v1,v2,..." into the axis name and values.
std::pair<std::string, std::vector<double>> parse_axis(std::string_view spec);

// Worker count from GENLEAK_WORKERS, at least 1.
std::size_t worker_count_from_env();

std::string fnv1a_hex(std::string_view text);

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_EXPERIMENT_H_
