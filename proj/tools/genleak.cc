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

// genleak: train target models, run membership attacks against them and
// chart the results.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "genleak/experiment.h"

namespace {

using namespace genleak;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config file");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "replaces the seed in the config");
  cmd->add_flag("--resume", c.resume, "continue a run in a non-empty output directory");
  cmd->add_option("--out", c.out, "run directory (default: output_dir from the config)");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = ExperimentConfig::load(c.config, c.seed);
  return cfg;
}

RunOptions options(const Common& c, const ExperimentConfig& cfg) {
  return RunOptions{c.out.empty() ? cfg.output_dir : c.out, c.resume};
}

void print_runs(const std::vector<AttackRun>& runs) {
  for (const AttackRun& r : runs) {
    std::printf("%-18s accuracy %.4f  random %.4f  improvement %+.4f  queries %llu  cost $%.2f\n",
                std::string(attack_kind_name(r.kind)).c_str(), r.result.accuracy,
                r.result.random_baseline, r.result.improvement,
                static_cast<unsigned long long>(r.result.queries), r.cost);
  }
}

void print_manifest(const RunOptions& o) { std::printf("manifest: %s/manifest.json\n", o.out_dir.c_str()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Membership inference against generative models"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Common train_o, attack_o, run_o, sweep_o, report_o;

  auto* train = app.add_subcommand("train", "train the target model");
  add_common(train, train_o);

  auto* attack = app.add_subcommand("attack", "attack a trained target");
  add_common(attack, attack_o);
  std::vector<std::string> modes;
  std::string checkpoint;
  attack->add_option("--mode", modes, "attack kinds, replacing [attack] kinds")->delimiter(',');
  attack->add_option("--checkpoint", checkpoint, "target checkpoint (default <out>/target.ckpt)");

  auto* run = app.add_subcommand("run", "train, then attack");
  add_common(run, run_o);

  auto* sweep = app.add_subcommand("sweep", "full pipeline over an axis and several seeds");
  add_common(sweep, sweep_o);
  std::string axis;
  std::size_t seeds = 3;
  sweep->add_option("--axis", axis, "name=v1,v2,... with name train_fraction or top_k")->required();
  sweep->add_option("--seeds", seeds, "seeds per axis value, starting at the config seed");

  auto* report = app.add_subcommand("report", "chart result or sweep CSVs");
  add_common(report, report_o, false);
  std::vector<std::string> csvs;
  report->add_option("csv", csvs, "CSV files")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ExperimentConfig cfg = load(train_o);
      RunOptions o = options(train_o, cfg);
      run_train(cfg, o);
      print_manifest(o);
    } else if (*attack) {
      ExperimentConfig cfg = load(attack_o);
      if (!modes.empty()) {
        cfg.attack.kinds.clear();
        for (const std::string& m : modes) cfg.attack.kinds.push_back(parse_attack_kind(m));
      }
      if (!checkpoint.empty()) cfg.attack.checkpoint = checkpoint;
      RunOptions o = options(attack_o, cfg);
      std::vector<AttackRun> runs;
      run_attack(cfg, o, &runs);
      print_runs(runs);
      print_manifest(o);
    } else if (*run) {
      ExperimentConfig cfg = load(run_o);
      RunOptions o = options(run_o, cfg);
      std::vector<AttackRun> runs;
      run_pipeline(cfg, o, &runs);
      print_runs(runs);
      print_manifest(o);
    } else if (*sweep) {
      ExperimentConfig cfg = load(sweep_o);
      RunOptions o = options(sweep_o, cfg);
      auto [name, values] = parse_axis(axis);
      SweepResult result;
      run_sweep(cfg, o, name, values, seeds, worker_count_from_env(), &result);
      std::cout << sweep_csv(result);
      print_manifest(o);
    } else if (*report) {
      if (report_o.out.empty()) throw ConfigError("report needs --out");
      RunOptions o{report_o.out, true};
      run_report(csvs, o);
      print_manifest(o);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "genleak: config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "genleak: %s\n", e.what());
    return 1;
  }
  return 0;
}
