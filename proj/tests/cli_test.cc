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

#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "genleak/experiment.h"
#include "genleak/io.h"
#include "json.hpp"

namespace genleak {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Fresh scratch directory per test.
fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "genleak_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

const char* kMinimal = R"(# minimal 2-D GAN with a white-box attack
seed = 11

[dataset]
kind = "ring"
count = 160
train_fraction = 0.2

[target]
family = "gan"
hidden = 16
max_steps = 40

[attack]
kinds = ["whitebox"]
)";

std::string with_extra(const std::string& section, const std::string& lines) {
  std::string text = kMinimal;
  std::string head = "[" + section + "]\n";
  auto at = text.find(head);
  return text.insert(at + head.size(), lines);
}

json manifest_of(const fs::path& dir) {
  return json::parse(read_file((dir / "manifest.json").string()));
}

TEST(Cli, MinimalWhiteboxRunListsItsArtifacts) {
  fs::path dir = scratch("minimal");
  run_pipeline(ExperimentConfig::parse(kMinimal), RunOptions{dir.string()});
  json m = manifest_of(dir);
  EXPECT_EQ(m["artifacts"]["checkpoints"].size(), 1u);
  EXPECT_EQ(m["artifacts"]["csvs"].size(), 2u);
  EXPECT_EQ(m["artifacts"]["svgs"].size(), 1u);
  EXPECT_EQ(m["tool_version"], kToolVersion);
  EXPECT_EQ(m["config_hash"], fnv1a_hex(kMinimal));
  for (const char* group : {"checkpoints", "csvs", "svgs"}) {
    for (const auto& p : m["artifacts"][group]) {
      EXPECT_TRUE(fs::exists(dir / p.get<std::string>())) << p;
    }
  }
  EXPECT_TRUE(fs::exists(dir / m["artifacts"]["summary"].get<std::string>()));
  EXPECT_TRUE(m["timings_seconds"].contains("train"));
  EXPECT_FALSE(fs::exists(dir / "failure.json"));
}

TEST(Cli, SameConfigAndSeedGiveIdenticalMetricsBytes) {
  fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  ExperimentConfig cfg = ExperimentConfig::parse(kMinimal);
  run_train(cfg, RunOptions{a.string()});
  run_train(cfg, RunOptions{b.string()});
  std::string ma = read_file((a / "target_metrics.csv").string());
  EXPECT_EQ(ma, read_file((b / "target_metrics.csv").string()));
  EXPECT_EQ(read_file((a / "target.ckpt").string()), read_file((b / "target.ckpt").string()));
  run_train(ExperimentConfig::parse(kMinimal, 12), RunOptions{c.string()});
  EXPECT_NE(ma, read_file((c / "target_metrics.csv").string()));
}

TEST(Cli, UnknownKeyIsRejectedByName) {
  std::string text = kMinimal;
  text.replace(text.find("max_steps"), 9, "epocs");
  try {
    ExperimentConfig::parse(text);
    FAIL() << "accepted a misspelled key";
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("'epocs'"), std::string::npos) << msg;
    EXPECT_EQ(msg.rfind("12:", 0), 0u) << msg;  // line of the key
  }
  EXPECT_THROW(ExperimentConfig::parse(std::string(kMinimal) + "\n[defense]\nx = 1\n"),
               ConfigError);
}

TEST(Cli, ParseErrorsCarryLineAndColumn) {
  try {
    ExperimentConfig::parse("seed = 1\n[target]\nhidden = = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("3:", 0), 0u) << e.what();
  }
  EXPECT_THROW(ExperimentConfig::parse(with_extra("attack", "kinds = [\"greybox\"]\n")),
               ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[target]\nhidden = 4\n"), ConfigError);  // no length
}

TEST(Cli, RerunWithoutResumeRefusesToOverwrite) {
  fs::path dir = scratch("overwrite");
  ExperimentConfig cfg = ExperimentConfig::parse(kMinimal);
  run_pipeline(cfg, RunOptions{dir.string()});
  std::string before = read_file((dir / "target_metrics.csv").string());
  EXPECT_THROW(run_pipeline(cfg, RunOptions{dir.string()}), Error);
  EXPECT_EQ(before, read_file((dir / "target_metrics.csv").string()));
  // Attacks may add files to a run but not replace existing ones.
  EXPECT_THROW(run_attack(cfg, RunOptions{dir.string()}), Error);
  EXPECT_NO_THROW(run_attack(cfg, RunOptions{dir.string(), true}));
}

TEST(Cli, ResumeContinuesFromTheLastCheckpoint) {
  fs::path full = scratch("resume_full"), part = scratch("resume_part");
  ExperimentConfig cfg =
      ExperimentConfig::parse(with_extra("target", "checkpoint_every = 10\n"));
  run_train(cfg, RunOptions{full.string()});

  // An interrupted run: checkpoint at step 20, metrics written past it.
  PreparedData data = prepare_data(cfg);
  Rng init = Rng::derive(cfg.target.train.seed, "target_model");
  Trainer t(make_model(cfg.target.family, data.data.record_shape, cfg.target.model,
                       cfg.target.train, init),
            data.data.gather(data.split.train), cfg.target.train);
  std::string metrics = metrics_header(cfg.target.family) + "\n";
  t.run(20, [&](const MetricRow& r) { metrics += metrics_line(cfg.target.family, r) + "\n"; });
  fs::create_directories(part);
  save_checkpoint(t.checkpoint(), (part / "target.ckpt").string());
  t.run(25, [&](const MetricRow& r) { metrics += metrics_line(cfg.target.family, r) + "\n"; });
  atomic_write_file((part / "target_metrics.csv").string(), metrics);

  EXPECT_THROW(run_train(cfg, RunOptions{part.string()}), Error);
  run_train(cfg, RunOptions{part.string(), true});
  EXPECT_EQ(read_file((full / "target_metrics.csv").string()),
            read_file((part / "target_metrics.csv").string()));
  EXPECT_EQ(load_checkpoint((full / "target.ckpt").string()).step, 40u);
  EXPECT_EQ(read_file((full / "target.ckpt").string()),
            read_file((part / "target.ckpt").string()));
}

TEST(Cli, BlackboxModeReadsOnlyTheGenerator) {
  fs::path dir = scratch("blackbox");
  ExperimentConfig cfg = ExperimentConfig::parse(kMinimal);
  run_train(cfg, RunOptions{dir.string()});
  std::vector<std::string> log;
  BlackBoxTarget target = open_blackbox_target((dir / "target.ckpt").string(), 1, &log);
  ASSERT_FALSE(log.empty());
  for (const std::string& name : log) EXPECT_EQ(name.rfind("generator/", 0), 0u) << name;
  EXPECT_EQ(target.sample(5).shape()[0], 5u);

  cfg.attack.kinds = {AttackKind::blackbox};
  cfg.attack.attacker.steps = 20;
  cfg.attack.attacker.eval_interval = 10;
  std::vector<AttackRun> runs;
  run_attack(cfg, RunOptions{dir.string()}, &runs);
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_EQ(runs[0].result.curve.size(), 2u);
  EXPECT_EQ(runs[0].result.queries, 20u * 32u);
  EXPECT_TRUE(fs::exists(dir / "attack_blackbox.csv"));
}

TEST(Cli, WhiteboxOnGeneratorOnlyArtifactIsAnError) {
  fs::path dir = scratch("genonly");
  ExperimentConfig cfg =
      ExperimentConfig::parse(with_extra("target", "export_generator = true\n"));
  run_train(cfg, RunOptions{dir.string()});
  EXPECT_EQ(manifest_of(dir)["artifacts"]["checkpoints"].size(), 2u);

  fs::path attack_dir = scratch("genonly_attack");
  cfg.attack.checkpoint = (dir / "generator.ckpt").string();
  EXPECT_THROW(run_attack(cfg, RunOptions{attack_dir.string()}), UnsupportedTarget);
  EXPECT_TRUE(fs::exists(attack_dir / "failure.json"));
  EXPECT_FALSE(fs::exists(attack_dir / "manifest.json"));

  cfg.attack.kinds = {AttackKind::euclidean};
  cfg.attack.num_generated = 16;
  EXPECT_NO_THROW(run_attack(cfg, RunOptions{attack_dir.string()}));
}

TEST(Cli, FailingStageKeepsPartialArtifacts) {
  fs::path dir = scratch("partial");
  // The discriminative attack needs known non-members, and none are given.
  ExperimentConfig cfg = ExperimentConfig::parse(kMinimal);
  cfg.attack.kinds = {AttackKind::whitebox, AttackKind::discriminative_aux};
  EXPECT_THROW(run_pipeline(cfg, RunOptions{dir.string()}), InvalidArgument);
  EXPECT_TRUE(fs::exists(dir / "target.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "attack_whitebox.csv"));
  EXPECT_FALSE(fs::exists(dir / "manifest.json"));
  json f = json::parse(read_file((dir / "failure.json").string()));
  EXPECT_EQ(f["stage"], "attack_discriminative_aux");
  EXPECT_FALSE(f["error"].get<std::string>().empty());
}

TEST(Cli, SweepRunsEveryValueAndSeed) {
  fs::path dir = scratch("sweep");
  auto [axis, values] = parse_axis("train_fraction=0.1,0.5,0.9");
  SweepResult result;
  run_sweep(ExperimentConfig::parse(kMinimal), RunOptions{dir.string()}, axis, values, 3, 2,
            &result);
  int runs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().filename() == "manifest.json" && e.path().parent_path() != dir) ++runs;
  }
  EXPECT_EQ(runs, 9);
  ASSERT_EQ(result.points.size(), 3u);
  for (const SweepPoint& p : result.points) EXPECT_EQ(p.accuracies.size(), 3u);
  std::string csv = read_file((dir / "sweep.csv").string());
  EXPECT_EQ(csv, sweep_csv(result));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_TRUE(fs::exists(dir / "train_fraction=0.5" / "seed=13" / "attack_whitebox.csv"));
  EXPECT_THROW(parse_axis("train_fraction"), ConfigError);
  EXPECT_THROW(parse_axis("top_k=1,x"), ConfigError);
  EXPECT_THROW(run_sweep(ExperimentConfig::parse(kMinimal), RunOptions{scratch("sweep2").string()},
                         "hidden", values, 3, 1),
               ConfigError);
}

TEST(Cli, ReportDrawsOnePolylinePerCsv) {
  fs::path dir = scratch("report");
  fs::create_directories(dir);
  std::vector<std::string> csvs;
  for (int i = 0; i < 3; ++i) {
    std::string p = (dir / ("attack_" + std::to_string(i) + ".csv")).string();
    atomic_write_file(p, "step,accuracy,improvement_over_random\n0,0.1,0\n500,0.3,0.2\n");
    csvs.push_back(p);
  }
  fs::path out = dir / "out";
  run_report(csvs, RunOptions{out.string()});
  std::string svg = read_file((out / "report.svg").string());
  std::size_t lines = 0;
  for (auto at = svg.find("<polyline"); at != std::string::npos; at = svg.find("<polyline", at + 1)) {
    ++lines;
  }
  EXPECT_EQ(lines, 3u);
  EXPECT_EQ(manifest_of(out)["artifacts"]["svgs"].size(), 1u);
  EXPECT_THROW(run_report({}, RunOptions{out.string()}), ConfigError);
}

TEST(Cli, WorkerCountComesFromTheEnvironment) {
  ::unsetenv("GENLEAK_WORKERS");
  EXPECT_EQ(worker_count_from_env(), 1u);
  ::setenv("GENLEAK_WORKERS", "3", 1);
  EXPECT_EQ(worker_count_from_env(), 3u);
  ::setenv("GENLEAK_WORKERS", "0", 1);
  EXPECT_THROW(worker_count_from_env(), ConfigError);
  ::unsetenv("GENLEAK_WORKERS");
}

TEST(Cli, ExitCodeIsZeroExactlyWhenAManifestIsWritten) {
  fs::path dir = scratch("exit");
  fs::create_directories(dir);
  atomic_write_file((dir / "ok.cfg").string(), kMinimal);
  std::string bad = kMinimal;
  bad.replace(bad.find("max_steps"), 9, "epocs");
  atomic_write_file((dir / "bad.cfg").string(), bad);
  std::string exe = GENLEAK_CLI;
  auto sh = [&](const std::string& args) {
    return std::system((exe + " " + args + " > /dev/null 2>&1").c_str());
  };
  EXPECT_EQ(sh("run --config " + (dir / "ok.cfg").string() + " --out " + (dir / "a").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "a" / "manifest.json"));
  EXPECT_NE(sh("run --config " + (dir / "bad.cfg").string() + " --out " + (dir / "b").string()), 0);
  EXPECT_FALSE(fs::exists(dir / "b" / "manifest.json"));
  EXPECT_NE(sh("run --config " + (dir / "ok.cfg").string() + " --out " + (dir / "a").string()), 0);
  EXPECT_EQ(sh("attack --config " + (dir / "ok.cfg").string() + " --mode euclidean --out " +
               (dir / "a").string()),
            0);
  EXPECT_NE(sh("frobnicate"), 0);
}

}  // namespace
}  // namespace genleak
