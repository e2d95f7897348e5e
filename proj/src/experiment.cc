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

#include "genleak/experiment.h"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "json.hpp"

#include "genleak/io.h"

GENLEAK_NAMESPACE_BEGIN

using internal::str_cat;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::whitebox: return "whitebox";
    case AttackKind::blackbox: return "blackbox";
    case AttackKind::discriminative_aux: return "discriminative_aux";
    case AttackKind::generative_aux: return "generative_aux";
    case AttackKind::euclidean: return "euclidean";
    case AttackKind::shadow: return "shadow";
  }
  return "?";
}

AttackKind parse_attack_kind(std::string_view s) {
  for (AttackKind k : {AttackKind::whitebox, AttackKind::blackbox, AttackKind::discriminative_aux,
                       AttackKind::generative_aux, AttackKind::euclidean, AttackKind::shadow}) {
    if (attack_kind_name(k) == s) return k;
  }
  throw ConfigError(str_cat("unknown attack kind '", s,
                            "' (expected whitebox, blackbox, discriminative_aux, "
                            "generative_aux, euclidean or shadow)"));
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

// --- config ------------------------------------------------------------------

namespace {

std::string where(const ConfigSection& s, const std::string& key) {
  SourcePos p = s.at(key).pos();
  return str_cat(p.line, ":", p.column, ": ");
}

std::size_t get_count(const ConfigSection& s, const std::string& key, std::size_t fallback) {
  std::int64_t v = s.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError(str_cat(where(s, key), key, " must be >= 0"));
  return static_cast<std::size_t>(v);
}

void read_preset(const ConfigSection& s, const std::string& prefix, PresetOptions& o) {
  o.hidden = get_count(s, prefix + "hidden", o.hidden);
  o.depth = get_count(s, prefix + "depth", o.depth);
  o.latent_dim = get_count(s, prefix + "latent_dim", o.latent_dim);
  o.channels = get_count(s, prefix + "channels", o.channels);
  o.init_stddev = s.get_double(prefix + "init_stddev", o.init_stddev);
  o.batchnorm = s.get_bool(prefix + "batchnorm", o.batchnorm);
  o.alpha = s.get_double(prefix + "alpha", o.alpha);
}

ModelOptions read_model_options(const ConfigSection& s, const std::string& prefix) {
  ModelOptions m;
  m.preset = s.get_string(prefix + "preset", m.preset);
  read_preset(s, prefix, m.g);
  m.d = m.g;
  // Role-specific overrides.
  read_preset(s, prefix + "g_", m.g);
  read_preset(s, prefix + "d_", m.d);
  return m;
}

DataSource parse_source(std::string_view s) {
  if (s == "idx") return DataSource::idx;
  if (s == "csv") return DataSource::csv;
  return DataSource::synthetic;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::string_view text,
                                         std::optional<std::uint64_t> seed) {
  ConfigDocument doc = parse_config(text);
  ExperimentConfig c;
  c.source_text = std::string(text);
  const ConfigSection& root = doc.root();
  c.seed = static_cast<std::uint64_t>(root.get_int("seed", 0));
  if (seed) c.seed = *seed;
  c.output_dir = root.get_string("output_dir", "");

  ConfigSection empty;
  auto section = [&](const char* name) -> const ConfigSection& {
    const ConfigSection* s = doc.find_section(name);
    return s ? *s : empty;
  };

  const ConfigSection& ds = section("dataset");
  DatasetConfig& d = c.dataset;
  std::string kind = ds.get_string("kind", "ring");
  d.source = parse_source(kind);
  if (d.source == DataSource::synthetic) d.synth.kind = parse_synth_kind(kind);
  SyntheticSpec& sy = d.synth;
  sy.count = get_count(ds, "count", 320);
  sy.seed = static_cast<std::uint64_t>(ds.get_int("data_seed", static_cast<std::int64_t>(c.seed)));
  sy.components = get_count(ds, "components", sy.components);
  sy.dims = get_count(ds, "dims", sy.dims);
  sy.spread = ds.get_double("spread", sy.spread);
  sy.component_sigma = ds.get_double("component_sigma", sy.component_sigma);
  sy.modes = get_count(ds, "modes", sy.modes);
  sy.radius = ds.get_double("radius", sy.radius);
  sy.noise_sigma = ds.get_double("noise_sigma", sy.noise_sigma);
  sy.grid = get_count(ds, "grid", sy.grid);
  sy.classes = get_count(ds, "classes", sy.classes);
  sy.class_skew = ds.get_double("class_skew", sy.class_skew);
  sy.pixel_noise = ds.get_double("pixel_noise", sy.pixel_noise);
  d.path = ds.get_string("path", "");
  d.labels_path = ds.get_string("labels_path", "");
  d.csv.label_column = ds.get_bool("label_column", false);
  d.csv.range_lo = ds.get_double("range_lo", -1.0);
  d.csv.range_hi = ds.get_double("range_hi", 1.0);
  std::string split = ds.get_string("split", "random_fraction");
  if (split == "random_fraction") {
    d.split = SplitKind::random_fraction;
  } else if (split == "top_classes") {
    d.split = SplitKind::top_classes;
  } else {
    throw ConfigError(str_cat(where(ds, "split"), "unknown split '", split,
                              "' (expected random_fraction or top_classes)"));
  }
  d.train_fraction = ds.get_double("train_fraction", d.train_fraction);
  d.top_k = get_count(ds, "top_k", d.top_k);

  const ConfigSection& ts = section("target");
  TargetConfig& t = c.target;
  t.family = parse_family(ts.get_string("family", "gan"));
  t.model = read_model_options(ts, "");
  bool explicit_seed = ts.has("train_seed");
  t.train = read_train_config(ts);
  if (!explicit_seed) t.train.seed = c.seed;
  t.checkpoint_every = get_count(ts, "checkpoint_every", 0);
  t.export_generator = ts.get_bool("export_generator", false);

  const ConfigSection& as = section("attack");
  AttackSection& a = c.attack;
  if (as.has("kinds")) {
    a.kinds.clear();
    std::vector<std::string> names = as.at("kinds").is_string()
                                         ? std::vector<std::string>{as.get_string("kinds", "")}
                                         : as.get_strings("kinds", {});
    for (const std::string& k : names) a.kinds.push_back(parse_attack_kind(k));
    if (a.kinds.empty()) throw ConfigError(str_cat(where(as, "kinds"), "kinds is empty"));
  }
  a.attacker.model = read_model_options(as, "attacker_");
  a.attacker.train.batch_size = get_count(as, "attacker_batch_size", 32);
  double alr = as.get_double("attacker_lr", 2e-4);
  a.attacker.train.g_optimizer.learning_rate = alr;
  a.attacker.train.d_optimizer.learning_rate = alr;
  a.attacker.steps = get_count(as, "steps", 0);
  a.attacker.seed = static_cast<std::uint64_t>(as.get_int("attack_seed", static_cast<std::int64_t>(c.seed)));
  a.attacker.train.seed = a.attacker.seed;
  a.aux_train_fraction = as.get_double("aux_train_fraction", 0);
  a.aux_test_fraction = as.get_double("aux_test_fraction", 0);
  if (as.has("aux_setting")) a.aux_setting = parse_aux_setting(as.get_string("aux_setting", ""));
  a.delay_steps = get_count(as, "delay_steps", a.delay_steps);
  a.num_generated = get_count(as, "num_generated", a.num_generated);
  a.checkpoint = as.get_string("checkpoint", "");

  const ConfigSection& es = section("evaluation");
  EvaluationConfig& ev = c.evaluation;
  ev.topk_bins = es.get_doubles("topk_bins", ev.topk_bins);
  a.attacker.eval_interval = get_count(es, "eval_interval", 500);
  if (es.has("threshold")) ev.threshold = es.get_double("threshold", 0);
  ev.price_per_1000 = es.get_double("price_per_1000", ev.price_per_1000);
  ev.free_quota = get_count(es, "free_quota", ev.free_quota);

  // Misspelled keys are reported before any check that they may have caused.
  doc.reject_unknown({"", "dataset", "target", "attack", "evaluation"});
  if (d.source != DataSource::synthetic && d.path.empty()) {
    throw ConfigError(str_cat("[dataset]: kind '", kind, "' needs a path"));
  }
  if (t.train.epochs == 0 && t.train.max_steps == 0) {
    throw ConfigError("[target]: set epochs or max_steps");
  }
  try {
    a.attacker.train.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(str_cat("[attack]: ", e.what()));
  }
  if (a.attacker.eval_interval == 0) throw ConfigError("[evaluation]: eval_interval must be positive");
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        std::optional<std::uint64_t> seed) {
  std::string text = read_file(path);
  try {
    return parse(text, seed);
  } catch (const ConfigError& e) {
    throw ConfigError(str_cat(path, ":", e.what()));
  }
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  const DatasetConfig& d = cfg.dataset;
  PreparedData p;
  switch (d.source) {
    case DataSource::synthetic: p.data = synth_generate(d.synth); break;
    case DataSource::idx: p.data = load_idx(d.path, d.labels_path); break;
    case DataSource::csv: p.data = load_csv(d.path, d.csv); break;
  }
  p.split = d.split == SplitKind::random_fraction
                ? split_random_fraction(p.data, d.train_fraction, cfg.seed)
                : split_top_classes(p.data, d.top_k);
  return p;
}

// --- manifest ----------------------------------------------------------------

std::string RunManifest::to_json() const {
  json j;
  j["tool"] = "genleak";
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["artifacts"]["checkpoints"] = checkpoints;
  j["artifacts"]["csvs"] = csvs;
  j["artifacts"]["svgs"] = svgs;
  j["artifacts"]["summary"] = summary;
  json t = json::object();
  for (const auto& [stage, secs] : timings) t[stage] = secs;
  j["timings_seconds"] = t;
  return j.dump(2) + "\n";
}

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Owns the run directory: artifact bookkeeping, the failure record and the
// final manifest. Directories are append-only: without resume, a fresh run
// needs an empty directory and an extending one (attack, report) may add
// files but not replace any it found.
class RunDir {
 public:
  enum class Entry { fresh, extend };

  RunDir(const std::string& out, Entry entry, bool resume, std::string command,
         const std::string& cfg_text, std::uint64_t seed)
      : dir_(out), resume_(resume) {
    if (out.empty()) throw ConfigError("no output directory: pass --out or set output_dir");
    if (fs::exists(dir_) && !fs::is_directory(dir_)) {
      throw Error(str_cat(out, " exists and is not a directory"));
    }
    if (entry == Entry::fresh && !resume && fs::exists(dir_) && !fs::is_empty(dir_)) {
      throw Error(str_cat("output directory ", out,
                          " already holds a run; pass --resume to continue it"));
    }
    fs::create_directories(dir_);
    fs::remove(dir_ / "failure.json");
    for (const auto& e : fs::directory_iterator(dir_)) {
      preexisting_.push_back(e.path().filename().string());
    }
    m_.command = std::move(command);
    m_.config_hash = fnv1a_hex(cfg_text);
    m_.seed = seed;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, std::string_view contents) {
    bool index = name == "manifest.json" || name == "failure.json" || name == "summary.json" ||
                 name == "accuracy.svg";
    if (!resume_ && !index &&
        std::find(preexisting_.begin(), preexisting_.end(), name) != preexisting_.end()) {
      throw Error(str_cat(path(name), " already exists; pass --resume to replace it"));
    }
    atomic_write_file(path(name), contents);
  }
  RunManifest& manifest() { return m_; }

  // Runs one stage, timing it and writing failure.json when it throws.
  template <typename F>
  void stage(const std::string& name, F&& f) {
    Stopwatch sw;
    try {
      f();
    } catch (const std::exception& e) {
      json j;
      j["stage"] = name;
      j["error"] = e.what();
      write("failure.json", j.dump(2) + "\n");
      throw;
    }
    m_.timings.emplace_back(name, sw.seconds());
  }

  void finish() {
    for (const auto* list : {&m_.checkpoints, &m_.csvs, &m_.svgs}) {
      for (const std::string& p : *list) {
        if (!fs::exists(dir_ / p)) throw Error(str_cat("artifact ", p, " is missing"));
      }
    }
    write("manifest.json", m_.to_json());
  }

 private:
  fs::path dir_;
  bool resume_;
  std::vector<std::string> preexisting_;
  RunManifest m_;
};

void add_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

// Metrics rows already on disk up to and including `step`.
std::string metrics_prefix(const std::string& path, ModelFamily family, std::uint64_t step) {
  std::string out = metrics_header(family) + "\n";
  if (!fs::exists(path)) return out;
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::uint64_t s = std::stoull(line.substr(0, line.find(',')));
    if (s <= step) out += line + "\n";
  }
  return out;
}

void train_stage(const ExperimentConfig& cfg, RunDir& run, const PreparedData& data,
                 bool resume) {
  const TargetConfig& t = cfg.target;
  std::string ckpt_path = run.path("target.ckpt");
  std::string metrics_path = run.path("target_metrics.csv");
  Tensor members = data.data.gather(data.split.train);

  std::optional<Trainer> trainer;
  std::string metrics;
  if (resume && fs::exists(ckpt_path)) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    metrics = metrics_prefix(metrics_path, ck.model.family, ck.step);
    trainer.emplace(Trainer::resume(std::move(ck), members));
  } else {
    Rng init = Rng::derive(t.train.seed, "target_model");
    trainer.emplace(make_model(t.family, data.data.record_shape, t.model, t.train, init),
                    members, t.train);
    metrics = metrics_header(t.family) + "\n";
  }
  trainer->set_last_checkpoint(fs::exists(ckpt_path) ? ckpt_path : "");

  auto save = [&] {
    Checkpoint ck = trainer->checkpoint();
    ck.metrics_path = "target_metrics.csv";
    run.write("target_metrics.csv", metrics);
    save_checkpoint(ck, ckpt_path);
    trainer->set_last_checkpoint(ckpt_path);
  };
  auto sink = [&](const MetricRow& row) { metrics += metrics_line(t.family, row) + "\n"; };
  try {
    while (!trainer->finished()) {
      std::size_t until = t.checkpoint_every
                              ? trainer->steps_done() + t.checkpoint_every
                              : trainer->total_steps();
      trainer->run(until, sink);
      if (!trainer->finished()) save();
    }
  } catch (const DivergenceError&) {
    run.write("target_metrics.csv", metrics);
    throw;
  }
  save();
  if (t.export_generator) {
    save_generator(trainer->model().generator, run.path("generator.ckpt"));
    add_unique(run.manifest().checkpoints, "generator.ckpt");
  }
  add_unique(run.manifest().checkpoints, "target.ckpt");
  add_unique(run.manifest().csvs, "target_metrics.csv");
}

AuxKnowledge aux_for(const ExperimentConfig& cfg, const MembershipSplit& split) {
  return sample_aux_knowledge(split, cfg.attack.aux_train_fraction, cfg.attack.aux_test_fraction,
                              cfg.attack.attacker.seed);
}

AttackRun run_one_attack(const ExperimentConfig& cfg, AttackKind kind,
                         const std::string& ckpt_path, const PreparedData& data) {
  const AttackSection& a = cfg.attack;
  const Tensor& x = data.data.records;
  std::size_t n = data.split.n();
  AttackRun run;
  run.kind = kind;
  std::vector<std::pair<std::uint64_t, double>> curve;
  RankingObserver obs = curve_recorder(data.split, curve);
  AttackOutput out;
  if (kind == AttackKind::whitebox) {
    out = whitebox_attack(WhiteBoxTarget::from_checkpoint(ckpt_path), x, n);
  } else {
    BlackBoxTarget target = open_blackbox_target(ckpt_path, a.attacker.seed);
    switch (kind) {
      case AttackKind::blackbox:
        out = blackbox_attack(target, x, n, a.attacker, obs);
        break;
      case AttackKind::discriminative_aux:
        out = discriminative_aux_attack(target, x, n, aux_for(cfg, data.split),
                                        a.aux_setting.value_or(AuxSetting::test_only),
                                        a.attacker, obs);
        break;
      case AttackKind::generative_aux:
        out = generative_aux_attack(target, x, n, aux_for(cfg, data.split),
                                    a.aux_setting.value_or(AuxSetting::train_and_test),
                                    a.attacker, a.delay_steps, obs);
        break;
      case AttackKind::euclidean:
        out = euclidean_attack(target, x, n, a.num_generated);
        break;
      case AttackKind::shadow:
        out = shadow_attack(target, x, n, aux_for(cfg, data.split), a.attacker, obs);
        break;
      case AttackKind::whitebox: break;
    }
  }
  run.result = evaluate(out.ranking, data.split);
  run.result.queries = out.queries;
  run.result.seed = cfg.seed;
  run.result.fingerprint = fnv1a_hex(cfg.source_text);
  run.result.curve = std::move(curve);
  if (run.result.curve.empty() || run.result.curve.back().first != out.steps) {
    run.result.curve.emplace_back(out.steps, run.result.accuracy);
  }
  run.profile = topk_profile(out.ranking, data.split, cfg.evaluation.topk_bins);
  if (cfg.evaluation.threshold) {
    run.threshold = threshold_evaluate(out.ranking, data.split, *cfg.evaluation.threshold);
  }
  run.cost = query_cost_estimate(out.queries, cfg.evaluation.price_per_1000,
                                 cfg.evaluation.free_quota);
  return run;
}

void attack_stage(const ExperimentConfig& cfg, RunDir& run, const PreparedData& data,
                  const std::string& ckpt_path, std::vector<AttackRun>& runs) {
  for (AttackKind kind : cfg.attack.kinds) {
    std::string name(attack_kind_name(kind));
    run.stage(str_cat("attack_", name), [&] {
      AttackRun r = run_one_attack(cfg, kind, ckpt_path, data);
      std::string csv = str_cat("attack_", name, ".csv");
      run.write(csv, results_csv(r.result));
      runs.push_back(std::move(r));
    });
  }
  // The chart and summary cover every attack run in the directory, including
  // those from earlier attack invocations.
  std::vector<std::string> csvs;
  for (const auto& e : fs::directory_iterator(run.path("."))) {
    std::string f = e.path().filename().string();
    if (f.starts_with("attack_") && f.ends_with(".csv")) csvs.push_back(f);
  }
  std::sort(csvs.begin(), csvs.end());
  std::vector<ChartSeries> series;
  double last = 1.0;
  for (const std::string& f : csvs) {
    add_unique(run.manifest().csvs, f);
    for (ChartSeries& c : csv_series(read_file(run.path(f)))) {
      if (c.name != "accuracy") continue;
      c.name = f.substr(7, f.size() - 11);
      for (auto [x, y] : c.points) last = std::max(last, x);
      series.push_back(std::move(c));
    }
  }
  if (data.split.n() && data.split.m()) {
    double baseline = random_baseline(data.split.n(), data.split.m());
    series.push_back(ChartSeries{"random guess", {{0.0, baseline}, {last, baseline}}});
  }
  run.write("accuracy.svg", line_chart_svg("Attack accuracy", "attacker step", "accuracy", series));
  add_unique(run.manifest().svgs, "accuracy.svg");

  json s;
  s["seed"] = cfg.seed;
  s["n"] = data.split.n();
  s["m"] = data.split.m();
  s["random_baseline"] = data.split.n() && data.split.m()
                             ? random_baseline(data.split.n(), data.split.m())
                             : 0.0;
  json attacks = json::object();
  if (fs::exists(run.path("summary.json"))) {
    json prev = json::parse(read_file(run.path("summary.json")), nullptr, false);
    if (prev.is_object() && prev.contains("attacks")) attacks = prev["attacks"];
  }
  for (const AttackRun& r : runs) {
    json a;
    a["accuracy"] = r.result.accuracy;
    a["improvement"] = r.result.improvement;
    a["queries"] = r.result.queries;
    a["cost_estimate"] = r.cost;
    json bins = json::array();
    for (const ProfileBin& b : r.profile.bins) {
      bins.push_back({{"k", b.k}, {"count", b.count}, {"member_fraction", b.fraction}});
    }
    a["profile"] = bins;
    if (r.threshold) {
      a["threshold"] = {{"threshold", r.threshold->threshold},
                        {"predicted", r.threshold->predicted},
                        {"precision", r.threshold->precision},
                        {"recall", r.threshold->recall}};
    }
    attacks[std::string(attack_kind_name(r.kind))] = a;
  }
  s["attacks"] = attacks;
  if (cfg.target.train.defense == Defense::dp) {
    DPConfig dp = cfg.target.train.dp;
    dp.sampling_rate = std::min(1.0, static_cast<double>(cfg.target.train.batch_size) /
                                         static_cast<double>(data.split.n()));
    auto eps = epsilon_account(dp, cfg.target.train.total_steps(data.split.n()));
    s["dp_epsilon"] = eps ? json(*eps) : json(nullptr);
  }
  run.write("summary.json", s.dump(2) + "\n");
  run.manifest().summary = "summary.json";
}

std::string command_name(const char* c) { return c; }

}  // namespace

BlackBoxTarget open_blackbox_target(const std::string& path, std::uint64_t seed,
                                    std::vector<std::string>* access_log) {
  CheckpointReader reader(path);
  Network g = reader.read_network("generator");
  if (access_log) *access_log = reader.access_log();
  return BlackBoxTarget::from_generator(std::move(g), seed);
}

RunManifest run_train(const ExperimentConfig& cfg, const RunOptions& o) {
  RunDir run(o.out_dir, RunDir::Entry::fresh, o.resume, command_name("train"), cfg.source_text, cfg.seed);
  PreparedData data;
  run.stage("data", [&] { data = prepare_data(cfg); });
  run.stage("train", [&] { train_stage(cfg, run, data, o.resume); });
  run.finish();
  return run.manifest();
}

RunManifest run_attack(const ExperimentConfig& cfg, const RunOptions& o,
                       std::vector<AttackRun>* runs) {
  // Attacks consume an existing run directory.
  RunDir run(o.out_dir, RunDir::Entry::extend, o.resume, command_name("attack"), cfg.source_text, cfg.seed);
  std::string ckpt = cfg.attack.checkpoint.empty() ? run.path("target.ckpt") : cfg.attack.checkpoint;
  if (!fs::exists(ckpt)) throw Error(str_cat("checkpoint ", ckpt, " not found; run train first"));
  PreparedData data;
  run.stage("data", [&] { data = prepare_data(cfg); });
  std::vector<AttackRun> local;
  attack_stage(cfg, run, data, ckpt, runs ? *runs : local);
  if (fs::exists(run.path("target.ckpt"))) add_unique(run.manifest().checkpoints, "target.ckpt");
  if (fs::exists(run.path("target_metrics.csv"))) add_unique(run.manifest().csvs, "target_metrics.csv");
  run.finish();
  return run.manifest();
}

RunManifest run_pipeline(const ExperimentConfig& cfg, const RunOptions& o,
                         std::vector<AttackRun>* runs) {
  RunDir run(o.out_dir, RunDir::Entry::fresh, o.resume, command_name("run"), cfg.source_text, cfg.seed);
  PreparedData data;
  run.stage("data", [&] { data = prepare_data(cfg); });
  run.stage("train", [&] { train_stage(cfg, run, data, o.resume); });
  std::vector<AttackRun> local;
  attack_stage(cfg, run, data, run.path("target.ckpt"), runs ? *runs : local);
  run.finish();
  return run.manifest();
}

std::pair<std::string, std::vector<double>> parse_axis(std::string_view spec) {
  auto eq = spec.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(str_cat("axis '", spec, "' must look like name=v1,v2,..."));
  }
  std::string name(spec.substr(0, eq));
  std::vector<double> values;
  std::stringstream ss{std::string(spec.substr(eq + 1))};
  for (std::string item; std::getline(ss, item, ',');) {
    char* end = nullptr;
    double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size()) {
      throw ConfigError(str_cat("axis value '", item, "' is not a number"));
    }
    values.push_back(v);
  }
  return {name, values};
}

std::size_t worker_count_from_env() {
  const char* v = std::getenv("GENLEAK_WORKERS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (*end || n < 1) throw ConfigError(str_cat("GENLEAK_WORKERS='", v, "' is not a positive integer"));
  return static_cast<std::size_t>(n);
}

RunManifest run_sweep(const ExperimentConfig& cfg, const RunOptions& o, const std::string& axis,
                      const std::vector<double>& values, std::size_t seed_count,
                      std::size_t workers, SweepResult* out) {
  if (axis != "train_fraction" && axis != "top_k") {
    throw ConfigError(str_cat("unknown sweep axis '", axis, "' (expected train_fraction or top_k)"));
  }
  RunDir run(o.out_dir, RunDir::Entry::fresh, o.resume, command_name("sweep"), cfg.source_text, cfg.seed);
  std::vector<std::uint64_t> seeds(seed_count);
  for (std::size_t i = 0; i < seed_count; ++i) seeds[i] = cfg.seed + i;
  SweepResult sweep;
  run.stage("sweep", [&] {
    sweep = size_sweep(axis, values, seeds, [&](double v, std::uint64_t seed) {
      ExperimentConfig c = cfg;
      c.seed = seed;
      c.dataset.synth.seed = seed;
      c.target.train.seed = seed;
      c.attack.attacker.seed = seed;
      c.attack.attacker.train.seed = seed;
      if (axis == "train_fraction") {
        c.dataset.train_fraction = v;
      } else {
        c.dataset.top_k = static_cast<std::size_t>(v);
      }
      std::string sub = str_cat(axis, "=", format_number(v), "/seed=", seed);
      RunOptions ro{run.path(sub), o.resume};
      if (o.resume && fs::exists(fs::path(ro.out_dir) / "manifest.json")) {
        // Finished earlier: rerun the attacks only, which are deterministic.
        std::vector<AttackRun> runs;
        run_attack(c, ro, &runs);
        return runs.front().result;
      }
      std::vector<AttackRun> runs;
      run_pipeline(c, ro, &runs);
      return runs.front().result;
    }, workers);
  });
  run.write("sweep.csv", sweep_csv(sweep));
  run.manifest().csvs.push_back("sweep.csv");
  std::vector<ChartSeries> series(1);
  series[0].name = "mean improvement";
  for (const SweepPoint& p : sweep.points) series[0].points.emplace_back(p.value, p.mean_improvement);
  ChartSeries lo{"min", {}}, hi{"max", {}};
  for (const SweepPoint& p : sweep.points) {
    lo.points.emplace_back(p.value, p.min_improvement);
    hi.points.emplace_back(p.value, p.max_improvement);
  }
  series.push_back(lo);
  series.push_back(hi);
  run.write("sweep.svg", line_chart_svg("Improvement over random guessing", axis,
                                        "accuracy - baseline", series));
  run.manifest().svgs.push_back("sweep.svg");
  run.finish();
  if (out) *out = sweep;
  return run.manifest();
}

RunManifest run_report(const std::vector<std::string>& csv_paths, const RunOptions& o) {
  if (csv_paths.empty()) throw ConfigError("report needs at least one CSV file");
  RunDir run(o.out_dir, RunDir::Entry::extend, o.resume, command_name("report"), "", 0);
  std::vector<ChartSeries> series;
  bool sweep = false;
  run.stage("report", [&] {
    for (const std::string& p : csv_paths) {
      std::string name = fs::path(p).stem().string();
      std::vector<ChartSeries> cols = csv_series(read_file(p));
      const char* wanted[] = {"accuracy", "mean_improvement"};
      bool found = false;
      for (const char* w : wanted) {
        for (ChartSeries& c : cols) {
          if (c.name == w && !found) {
            sweep = sweep || std::string(w) == "mean_improvement";
            c.name = name;
            series.push_back(std::move(c));
            found = true;
          }
        }
      }
      if (!found) throw FormatError(str_cat(p, ": no accuracy or mean_improvement column"));
    }
  });
  run.write("report.svg", line_chart_svg(sweep ? "Improvement over random guessing" : "Attack accuracy",
                                         sweep ? "axis value" : "attacker step",
                                         sweep ? "accuracy - baseline" : "accuracy", series));
  run.manifest().svgs.push_back("report.svg");
  run.finish();
  return run.manifest();
}

GENLEAK_NAMESPACE_END
