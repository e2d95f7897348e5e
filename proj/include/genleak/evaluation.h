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

#ifndef GENLEAK_EVALUATION_H_
#define GENLEAK_EVALUATION_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genleak/attacks.h"
#include "genleak/common.h"
#include "genleak/datasets.h"

GENLEAK_NAMESPACE_BEGIN

// Fraction of predicted indices that are training-set members. The
// prediction must hold exactly truth.n() indices.
double accuracy(std::span<const std::size_t> predicted, const MembershipSplit& truth);

// n / (n + m): the expected accuracy of a uniformly random prediction.
double random_baseline(std::size_t n, std::size_t m);

struct AttackResult {
  Ranking ranking;
  double accuracy = 0;
  double random_baseline = 0;
  double improvement = 0;  // accuracy - random_baseline
  std::vector<std::pair<std::uint64_t, double>> curve;  // (attacker step, accuracy)
  std::uint64_t queries = 0;
  std::uint64_t seed = 0;
  std::string fingerprint;
};

AttackResult evaluate(const Ranking& ranking, const MembershipSplit& truth);

// Observer that appends (step, accuracy) to `curve`.
RankingObserver curve_recorder(const MembershipSplit& truth,
                               std::vector<std::pair<std::uint64_t, double>>& curve);

struct ProfileBin {
  double k = 0;            // fraction of n
  std::size_t count = 0;   // ceil(k * n) top-ranked predictions
  std::size_t members = 0;
  double fraction = 0;     // members / count
};

struct OrderingProfile {
  std::vector<ProfileBin> bins;
};

inline const std::vector<double> kDefaultProfileBins = {0.2, 0.4, 0.6, 0.8, 1.0};

OrderingProfile topk_profile(const Ranking& ranking, const MembershipSplit& truth,
                             std::span<const double> ks = kDefaultProfileBins);

// Number of adjacent pairs where a later bin has a larger fraction.
std::size_t profile_inversions(const OrderingProfile& profile);

// Prediction without a known training-set size: every candidate whose score
// is at least `threshold`.
struct ThresholdResult {
  double threshold = 0;
  std::size_t predicted = 0;
  std::size_t members = 0;
  double precision = 0;  // members / predicted, 0 when nothing is predicted
  double recall = 0;     // members / n
};

ThresholdResult threshold_evaluate(const Ranking& ranking, const MembershipSplit& truth,
                                   double threshold);

// Per-run accuracy CSV: step,accuracy,improvement_over_random.
std::string results_csv(const AttackResult& result);

struct SweepPoint {
  double value = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  std::vector<double> improvements;
  std::vector<std::string> failures;  // "seed S: message"
  double mean_accuracy = 0;
  double mean_improvement = 0;
  double min_improvement = 0;
  double max_improvement = 0;
};

struct SweepResult {
  std::string axis;
  std::vector<SweepPoint> points;  // ascending value
};

using SweepRun = std::function<AttackResult(double value, std::uint64_t seed)>;

// Runs every (value, seed) pair on up to `workers` threads. Needs at least
// two axis values and three seeds. A failing run is recorded on its point
// and excluded from the statistics.
SweepResult size_sweep(std::string axis, std::vector<double> values,
                       std::span<const std::uint64_t> seeds, const SweepRun& run,
                       std::size_t workers = 1);

// axis,value,runs,failures,mean_accuracy,mean_improvement,min_improvement,max_improvement
std::string sweep_csv(const SweepResult& sweep);

// Number of adjacent point pairs whose mean improvement increases.
std::size_t sweep_inversions(const SweepResult& sweep);

// max(0, queries - free_quota) / 1000 * price_per_1000
double query_cost_estimate(std::uint64_t queries, double price_per_1000 = 1.50,
                           std::uint64_t free_quota = 1000);

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Standalone SVG line chart with one polyline per series.
std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, std::span<const ChartSeries> series);

// Reads a results or sweep CSV back into series: the first column is x, and
// each remaining numeric column becomes a series named after its header.
std::vector<ChartSeries> csv_series(std::string_view csv_text, const std::string& prefix = "");

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_EVALUATION_H_
