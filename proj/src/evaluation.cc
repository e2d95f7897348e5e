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

#include "genleak/evaluation.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "genleak/io.h"

GENLEAK_NAMESPACE_BEGIN

using internal::str_cat;

double accuracy(std::span<const std::size_t> predicted, const MembershipSplit& truth) {
  if (predicted.size() != truth.n()) {
    throw InvalidArgument(str_cat("prediction holds ", predicted.size(),
                                  " records but the training set has ", truth.n()));
  }
  if (truth.n() == 0) throw InvalidArgument("empty training set");
  std::size_t hits = 0;
  for (std::size_t i : predicted) {
    if (std::binary_search(truth.train.begin(), truth.train.end(), i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.n());
}

double random_baseline(std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw InvalidArgument("random_baseline needs n >= 1 and m >= 1");
  return static_cast<double>(n) / static_cast<double>(n + m);
}

AttackResult evaluate(const Ranking& ranking, const MembershipSplit& truth) {
  AttackResult r;
  r.ranking = ranking;
  r.accuracy = accuracy(ranking.predicted(), truth);
  r.random_baseline = random_baseline(truth.n(), truth.m());
  r.improvement = r.accuracy - r.random_baseline;
  return r;
}

RankingObserver curve_recorder(const MembershipSplit& truth,
                               std::vector<std::pair<std::uint64_t, double>>& curve) {
  return [&truth, &curve](std::uint64_t step, const Ranking& r) {
    curve.emplace_back(step, accuracy(r.predicted(), truth));
  };
}

OrderingProfile topk_profile(const Ranking& ranking, const MembershipSplit& truth,
                             std::span<const double> ks) {
  std::size_t n = truth.n();
  if (ranking.order.size() < n) {
    throw InvalidArgument(str_cat("ranking covers ", ranking.order.size(),
                                  " candidates, fewer than n = ", n));
  }
  OrderingProfile p;
  for (double k : ks) {
    if (!(k > 0 && k <= 1)) throw InvalidArgument(str_cat("profile bin ", k, " not in (0, 1]"));
    ProfileBin b;
    b.k = k;
    // The epsilon keeps exact products such as 0.2 * 5 from rounding up.
    b.count = static_cast<std::size_t>(std::ceil(k * static_cast<double>(n) - 1e-9));
    b.count = std::max<std::size_t>(b.count, 1);
    for (std::size_t i = 0; i < b.count; ++i) {
      if (std::binary_search(truth.train.begin(), truth.train.end(), ranking.order[i])) {
        ++b.members;
      }
    }
    b.fraction = static_cast<double>(b.members) / static_cast<double>(b.count);
    p.bins.push_back(b);
  }
  return p;
}

std::size_t profile_inversions(const OrderingProfile& profile) {
  std::size_t inv = 0;
  for (std::size_t i = 1; i < profile.bins.size(); ++i) {
    if (profile.bins[i].fraction > profile.bins[i - 1].fraction) ++inv;
  }
  return inv;
}

ThresholdResult threshold_evaluate(const Ranking& ranking, const MembershipSplit& truth,
                                   double threshold) {
  ThresholdResult t;
  t.threshold = threshold;
  for (std::size_t i = 0; i < ranking.scores.size(); ++i) {
    if (ranking.scores[i] < threshold) continue;
    ++t.predicted;
    if (std::binary_search(truth.train.begin(), truth.train.end(), i)) ++t.members;
  }
  if (t.predicted) t.precision = static_cast<double>(t.members) / static_cast<double>(t.predicted);
  if (truth.n()) t.recall = static_cast<double>(t.members) / static_cast<double>(truth.n());
  return t;
}

std::string results_csv(const AttackResult& result) {
  std::string out = "step,accuracy,improvement_over_random\n";
  for (const auto& [step, acc] : result.curve) {
    out += str_cat(step, ",", format_number(acc), ",",
                   format_number(acc - result.random_baseline), "\n");
  }
  return out;
}

SweepResult size_sweep(std::string axis, std::vector<double> values,
                       std::span<const std::uint64_t> seeds, const SweepRun& run,
                       std::size_t workers) {
  if (values.size() < 2) throw InvalidArgument("a sweep needs at least two axis values");
  if (seeds.size() < 3) throw InvalidArgument("a sweep needs at least three seeds per point");
  std::sort(values.begin(), values.end());
  if (std::adjacent_find(values.begin(), values.end()) != values.end()) {
    throw InvalidArgument("sweep axis values must be distinct");
  }
  struct Job {
    std::size_t point = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    AttackResult result;
    std::string error;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < values.size(); ++p) {
    for (std::uint64_t s : seeds) {
      Job job;
      job.point = p;
      job.seed = s;
      jobs.push_back(std::move(job));
    }
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      Job& job = jobs[j];
      try {
        job.result = run(values[job.point], job.seed);
        job.ok = true;
      } catch (const std::exception& e) {
        job.error = e.what();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, jobs.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SweepResult out;
  out.axis = std::move(axis);
  out.points.resize(values.size());
  for (std::size_t p = 0; p < values.size(); ++p) out.points[p].value = values[p];
  for (const Job& job : jobs) {
    SweepPoint& pt = out.points[job.point];
    if (!job.ok) {
      pt.failures.push_back(str_cat("seed ", job.seed, ": ", job.error));
      continue;
    }
    pt.seeds.push_back(job.seed);
    pt.accuracies.push_back(job.result.accuracy);
    pt.improvements.push_back(job.result.improvement);
  }
  for (SweepPoint& pt : out.points) {
    if (pt.improvements.empty()) continue;
    double k = static_cast<double>(pt.improvements.size());
    pt.mean_accuracy = std::accumulate(pt.accuracies.begin(), pt.accuracies.end(), 0.0) / k;
    pt.mean_improvement =
        std::accumulate(pt.improvements.begin(), pt.improvements.end(), 0.0) / k;
    auto [lo, hi] = std::minmax_element(pt.improvements.begin(), pt.improvements.end());
    pt.min_improvement = *lo;
    pt.max_improvement = *hi;
  }
  return out;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out =
      "axis,value,runs,failures,mean_accuracy,mean_improvement,min_improvement,"
      "max_improvement\n";
  for (const SweepPoint& p : sweep.points) {
    out += str_cat(sweep.axis, ",", format_number(p.value), ",", p.improvements.size(), ",",
                   p.failures.size(), ",", format_number(p.mean_accuracy), ",",
                   format_number(p.mean_improvement), ",", format_number(p.min_improvement),
                   ",", format_number(p.max_improvement), "\n");
  }
  return out;
}

std::size_t sweep_inversions(const SweepResult& sweep) {
  std::size_t inv = 0;
  for (std::size_t i = 1; i < sweep.points.size(); ++i) {
    if (sweep.points[i].mean_improvement > sweep.points[i - 1].mean_improvement) ++inv;
  }
  return inv;
}

double query_cost_estimate(std::uint64_t queries, double price_per_1000,
                           std::uint64_t free_quota) {
  if (!(price_per_1000 >= 0)) throw InvalidArgument("price_per_1000 must be non-negative");
  if (queries <= free_quota) return 0.0;
  return static_cast<double>(queries - free_quota) / 1000.0 * price_per_1000;
}

// --- SVG ---------------------------------------------------------------------

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, std::span<const ChartSeries> series) {
  constexpr double W = 640, H = 400, L = 64, R = 160, T = 40, B = 52;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::string svg = str_cat(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"", W, "\" height=\"", H,
      "\" viewBox=\"0 0 ", W, " ", H, "\" font-family=\"sans-serif\" font-size=\"12\">\n",
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n", "<text x=\"", W / 2,
      "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">", xml_escape(title), "</text>\n");
  svg += str_cat("<line x1=\"", L, "\" y1=\"", H - B, "\" x2=\"", W - R, "\" y2=\"", H - B,
                 "\" stroke=\"black\"/>\n", "<line x1=\"", L, "\" y1=\"", T, "\" x2=\"", L,
                 "\" y2=\"", H - B, "\" stroke=\"black\"/>\n");
  for (int i = 0; i <= 4; ++i) {
    double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    svg += str_cat("<text x=\"", fixed(px(xv), 1), "\" y=\"", H - B + 16,
                   "\" text-anchor=\"middle\">", fixed(xv, std::abs(x1 - x0) >= 10 ? 0 : 2),
                   "</text>\n");
    svg += str_cat("<text x=\"", L - 6, "\" y=\"", fixed(py(yv) + 4, 1),
                   "\" text-anchor=\"end\">", fixed(yv, 2), "</text>\n");
    svg += str_cat("<line x1=\"", L, "\" y1=\"", fixed(py(yv), 1), "\" x2=\"", W - R,
                   "\" y2=\"", fixed(py(yv), 1), "\" stroke=\"#ddd\"/>\n");
  }
  svg += str_cat("<text x=\"", (L + W - R) / 2, "\" y=\"", H - 14,
                 "\" text-anchor=\"middle\">", xml_escape(x_label), "</text>\n");
  svg += str_cat("<text x=\"16\" y=\"", (T + H - B) / 2,
                 "\" text-anchor=\"middle\" transform=\"rotate(-90 16 ", (T + H - B) / 2,
                 ")\">", xml_escape(y_label), "</text>\n");
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    std::string pts;
    for (auto [x, y] : series[i].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!pts.empty()) pts += ' ';
      pts += str_cat(fixed(px(x), 1), ",", fixed(py(y), 1));
    }
    svg += str_cat("<polyline fill=\"none\" stroke=\"", color, "\" stroke-width=\"2\" points=\"",
                   pts, "\"/>\n");
    double ly = T + 14 + 18.0 * static_cast<double>(i);
    svg += str_cat("<line x1=\"", W - R + 10, "\" y1=\"", ly - 4, "\" x2=\"", W - R + 28,
                   "\" y2=\"", ly - 4, "\" stroke=\"", color, "\" stroke-width=\"2\"/>\n");
    svg += str_cat("<text x=\"", W - R + 32, "\" y=\"", ly, "\">", xml_escape(series[i].name),
                   "</text>\n");
  }
  svg += "</svg>\n";
  return svg;
}

std::vector<ChartSeries> csv_series(std::string_view text, const std::string& prefix) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw FormatError("empty CSV");
  const auto& header = rows[0];
  auto numeric = [](const std::string& s, double& v) {
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return !s.empty() && end == s.c_str() + s.size();
  };
  // Columns numeric on every data row, after the x column.
  std::size_t x_col = 0;
  double v;
  while (x_col < header.size() && rows.size() > 1 && !numeric(rows[1][x_col], v)) ++x_col;
  if (x_col + 1 >= header.size()) throw FormatError("CSV has no numeric columns to plot");
  std::vector<ChartSeries> out;
  for (std::size_t c = x_col + 1; c < header.size(); ++c) {
    ChartSeries s;
    s.name = prefix.empty() ? header[c] : str_cat(prefix, " ", header[c]);
    bool ok = true;
    for (std::size_t r = 1; r < rows.size() && ok; ++r) {
      if (rows[r].size() != header.size()) {
        throw FormatError(str_cat("CSV row ", r + 1, " has ", rows[r].size(),
                                  " fields, expected ", header.size()));
      }
      double x, y;
      ok = numeric(rows[r][x_col], x) && numeric(rows[r][c], y);
      if (ok) s.points.emplace_back(x, y);
    }
    if (ok) out.push_back(std::move(s));
  }
  return out;
}

GENLEAK_NAMESPACE_END
