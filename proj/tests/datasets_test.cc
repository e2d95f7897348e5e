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

#include <cmath>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "genleak/datasets.h"
#include "genleak/io.h"

namespace genleak {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("genleak_datasets_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void expect_partition(const MembershipSplit& s, std::size_t size) {
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (std::size_t i : s.holdout) EXPECT_TRUE(all.insert(i).second) << "overlap at " << i;
  EXPECT_EQ(all.size(), size);
  if (!all.empty()) EXPECT_EQ(*all.rbegin(), size - 1);
}

TEST(Synth, GaussianMixtureMeans) {
  SyntheticSpec s;
  s.kind = SynthKind::gaussian_mixture;
  s.components = 2;
  s.dims = 1;
  s.count = 10000;
  s.seed = 3;
  Dataset ds = synth_generate(s);
  double sum[2] = {0, 0};
  std::size_t cnt[2] = {0, 0};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    sum[ds.labels[i]] += ds.records[i];
    ++cnt[ds.labels[i]];
  }
  EXPECT_NEAR(sum[0] / cnt[0], -3.0, 0.1);
  EXPECT_NEAR(sum[1] / cnt[1], 3.0, 0.1);
}

TEST(Synth, SameSeedSameData) {
  for (SynthKind k : {SynthKind::gaussian_mixture, SynthKind::ring, SynthKind::blob_images}) {
    SyntheticSpec s;
    s.kind = k;
    s.count = 100;
    s.seed = 9;
    Dataset a = synth_generate(s), b = synth_generate(s);
    EXPECT_TRUE(a.records == b.records);
    EXPECT_EQ(a.labels, b.labels);
    s.seed = 10;
    EXPECT_FALSE(a.records == synth_generate(s).records);
  }
}

TEST(Synth, BlobImagesShapeContract) {
  SyntheticSpec s;
  s.kind = SynthKind::blob_images;
  s.grid = 8;
  s.classes = 10;
  s.count = 1000;
  Dataset ds = synth_generate(s);
  EXPECT_EQ(ds.size(), 1000u);
  EXPECT_EQ(ds.record_shape, (Shape{1, 8, 8}));
  std::set<std::int64_t> labels(ds.labels.begin(), ds.labels.end());
  EXPECT_EQ(labels, (std::set<std::int64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  for (Real v : ds.records.data()) {
    EXPECT_GE(v, -1);
    EXPECT_LE(v, 1);
  }
}

TEST(Synth, BlobClassesAreDistinct) {
  // Mean image distance between classes exceeds the within-class spread.
  SyntheticSpec s;
  s.kind = SynthKind::blob_images;
  s.count = 2000;
  Dataset ds = synth_generate(s);
  std::vector<std::vector<double>> mean(10, std::vector<double>(64, 0.0));
  std::vector<double> cnt(10, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    cnt[ds.labels[i]] += 1;
    for (std::size_t j = 0; j < 64; ++j) mean[ds.labels[i]][j] += ds.records[i * 64 + j];
  }
  for (std::size_t c = 0; c < 10; ++c)
    for (double& v : mean[c]) v /= cnt[c];
  for (std::size_t a = 0; a < 10; ++a) {
    for (std::size_t b = a + 1; b < 10; ++b) {
      double d = 0;
      for (std::size_t j = 0; j < 64; ++j) d += std::pow(mean[a][j] - mean[b][j], 2);
      EXPECT_GT(std::sqrt(d), 1.0) << a << " vs " << b;
    }
  }
}

TEST(Synth, RingModes) {
  SyntheticSpec s;
  s.kind = SynthKind::ring;
  s.count = 800;
  s.noise_sigma = 0;
  Dataset ds = synth_generate(s);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double a = 2 * M_PI * static_cast<double>(ds.labels[i]) / 8;
    EXPECT_NEAR(ds.records[2 * i], 0.7 * std::cos(a), 1e-6);
    EXPECT_NEAR(ds.records[2 * i + 1], 0.7 * std::sin(a), 1e-6);
  }
}

TEST(Synth, CountBelowGroupsRejected) {
  SyntheticSpec s;
  s.kind = SynthKind::ring;
  s.count = 4;
  EXPECT_THROW(synth_generate(s), InvalidArgument);
}

TEST(Idx, PixelEndpoints) {
  fs::path dir = temp_dir("endpoints");
  std::string bytes{'\0', '\0', '\x08', '\x03'};
  for (int d : {2, 2, 2}) bytes += std::string{'\0', '\0', '\0', static_cast<char>(d)};
  for (int i = 0; i < 8; ++i) bytes += static_cast<char>(i == 0 ? 0 : (i == 7 ? 255 : 128));
  atomic_write_file((dir / "a.idx").string(), bytes);
  Dataset ds = load_idx((dir / "a.idx").string());
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.record_shape, (Shape{1, 2, 2}));
  EXPECT_EQ(ds.records[0], Real(-1));
  EXPECT_NEAR(ds.records[7], 1.0, 1e-6);
  EXPECT_NEAR(ds.records[3], 128 / 127.5 - 1, 1e-6);
}

TEST(Idx, BadInputsRejected) {
  fs::path dir = temp_dir("bad");
  std::string p = (dir / "a.idx").string();
  atomic_write_file(p, std::string{'\x01', '\0', '\x08', '\x01', '\0', '\0', '\0', '\x01', 'x'});
  EXPECT_THROW(load_idx(p), FormatError);
  atomic_write_file(p, std::string{'\0', '\0', '\x0d', '\x01', '\0', '\0', '\0', '\x01', 'x'});
  EXPECT_THROW(load_idx(p), FormatError);
  atomic_write_file(p, std::string{'\0', '\0', '\x08', '\x01', '\0', '\0', '\0', '\x05', 'x'});
  try {
    load_idx(p);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
}

TEST(Idx, RoundTripWithinQuantization) {
  fs::path dir = temp_dir("roundtrip");
  SyntheticSpec s;
  s.kind = SynthKind::blob_images;
  s.count = 50;
  Dataset ds = synth_generate(s);
  save_idx(ds, (dir / "x.idx").string(), (dir / "y.idx").string());
  Dataset r = load_idx((dir / "x.idx").string(), (dir / "y.idx").string());
  EXPECT_EQ(r.record_shape, ds.record_shape);
  EXPECT_EQ(r.labels, ds.labels);
  ASSERT_EQ(r.records.numel(), ds.records.numel());
  for (std::size_t i = 0; i < r.records.numel(); ++i) {
    EXPECT_LE(std::abs(r.records[i] - ds.records[i]), 1.0 / 255 + 1e-6);
  }
}

TEST(Csv, RowCount) {
  std::string text;
  for (int i = 0; i < 100; ++i) text += "0.5,-0.25\n";
  EXPECT_EQ(parse_csv(text).size(), 100u);
}

TEST(Csv, HeaderLabelsAndQuoting) {
  Dataset ds = parse_csv("\"label\",\"a,b\",c\n3,0.5,\"-1\"\n7,1,0\n", {.label_column = true});
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.labels, (std::vector<std::int64_t>{3, 7}));
  EXPECT_EQ(ds.record_shape, (Shape{2}));
  EXPECT_EQ(ds.records[1], Real(-1));
}

TEST(Csv, RaggedRowNamed) {
  try {
    parse_csv("0.1,0.2\n0.3,0.4\n0.5\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(Csv, RangeMapping) {
  Dataset ds = parse_csv("0,255\n127.5,0\n", {.range_lo = 0, .range_hi = 255});
  EXPECT_EQ(ds.records[0], Real(-1));
  EXPECT_EQ(ds.records[1], Real(1));
  EXPECT_EQ(ds.records[2], Real(0));
  EXPECT_THROW(parse_csv("2\n"), FormatError);
}

TEST(Csv, RoundTripExact) {
  fs::path dir = temp_dir("csv");
  SyntheticSpec s;
  s.kind = SynthKind::ring;
  s.count = 64;
  Dataset ds = synth_generate(s);
  save_csv(ds, (dir / "r.csv").string());
  Dataset r = load_csv((dir / "r.csv").string(), {.label_column = true});
  EXPECT_TRUE(r.records == ds.records);
  EXPECT_EQ(r.labels, ds.labels);
}

TEST(Split, RandomFractionSizes) {
  MembershipSplit a = split_random_fraction(13233, 0.1, 1);
  EXPECT_EQ(a.n(), 1323u);
  EXPECT_EQ(a.m(), 11910u);
  EXPECT_EQ(split_random_fraction(60000, 0.1, 1).n(), 6000u);
  MembershipSplit b = split_random_fraction(10, 0.5, 2);
  EXPECT_EQ(b.n(), 5u);
  EXPECT_EQ(b.m(), 5u);
  expect_partition(a, 13233);
  expect_partition(b, 10);
}

TEST(Split, RandomFractionIsSeeded) {
  EXPECT_EQ(split_random_fraction(320, 0.1, 4).train, split_random_fraction(320, 0.1, 4).train);
  EXPECT_NE(split_random_fraction(320, 0.1, 4).train, split_random_fraction(320, 0.1, 5).train);
}

TEST(Split, DegenerateFractionRejected) {
  EXPECT_THROW(split_random_fraction(10, 0.0, 1), InvalidArgument);
  EXPECT_THROW(split_random_fraction(10, 1.0, 1), InvalidArgument);
  EXPECT_THROW(split_random_fraction(10, 0.05, 1), InvalidArgument);
}

TEST(Split, RandomFractionUniform) {
  // Every index is a member about f of the time across seeds.
  std::vector<int> hits(20, 0);
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    for (std::size_t i : split_random_fraction(20, 0.25, seed).train) ++hits[i];
  }
  for (int h : hits) EXPECT_NEAR(h / 4000.0, 0.25, 0.03);
}

Dataset labelled(const std::vector<std::pair<std::int64_t, std::size_t>>& counts) {
  Dataset ds;
  ds.record_shape = {1};
  for (auto [label, c] : counts)
    for (std::size_t i = 0; i < c; ++i) ds.labels.push_back(label);
  ds.records = Tensor(Shape{ds.labels.size(), 1});
  return ds;
}

TEST(Split, TopClassesTieToSmallerLabel) {
  // A:5, B:3, C:3 with k=2 -> A and B.
  Dataset ds = labelled({{2, 3}, {0, 5}, {1, 3}});
  MembershipSplit s = split_top_classes(ds, 2);
  std::set<std::int64_t> chosen;
  for (std::size_t i : s.train) chosen.insert(ds.labels[i]);
  EXPECT_EQ(chosen, (std::set<std::int64_t>{0, 1}));
  EXPECT_EQ(s.n(), 8u);
  expect_partition(s, ds.size());
}

TEST(Split, TopClassesAllClassesRejected) {
  Dataset ds = labelled({{0, 5}, {1, 3}});
  EXPECT_THROW(split_top_classes(ds, 2), InvalidArgument);
  Dataset unlabeled;
  unlabeled.records = Tensor(Shape{3, 1});
  unlabeled.record_shape = {1};
  EXPECT_THROW(split_top_classes(unlabeled, 1), InvalidArgument);
}

TEST(Split, LfwLikeTopTenCoverage) {
  // 13,233 records over 5,749 identities; the ten largest hold 1,615.
  std::vector<std::pair<std::int64_t, std::size_t>> counts = {
      {0, 530}, {1, 236}, {2, 144}, {3, 140}, {4, 121},
      {5, 109}, {6, 95},  {7, 85},  {8, 80},  {9, 75}};
  std::size_t rest = 13233 - 1615;
  std::int64_t label = 10;
  // Remaining identities have 1 to 4 images each.
  while (rest > 0) {
    std::size_t c = std::min<std::size_t>(rest, 1 + static_cast<std::size_t>(label % 4));
    counts.emplace_back(label++, c);
    rest -= c;
  }
  Dataset ds = labelled(counts);
  ASSERT_EQ(ds.size(), 13233u);
  MembershipSplit s = split_top_classes(ds, 10);
  EXPECT_EQ(s.n(), 1615u);
  EXPECT_NEAR(static_cast<double>(s.n()) / ds.size(), 0.122, 0.0005);
}

TEST(Aux, PaperSizes) {
  MembershipSplit s = split_random_fraction(13233, 0.1, 1);
  AuxKnowledge a = sample_aux_knowledge(s, 0.2, 0.2, 3);
  EXPECT_EQ(a.known_members.size(), 264u);
  EXPECT_EQ(a.known_nonmembers.size(), 2382u);
  MembershipSplit big;
  big.train = {0};
  for (std::size_t i = 1; i <= 50000; ++i) big.holdout.push_back(i);
  EXPECT_EQ(sample_aux_knowledge(big, 0.0, 0.2, 1).known_nonmembers.size(), 10000u);
}

TEST(Aux, SubsetsOfTheirSides) {
  MembershipSplit s = split_random_fraction(320, 0.1, 2);
  AuxKnowledge a = sample_aux_knowledge(s, 0.3, 0.3, 5);
  std::set<std::size_t> train(s.train.begin(), s.train.end());
  for (std::size_t i : a.known_members) EXPECT_TRUE(train.count(i));
  for (std::size_t i : a.known_nonmembers) EXPECT_FALSE(train.count(i));
  EXPECT_EQ(a.known_members.size(), 9u);
  EXPECT_EQ(a.known_nonmembers.size(), 86u);
}

TEST(Aux, ZeroFractionsEmpty) {
  MembershipSplit s = split_random_fraction(320, 0.1, 2);
  EXPECT_TRUE(sample_aux_knowledge(s, 0, 0, 1).empty());
  EXPECT_THROW(sample_aux_knowledge(s, 1.5, 0, 1), InvalidArgument);
}

}  // namespace
}  // namespace genleak
