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

#ifndef GENLEAK_DATASETS_H_
#define GENLEAK_DATASETS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genleak/common.h"
#include "genleak/tensor.h"

GENLEAK_NAMESPACE_BEGIN

// Records stacked along the first axis: records is [N, record_shape...].
// Ingested data lies in [-1, 1]; synthetic Gaussian mixtures are left
// unnormalized.
struct Dataset {
  Tensor records;
  Shape record_shape;
  std::vector<std::int64_t> labels;  // empty when unlabeled

  std::size_t size() const { return records.rank() == 0 ? 0 : records.dim(0); }
  bool has_labels() const { return !labels.empty(); }
  std::size_t record_numel() const { return shape_numel(record_shape); }
  // [indices.size(), record_shape...] in the given order.
  Tensor gather(std::span<const std::size_t> indices) const;
  Dataset subset(std::span<const std::size_t> indices) const;
  void validate() const;
};

enum class SynthKind { gaussian_mixture, ring, blob_images };

std::string_view synth_kind_name(SynthKind kind);
SynthKind parse_synth_kind(std::string_view name);

struct SyntheticSpec {
  SynthKind kind = SynthKind::ring;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  // gaussian_mixture: component c has mean -spread + 2 spread c / (k - 1) in
  // every coordinate (0 for a single component) and unit-scaled sigma.
  std::size_t components = 2;
  std::size_t dims = 1;
  double spread = 3.0;
  double component_sigma = 1.0;
  // ring: modes evenly spaced on a circle of `radius`.
  std::size_t modes = 8;
  double radius = 0.7;
  double noise_sigma = 0.05;
  // blob_images: grid x grid single-channel images, `classes` patterns.
  std::size_t grid = 8;
  std::size_t classes = 10;
  // Class frequencies proportional to (c + 1)^-class_skew; 0 is uniform.
  double class_skew = 0.0;
  double pixel_noise = 0.1;

  void validate() const;
};

// Labels are the component, mode or class of each record.
Dataset synth_generate(const SyntheticSpec& spec);

// IDX: 0x00 0x00, dtype 0x08 (unsigned byte), rank byte, big-endian u32
// dims, pixels. Pixels map linearly from [0, 255] to [-1, 1]. Rank-3 files
// [N, H, W] become [N, 1, H, W]. An optional rank-1 label file supplies
// labels.
Dataset load_idx(const std::string& path, const std::string& labels_path = "");
// Values are quantized to bytes; [1, H, W] records are written as rank 3.
void save_idx(const Dataset& ds, const std::string& path,
              const std::string& labels_path = "");

struct CsvOptions {
  bool label_column = false;  // first column holds an integer label
  // Source value range mapped linearly onto [-1, 1]; values outside it are
  // rejected with their row number.
  double range_lo = -1.0;
  double range_hi = 1.0;
};

// One record per row; a first row with any non-numeric field is a header.
// Fields may be double-quoted with "" escapes.
Dataset load_csv(const std::string& path, const CsvOptions& options = {});
Dataset parse_csv(std::string_view text, const CsvOptions& options = {},
                  const std::string& source = "<csv>");
// Writes values (and labels when present) with shortest round-trip formatting.
void save_csv(const Dataset& ds, const std::string& path);

enum class SplitKind { random_fraction, top_classes };

struct MembershipSplit {
  std::vector<std::size_t> train;    // ascending
  std::vector<std::size_t> holdout;  // ascending
  std::uint64_t seed = 0;
  SplitKind kind = SplitKind::random_fraction;
  double fraction = 0;  // random_fraction
  std::size_t k = 0;    // top_classes

  std::size_t n() const { return train.size(); }
  std::size_t m() const { return holdout.size(); }
  // Disjoint, covering 0..size-1, both sides non-empty.
  void validate(std::size_t dataset_size) const;
};

// n = floor(f * size), drawn uniformly without replacement.
MembershipSplit split_random_fraction(std::size_t dataset_size, double fraction,
                                      std::uint64_t seed);
MembershipSplit split_random_fraction(const Dataset& ds, double fraction,
                                      std::uint64_t seed);

// Members are all records of the k most frequent labels, ties to the smaller
// label.
MembershipSplit split_top_classes(const Dataset& ds, std::size_t k);

// Partial ground truth handed to an attacker.
struct AuxKnowledge {
  std::vector<std::size_t> known_members;     // ascending
  std::vector<std::size_t> known_nonmembers;  // ascending

  bool empty() const { return known_members.empty() && known_nonmembers.empty(); }
};

// floor(train_frac * n) members and floor(test_frac * m) non-members.
AuxKnowledge sample_aux_knowledge(const MembershipSplit& split, double train_frac,
                                  double test_frac, std::uint64_t seed);

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_DATASETS_H_
