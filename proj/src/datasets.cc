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

#include "genleak/datasets.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "genleak/io.h"
#include "genleak/rng.h"

GENLEAK_NAMESPACE_BEGIN

using internal::str_cat;

// --- Dataset -------------------------------------------------------------------

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
  std::size_t per = record_numel();
  Shape shape = record_shape;
  shape.insert(shape.begin(), indices.size());
  Tensor out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) {
      throw InvalidArgument(str_cat("record index ", indices[i], " out of range (", size(), ")"));
    }
    std::copy_n(records.data().begin() + static_cast<long>(indices[i] * per), per,
                out.data().begin() + static_cast<long>(i * per));
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset d;
  d.records = gather(indices);
  d.record_shape = record_shape;
  if (has_labels()) {
    for (std::size_t i : indices) d.labels.push_back(labels[i]);
  }
  return d;
}

void Dataset::validate() const {
  if (records.rank() != record_shape.size() + 1 ||
      !std::equal(record_shape.begin(), record_shape.end(), records.shape().begin() + 1)) {
    throw ShapeError(str_cat("dataset records ", shape_str(records.shape()),
                             " do not match record shape ", shape_str(record_shape)));
  }
  if (has_labels() && labels.size() != size()) {
    throw ShapeError(str_cat("dataset has ", size(), " records but ", labels.size(), " labels"));
  }
}

// --- synthesis -----------------------------------------------------------------

std::string_view synth_kind_name(SynthKind kind) {
  switch (kind) {
    case SynthKind::gaussian_mixture: return "gaussian_mixture";
    case SynthKind::ring: return "ring";
    case SynthKind::blob_images: return "blob_images";
  }
  return "?";
}

SynthKind parse_synth_kind(std::string_view name) {
  for (SynthKind k : {SynthKind::gaussian_mixture, SynthKind::ring, SynthKind::blob_images}) {
    if (synth_kind_name(k) == name) return k;
  }
  throw ConfigError(str_cat("unknown synthetic kind '", name,
                            "' (gaussian_mixture, ring, blob_images)"));
}

void SyntheticSpec::validate() const {
  std::size_t groups = kind == SynthKind::gaussian_mixture ? components
                       : kind == SynthKind::ring           ? modes
                                                           : classes;
  if (groups == 0) throw InvalidArgument("synthetic spec needs at least one component/mode/class");
  if (count < groups) {
    throw InvalidArgument(str_cat("synthetic count ", count, " is below the ", groups,
                                  " components/modes/classes"));
  }
  if (kind == SynthKind::gaussian_mixture && dims == 0) {
    throw InvalidArgument("gaussian_mixture needs dims >= 1");
  }
  if (kind == SynthKind::blob_images && grid < 2) {
    throw InvalidArgument("blob_images needs grid >= 2");
  }
  if (!(noise_sigma >= 0) || !(component_sigma >= 0) || !(pixel_noise >= 0) ||
      !(class_skew >= 0)) {
    throw InvalidArgument("synthetic noise scales and skew must be >= 0");
  }
}

namespace {

std::size_t draw_class(Rng& rng, const std::vector<double>& cdf) {
  double u = rng.uniform() * cdf.back();
  return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

double blob_pixel(std::size_t c, std::size_t classes, std::size_t grid, double x, double y) {
  double fx = 1.0 + static_cast<double>(c % 3);
  double fy = 1.0 + static_cast<double>((c / 3) % 3);
  double phase = 2 * M_PI * static_cast<double>(c) / static_cast<double>(classes);
  double g = static_cast<double>(grid);
  double wave = std::cos(2 * M_PI * (fx * x + fy * y) / g + phase);
  // Blob centre walks the grid by a golden-ratio stride per class.
  double cx = std::fmod(0.618034 * static_cast<double>(c + 1) * g, g);
  double cy = std::fmod(0.381966 * static_cast<double>(c + 2) * g, g);
  double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
  double blob = std::exp(-r2 / (0.08 * g * g));
  return 0.6 * wave + 0.8 * blob - 0.4;
}

}  // namespace

Dataset synth_generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset ds;
  const std::size_t n = spec.count;
  switch (spec.kind) {
    case SynthKind::gaussian_mixture: {
      ds.record_shape = {spec.dims};
      ds.records = Tensor(Shape{n, spec.dims});
      std::size_t k = spec.components;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = rng.index(k);
        double mean = k == 1 ? 0.0
                             : -spec.spread + 2 * spec.spread * static_cast<double>(c) /
                                                  static_cast<double>(k - 1);
        for (std::size_t d = 0; d < spec.dims; ++d) {
          ds.records[i * spec.dims + d] =
              static_cast<Real>(rng.normal(mean, spec.component_sigma));
        }
        ds.labels.push_back(static_cast<std::int64_t>(c));
      }
      break;
    }
    case SynthKind::ring: {
      ds.record_shape = {2};
      ds.records = Tensor(Shape{n, 2});
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = rng.index(spec.modes);
        double a = 2 * M_PI * static_cast<double>(c) / static_cast<double>(spec.modes);
        double x = spec.radius * std::cos(a) + rng.normal(0.0, spec.noise_sigma);
        double y = spec.radius * std::sin(a) + rng.normal(0.0, spec.noise_sigma);
        ds.records[2 * i] = static_cast<Real>(x);
        ds.records[2 * i + 1] = static_cast<Real>(y);
        ds.labels.push_back(static_cast<std::int64_t>(c));
      }
      break;
    }
    case SynthKind::blob_images: {
      std::size_t g = spec.grid;
      ds.record_shape = {1, g, g};
      ds.records = Tensor(Shape{n, 1, g, g});
      std::vector<double> cdf(spec.classes);
      double acc = 0;
      for (std::size_t c = 0; c < spec.classes; ++c) {
        acc += std::pow(static_cast<double>(c + 1), -spec.class_skew);
        cdf[c] = acc;
      }
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = draw_class(rng, cdf);
        for (std::size_t y = 0; y < g; ++y) {
          for (std::size_t x = 0; x < g; ++x) {
            double v = blob_pixel(c, spec.classes, g, static_cast<double>(x),
                                  static_cast<double>(y)) +
                       rng.normal(0.0, spec.pixel_noise);
            ds.records[(i * g + y) * g + x] = static_cast<Real>(std::clamp(v, -1.0, 1.0));
          }
        }
        ds.labels.push_back(static_cast<std::int64_t>(c));
      }
      break;
    }
  }
  return ds;
}

// --- IDX -----------------------------------------------------------------------

namespace {

std::uint32_t read_be32(const std::string& b, std::size_t pos) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 3]));
}

void put_be32(std::string& out, std::uint32_t v) {
  out += static_cast<char>((v >> 24) & 0xff);
  out += static_cast<char>((v >> 16) & 0xff);
  out += static_cast<char>((v >> 8) & 0xff);
  out += static_cast<char>(v & 0xff);
}

struct IdxFile {
  Shape dims;
  std::string_view payload;
};

IdxFile parse_idx(const std::string& bytes, const std::string& path) {
  if (bytes.size() < 4) throw FormatError(str_cat(path, ": truncated IDX header"));
  if (bytes[0] != 0 || bytes[1] != 0) {
    throw FormatError(str_cat(path, ": bad IDX magic (expected 0x00 0x00)"));
  }
  if (static_cast<unsigned char>(bytes[2]) != 0x08) {
    throw FormatError(str_cat(path, ": unsupported IDX dtype 0x", std::hex,
                              static_cast<int>(static_cast<unsigned char>(bytes[2])),
                              " (only unsigned byte 0x08)"));
  }
  std::size_t rank = static_cast<unsigned char>(bytes[3]);
  if (rank == 0) throw FormatError(str_cat(path, ": IDX rank 0"));
  if (bytes.size() < 4 + 4 * rank) throw FormatError(str_cat(path, ": truncated IDX dims"));
  IdxFile f;
  for (std::size_t r = 0; r < rank; ++r) f.dims.push_back(read_be32(bytes, 4 + 4 * r));
  std::size_t need = shape_numel(f.dims);
  std::size_t have = bytes.size() - 4 - 4 * rank;
  if (have < need) {
    throw FormatError(str_cat(path, ": truncated IDX payload (", have, " of ", need, " bytes)"));
  }
  if (have > need) throw FormatError(str_cat(path, ": ", have - need, " trailing bytes"));
  f.payload = std::string_view(bytes).substr(4 + 4 * rank);
  return f;
}

std::string encode_idx(const Shape& dims, const std::vector<unsigned char>& payload) {
  std::string out{'\0', '\0', '\x08', static_cast<char>(dims.size())};
  for (std::size_t d : dims) {
    if (d > 0xffffffffu) throw InvalidArgument("IDX dimension exceeds u32");
    put_be32(out, static_cast<std::uint32_t>(d));
  }
  out.append(payload.begin(), payload.end());
  return out;
}

}  // namespace

Dataset load_idx(const std::string& path, const std::string& labels_path) {
  std::string bytes = read_file(path);
  IdxFile f = parse_idx(bytes, path);
  Dataset ds;
  std::size_t n = f.dims[0];
  ds.record_shape.assign(f.dims.begin() + 1, f.dims.end());
  if (ds.record_shape.empty()) ds.record_shape = {1};
  if (ds.record_shape.size() == 2) ds.record_shape.insert(ds.record_shape.begin(), 1);
  Shape full = ds.record_shape;
  full.insert(full.begin(), n);
  ds.records = Tensor(full);
  for (std::size_t i = 0; i < f.payload.size(); ++i) {
    double px = static_cast<unsigned char>(f.payload[i]);
    ds.records[i] = static_cast<Real>(px / 127.5 - 1.0);
  }
  if (!labels_path.empty()) {
    std::string lb = read_file(labels_path);
    IdxFile l = parse_idx(lb, labels_path);
    if (l.dims.size() != 1 || l.dims[0] != n) {
      throw FormatError(str_cat(labels_path, ": label file has shape ", shape_str(l.dims),
                                ", expected [", n, "]"));
    }
    for (char c : l.payload) ds.labels.push_back(static_cast<unsigned char>(c));
  }
  return ds;
}

void save_idx(const Dataset& ds, const std::string& path, const std::string& labels_path) {
  ds.validate();
  Shape dims = ds.record_shape;
  if (dims.size() == 3 && dims[0] == 1) dims.erase(dims.begin());
  dims.insert(dims.begin(), ds.size());
  std::vector<unsigned char> px(ds.records.numel());
  for (std::size_t i = 0; i < px.size(); ++i) {
    double v = std::clamp(static_cast<double>(ds.records[i]), -1.0, 1.0);
    px[i] = static_cast<unsigned char>(std::lround((v + 1.0) * 127.5));
  }
  atomic_write_file(path, encode_idx(dims, px));
  if (!labels_path.empty()) {
    if (!ds.has_labels()) throw InvalidArgument("save_idx: dataset has no labels");
    std::vector<unsigned char> lb;
    for (std::int64_t l : ds.labels) {
      if (l < 0 || l > 255) throw InvalidArgument(str_cat("label ", l, " does not fit a byte"));
      lb.push_back(static_cast<unsigned char>(l));
    }
    atomic_write_file(labels_path, encode_idx({ds.size()}, lb));
  }
}

// --- CSV -----------------------------------------------------------------------

namespace {

// Splits CSV text into rows of fields, honouring double quotes.
std::vector<std::vector<std::string>> csv_rows(std::string_view text, const std::string& src,
                                               std::vector<std::size_t>& line_of_row) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1, row_line = 1;
  auto end_row = [&] {
    if (field_started || !row.empty()) {
      row.push_back(field);
      rows.push_back(std::move(row));
      line_of_row.push_back(row_line);
    }
    row.clear();
    field.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"': quoted = field_started = true; break;
      case ',':
        row.push_back(field);
        field.clear();
        field_started = true;
        break;
      case '\r': break;
      case '\n':
        end_row();
        row_line = ++line;
        break;
      default: field += c; field_started = true;
    }
  }
  if (quoted) throw FormatError(str_cat(src, ":", line, ": unterminated quoted field"));
  end_row();
  return rows;
}

std::optional<double> parse_number(std::string s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return std::nullopt;
  s = s.substr(b, s.find_last_not_of(" \t") - b + 1);
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

Dataset parse_csv(std::string_view text, const CsvOptions& opt, const std::string& src) {
  if (!(opt.range_lo < opt.range_hi)) throw InvalidArgument("CSV range must be ordered");
  std::vector<std::size_t> lines;
  auto rows = csv_rows(text, src, lines);
  std::size_t first = 0;
  if (!rows.empty()) {
    bool header = std::any_of(rows[0].begin(), rows[0].end(),
                              [](const std::string& f) { return !parse_number(f); });
    if (header) first = 1;
  }
  if (rows.size() <= first) throw FormatError(str_cat(src, ": no data rows"));
  std::size_t width = rows[first].size();
  std::size_t values = width - (opt.label_column ? 1 : 0);
  if (values == 0) throw FormatError(str_cat(src, ":", lines[first], ": row has no values"));
  Dataset ds;
  ds.record_shape = {values};
  std::vector<Real> data;
  data.reserve((rows.size() - first) * values);
  double scale = 2.0 / (opt.range_hi - opt.range_lo);
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != width) {
      throw FormatError(str_cat(src, ":", lines[r], ": row has ", row.size(),
                                " fields, expected ", width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      auto v = parse_number(row[c]);
      if (!v || !std::isfinite(*v)) {
        throw FormatError(str_cat(src, ":", lines[r], ": field ", c + 1, " '", row[c],
                                  "' is not a finite number"));
      }
      if (opt.label_column && c == 0) {
        if (*v != std::floor(*v)) {
          throw FormatError(str_cat(src, ":", lines[r], ": label '", row[c], "' is not an integer"));
        }
        ds.labels.push_back(static_cast<std::int64_t>(*v));
        continue;
      }
      if (*v < opt.range_lo || *v > opt.range_hi) {
        throw FormatError(str_cat(src, ":", lines[r], ": value ", row[c], " outside [",
                                  opt.range_lo, ", ", opt.range_hi, "]"));
      }
      data.push_back(static_cast<Real>(std::clamp((*v - opt.range_lo) * scale - 1.0, -1.0, 1.0)));
    }
  }
  ds.records = Tensor(Shape{rows.size() - first, values}, std::move(data));
  return ds;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  return parse_csv(read_file(path), options, path);
}

void save_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::size_t per = ds.record_numel();
  std::string out;
  if (ds.has_labels()) out += "label,";
  for (std::size_t j = 0; j < per; ++j) out += csv_quote(str_cat("x", j)) + (j + 1 < per ? "," : "\n");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.has_labels()) out += str_cat(ds.labels[i], ",");
    for (std::size_t j = 0; j < per; ++j) {
      out += format_number(ds.records[i * per + j]);
      out += j + 1 < per ? "," : "\n";
    }
  }
  atomic_write_file(path, out);
}

// --- splits ----------------------------------------------------------------------

void MembershipSplit::validate(std::size_t dataset_size) const {
  if (train.empty() || holdout.empty()) {
    throw InvalidArgument(str_cat("membership split needs n, m >= 1 (n=", train.size(),
                                  ", m=", holdout.size(), ")"));
  }
  std::vector<char> seen(dataset_size, 0);
  for (const auto* side : {&train, &holdout}) {
    for (std::size_t i : *side) {
      if (i >= dataset_size || seen[i]) {
        throw InvalidArgument(str_cat("membership split index ", i, " out of range or repeated"));
      }
      seen[i] = 1;
    }
  }
  if (train.size() + holdout.size() != dataset_size) {
    throw InvalidArgument("membership split does not cover the dataset");
  }
}

MembershipSplit split_random_fraction(std::size_t size, double f, std::uint64_t seed) {
  if (!(f > 0 && f < 1)) throw InvalidArgument(str_cat("split fraction must lie in (0,1), got ", f));
  auto n = static_cast<std::size_t>(std::floor(f * static_cast<double>(size) + 1e-9));
  if (n < 1 || n >= size) {
    throw InvalidArgument(str_cat("split fraction ", f, " of ", size,
                                  " records leaves an empty side"));
  }
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, "split", 0);
  rng.shuffle(std::span<std::size_t>(idx));
  MembershipSplit s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<long>(n));
  s.holdout.assign(idx.begin() + static_cast<long>(n), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.holdout.begin(), s.holdout.end());
  s.seed = seed;
  s.kind = SplitKind::random_fraction;
  s.fraction = f;
  return s;
}

MembershipSplit split_random_fraction(const Dataset& ds, double f, std::uint64_t seed) {
  return split_random_fraction(ds.size(), f, seed);
}

MembershipSplit split_top_classes(const Dataset& ds, std::size_t k) {
  if (!ds.has_labels()) throw InvalidArgument("split_top_classes needs a labeled dataset");
  if (k == 0) throw InvalidArgument("split_top_classes needs k >= 1");
  std::map<std::int64_t, std::size_t> counts;
  for (std::int64_t l : ds.labels) ++counts[l];
  std::vector<std::pair<std::int64_t, std::size_t>> order(counts.begin(), counts.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::int64_t> chosen;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) chosen.push_back(order[i].first);
  std::sort(chosen.begin(), chosen.end());
  MembershipSplit s;
  s.kind = SplitKind::top_classes;
  s.k = k;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    bool member = std::binary_search(chosen.begin(), chosen.end(), ds.labels[i]);
    (member ? s.train : s.holdout).push_back(i);
  }
  if (s.holdout.empty()) {
    throw InvalidArgument(str_cat("top ", k, " classes cover all ", ds.size(),
                                  " records; the holdout would be empty"));
  }
  return s;
}

AuxKnowledge sample_aux_knowledge(const MembershipSplit& split, double train_frac,
                                  double test_frac, std::uint64_t seed) {
  for (double f : {train_frac, test_frac}) {
    if (!(f >= 0 && f <= 1)) throw InvalidArgument(str_cat("aux fraction must lie in [0,1], got ", f));
  }
  auto pick = [](const std::vector<std::size_t>& from, double f, Rng rng) {
    auto count = static_cast<std::size_t>(std::floor(f * static_cast<double>(from.size()) + 1e-9));
    std::vector<std::size_t> v = from;
    rng.shuffle(std::span<std::size_t>(v));
    v.resize(count);
    std::sort(v.begin(), v.end());
    return v;
  };
  AuxKnowledge a;
  a.known_members = pick(split.train, train_frac, Rng::derive(seed, "aux_members", 0));
  a.known_nonmembers = pick(split.holdout, test_frac, Rng::derive(seed, "aux_nonmembers", 0));
  return a;
}

GENLEAK_NAMESPACE_END
