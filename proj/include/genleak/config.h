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

#ifndef GENLEAK_CONFIG_H_
#define GENLEAK_CONFIG_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "genleak/common.h"

GENLEAK_NAMESPACE_BEGIN

// Sectioned key-value text format with typed scalars; the grammar is in
// docs/config-format.md. Example:
//
//   seed = 7
//   [target]
//   family = "gan"
//   lr = 2e-4
//   hidden = [128, 128]
//
// Values remember their source position so that type errors and unknown keys
// can be reported as "line:column".

struct SourcePos {
  int line = 0;
  int column = 0;
};

class ConfigValue {
 public:
  using List = std::vector<ConfigValue>;
  using Storage = std::variant<std::int64_t, double, bool, std::string, List>;

  ConfigValue() = default;
  ConfigValue(Storage v, SourcePos pos = {}) : value_(std::move(v)), pos_(pos) {}

  bool is_int() const { return std::holds_alternative<std::int64_t>(value_); }
  bool is_float() const { return std::holds_alternative<double>(value_); }
  bool is_number() const { return is_int() || is_float(); }
  bool is_bool() const { return std::holds_alternative<bool>(value_); }
  bool is_string() const { return std::holds_alternative<std::string>(value_); }
  bool is_list() const { return std::holds_alternative<List>(value_); }

  // Accessors throw ConfigError naming the position on a type mismatch.
  // as_double() accepts integers.
  std::int64_t as_int() const;
  double as_double() const;
  bool as_bool() const;
  const std::string& as_string() const;
  const List& as_list() const;

  const Storage& storage() const { return value_; }
  SourcePos pos() const { return pos_; }
  std::string type_name() const;

  // Text form that parses back to an equal value. Floats use the shortest
  // round-trip representation.
  std::string to_text() const;

  friend bool operator==(const ConfigValue& a, const ConfigValue& b) {
    return a.value_ == b.value_;
  }

 private:
  Storage value_ = std::int64_t{0};
  SourcePos pos_;
};

// Keys of one section in file order. Lookups mark keys as used so that
// reject_unused() can flag typos.
class ConfigSection {
 public:
  ConfigSection() = default;
  explicit ConfigSection(std::string name, SourcePos pos = {})
      : name_(std::move(name)), pos_(pos) {}

  const std::string& name() const { return name_; }
  SourcePos pos() const { return pos_; }

  void set(const std::string& key, ConfigValue value);
  bool has(const std::string& key) const;
  const ConfigValue* find(const std::string& key) const;
  const ConfigValue& at(const std::string& key) const;

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  std::vector<double> fallback) const;
  std::vector<std::int64_t> get_ints(const std::string& key,
                                     std::vector<std::int64_t> fallback) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       std::vector<std::string> fallback) const;

  const std::vector<std::string>& keys() const { return order_; }
  // Throws ConfigError for the first key that no accessor has read.
  void reject_unused() const;
  void mark_all_used() const;

 private:
  std::string name_;
  SourcePos pos_;
  std::vector<std::string> order_;
  std::map<std::string, ConfigValue> values_;
  mutable std::set<std::string> used_;
};

class ConfigDocument {
 public:
  // The unnamed section holds keys that precede the first header.
  ConfigSection& root() { return section(""); }
  const ConfigSection& root() const;

  ConfigSection& section(const std::string& name);
  const ConfigSection* find_section(const std::string& name) const;
  bool has_section(const std::string& name) const;
  std::vector<std::string> section_names() const { return order_; }

  // Throws ConfigError for sections outside `allowed` and for unused keys in
  // every section.
  void reject_unknown(const std::vector<std::string>& allowed) const;

  std::string to_text() const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, ConfigSection> sections_;
};

// Throws ConfigError with "line:column: message" on malformed input.
ConfigDocument parse_config(std::string_view text);
ConfigDocument load_config_file(const std::string& path);

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_CONFIG_H_
