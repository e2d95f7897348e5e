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

#include "genleak/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

GENLEAK_NAMESPACE_BEGIN

using internal::str_cat;

namespace {

std::string where(SourcePos pos) {
  if (pos.line == 0) return "";
  return str_cat(pos.line, ":", pos.column, ": ");
}

[[noreturn]] void fail(SourcePos pos, const std::string& msg) {
  throw ConfigError(where(pos) + msg);
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, r.ptr);
  // Keep a float marker so the value re-parses as a float.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ConfigDocument parse() {
    ConfigDocument doc;
    ConfigSection* current = &doc.root();
    while (pos_ < text_.size()) {
      skip_blanks();
      if (at_end_of_line()) {
        skip_comment_and_newline();
        continue;
      }
      SourcePos start = here();
      if (peek() == '[') {
        ++pos_;
        ++col_;
        skip_blanks();
        std::string name = parse_section_name();
        skip_blanks();
        expect(']');
        if (doc.has_section(name) && !name.empty()) {
          fail(start, str_cat("duplicate section [", name, "]"));
        }
        current = &doc.section(name);
        *current = ConfigSection(name, start);
      } else {
        std::string key = parse_identifier("key");
        skip_blanks();
        expect('=');
        skip_blanks();
        SourcePos vpos = here();
        ConfigValue value = parse_value(vpos);
        if (current->has(key)) fail(start, str_cat("duplicate key '", key, "'"));
        current->set(key, std::move(value));
      }
      skip_blanks();
      if (!at_end_of_line()) fail(here(), str_cat("unexpected '", peek(), "'"));
      skip_comment_and_newline();
    }
    return doc;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  SourcePos here() const { return {line_, col_}; }

  void advance() {
    ++pos_;
    ++col_;
  }

  void skip_blanks() {
    while (peek() == ' ' || peek() == '\t' || peek() == '\r') advance();
  }

  bool at_end_of_line() const {
    char c = peek();
    return c == '\0' || c == '\n' || c == '#';
  }

  void skip_comment_and_newline() {
    while (pos_ < text_.size() && text_[pos_] != '\n') advance();
    if (pos_ < text_.size()) {
      ++pos_;
      ++line_;
      col_ = 1;
    }
  }

  void expect(char c) {
    if (peek() != c) {
      fail(here(), peek() == '\0' || peek() == '\n'
                       ? str_cat("expected '", c, "' before end of line")
                       : str_cat("expected '", c, "', found '", peek(), "'"));
    }
    advance();
  }

  static bool ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool ident_char(char c) {
    return ident_start(c) || (c >= '0' && c <= '9') || c == '-';
  }

  std::string parse_identifier(const char* what) {
    if (!ident_start(peek())) fail(here(), str_cat("expected ", what));
    std::string s;
    while (ident_char(peek())) {
      s += peek();
      advance();
    }
    return s;
  }

  std::string parse_section_name() {
    std::string name = parse_identifier("section name");
    while (peek() == '.') {
      advance();
      name += "." + parse_identifier("section name");
    }
    return name;
  }

  ConfigValue parse_value(SourcePos vpos) {
    char c = peek();
    if (c == '"') return ConfigValue(parse_string(), vpos);
    if (c == '[') return parse_list(vpos);
    if (ident_start(c)) {
      std::string word = parse_identifier("value");
      if (word == "true") return ConfigValue(true, vpos);
      if (word == "false") return ConfigValue(false, vpos);
      if (word == "inf") return ConfigValue(HUGE_VAL, vpos);
      fail(vpos, str_cat("bare word '", word, "' is not a value; quote strings"));
    }
    return parse_number(vpos);
  }

  std::string parse_string() {
    SourcePos start = here();
    advance();
    std::string s;
    while (true) {
      char c = peek();
      if (c == '\0' || c == '\n') fail(start, "unterminated string");
      advance();
      if (c == '"') break;
      if (c == '\\') {
        char e = peek();
        advance();
        switch (e) {
          case 'n': s += '\n'; break;
          case 't': s += '\t'; break;
          case '"': s += '"'; break;
          case '\\': s += '\\'; break;
          default: fail(here(), str_cat("unknown escape '\\", e, "'"));
        }
      } else {
        s += c;
      }
    }
    return s;
  }

  ConfigValue parse_list(SourcePos vpos) {
    advance();
    ConfigValue::List items;
    skip_blanks();
    while (peek() != ']') {
      if (at_end_of_line()) fail(vpos, "unterminated list");
      SourcePos ipos = here();
      items.push_back(parse_value(ipos));
      skip_blanks();
      if (peek() == ',') {
        advance();
        skip_blanks();
      } else if (peek() != ']') {
        fail(here(), "expected ',' or ']' in list");
      }
    }
    advance();
    return ConfigValue(std::move(items), vpos);
  }

  ConfigValue parse_number(SourcePos vpos) {
    std::size_t begin = pos_;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      bool ok = (c >= '0' && c <= '9') || c == '.' || c == 'e' || c == 'E' ||
                c == '+' || c == '-' || c == '_';
      if (!ok) break;
      advance();
    }
    std::string tok(text_.substr(begin, pos_ - begin));
    std::string digits;
    for (char ch : tok) {
      if (ch != '_') digits += ch;
    }
    if (digits.empty()) fail(vpos, "expected a value");
    if (digits.find_first_of(".eE") == std::string::npos) {
      std::int64_t v = 0;
      auto r = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (r.ec != std::errc() || r.ptr != digits.data() + digits.size()) {
        fail(vpos, str_cat("malformed integer '", tok, "'"));
      }
      return ConfigValue(v, vpos);
    }
    double v = 0;
    auto r = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (r.ec != std::errc() || r.ptr != digits.data() + digits.size()) {
      fail(vpos, str_cat("malformed number '", tok, "'"));
    }
    return ConfigValue(v, vpos);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

std::int64_t ConfigValue::as_int() const {
  if (!is_int()) fail(pos_, str_cat("expected integer, got ", type_name()));
  return std::get<std::int64_t>(value_);
}

double ConfigValue::as_double() const {
  if (is_int()) return static_cast<double>(std::get<std::int64_t>(value_));
  if (!is_float()) fail(pos_, str_cat("expected number, got ", type_name()));
  return std::get<double>(value_);
}

bool ConfigValue::as_bool() const {
  if (!is_bool()) fail(pos_, str_cat("expected boolean, got ", type_name()));
  return std::get<bool>(value_);
}

const std::string& ConfigValue::as_string() const {
  if (!is_string()) fail(pos_, str_cat("expected string, got ", type_name()));
  return std::get<std::string>(value_);
}

const ConfigValue::List& ConfigValue::as_list() const {
  if (!is_list()) fail(pos_, str_cat("expected list, got ", type_name()));
  return std::get<List>(value_);
}

std::string ConfigValue::type_name() const {
  if (is_int()) return "integer";
  if (is_float()) return "float";
  if (is_bool()) return "boolean";
  if (is_string()) return "string";
  return "list";
}

std::string ConfigValue::to_text() const {
  if (is_int()) return std::to_string(std::get<std::int64_t>(value_));
  if (is_float()) {
    double v = std::get<double>(value_);
    if (std::isinf(v) && v > 0) return "inf";
    return format_double(v);
  }
  if (is_bool()) return std::get<bool>(value_) ? "true" : "false";
  if (is_string()) return quote(std::get<std::string>(value_));
  std::string s = "[";
  const List& items = std::get<List>(value_);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ", ";
    s += items[i].to_text();
  }
  return s + "]";
}

void ConfigSection::set(const std::string& key, ConfigValue value) {
  if (!values_.count(key)) order_.push_back(key);
  values_[key] = std::move(value);
}

bool ConfigSection::has(const std::string& key) const {
  return values_.count(key) > 0;
}

const ConfigValue* ConfigSection::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

const ConfigValue& ConfigSection::at(const std::string& key) const {
  const ConfigValue* v = find(key);
  if (!v) {
    fail(pos_, str_cat("missing key '", key, "'",
                       name_.empty() ? std::string() : " in [" + name_ + "]"));
  }
  return *v;
}

std::int64_t ConfigSection::get_int(const std::string& key,
                                    std::int64_t fallback) const {
  const ConfigValue* v = find(key);
  return v ? v->as_int() : fallback;
}

double ConfigSection::get_double(const std::string& key, double fallback) const {
  const ConfigValue* v = find(key);
  return v ? v->as_double() : fallback;
}

bool ConfigSection::get_bool(const std::string& key, bool fallback) const {
  const ConfigValue* v = find(key);
  return v ? v->as_bool() : fallback;
}

std::string ConfigSection::get_string(const std::string& key,
                                      const std::string& fallback) const {
  const ConfigValue* v = find(key);
  return v ? v->as_string() : fallback;
}

std::vector<double> ConfigSection::get_doubles(const std::string& key,
                                               std::vector<double> fallback) const {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const ConfigValue& item : v->as_list()) out.push_back(item.as_double());
  return out;
}

std::vector<std::int64_t> ConfigSection::get_ints(
    const std::string& key, std::vector<std::int64_t> fallback) const {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  std::vector<std::int64_t> out;
  for (const ConfigValue& item : v->as_list()) out.push_back(item.as_int());
  return out;
}

std::vector<std::string> ConfigSection::get_strings(
    const std::string& key, std::vector<std::string> fallback) const {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  std::vector<std::string> out;
  for (const ConfigValue& item : v->as_list()) out.push_back(item.as_string());
  return out;
}

void ConfigSection::reject_unused() const {
  for (const std::string& key : order_) {
    if (!used_.count(key)) {
      fail(values_.at(key).pos(),
           str_cat("unknown key '", key, "'",
                   name_.empty() ? std::string() : " in [" + name_ + "]"));
    }
  }
}

void ConfigSection::mark_all_used() const {
  for (const std::string& key : order_) used_.insert(key);
}

const ConfigSection& ConfigDocument::root() const {
  static const ConfigSection empty;
  const ConfigSection* s = find_section("");
  return s ? *s : empty;
}

ConfigSection& ConfigDocument::section(const std::string& name) {
  auto it = sections_.find(name);
  if (it == sections_.end()) {
    order_.push_back(name);
    it = sections_.emplace(name, ConfigSection(name)).first;
  }
  return it->second;
}

const ConfigSection* ConfigDocument::find_section(const std::string& name) const {
  auto it = sections_.find(name);
  return it == sections_.end() ? nullptr : &it->second;
}

bool ConfigDocument::has_section(const std::string& name) const {
  return sections_.count(name) > 0;
}

void ConfigDocument::reject_unknown(const std::vector<std::string>& allowed) const {
  for (const std::string& name : order_) {
    if (name.empty()) continue;
    bool ok = false;
    for (const std::string& a : allowed) ok = ok || a == name;
    if (!ok) {
      fail(sections_.at(name).pos(), str_cat("unknown section [", name, "]"));
    }
  }
  for (const std::string& name : order_) sections_.at(name).reject_unused();
}

std::string ConfigDocument::to_text() const {
  std::ostringstream os;
  bool first = true;
  for (const std::string& name : order_) {
    const ConfigSection& s = sections_.at(name);
    if (!name.empty()) {
      if (!first) os << "\n";
      os << "[" << name << "]\n";
    }
    for (const std::string& key : s.keys()) {
      os << key << " = " << s.find(key)->to_text() << "\n";
    }
    first = false;
  }
  return os.str();
}

ConfigDocument parse_config(std::string_view text) { return Parser(text).parse(); }

ConfigDocument load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(str_cat("cannot open config file '", path, "'"));
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(str_cat(path, ":", e.what()));
  }
}

GENLEAK_NAMESPACE_END
