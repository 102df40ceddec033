// Copyright 2026 The transclip Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "transclip/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "transclip/errors.hpp"

namespace transclip {

namespace {

class LineParser {
 public:
  LineParser(const std::string& line, const std::string& origin, std::size_t lineno)
      : s_(line), origin_(origin), lineno_(lineno) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(fmt::format("{}:{}: {}", origin_, lineno_, what));
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#' || s_[pos_] == '\r';
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  std::string parse_key() {
    skip_ws();
    if (peek() == '"' || peek() == '\'') return parse_string();
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '-')) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a key");
    if (peek() == '.') fail("dotted keys are not supported");
    return s_.substr(start, pos_ - start);
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string parse_string() {
    const char quote = peek();
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != quote) {
      char c = s_[pos_++];
      if (quote == '"' && c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  TomlValue parse_value() {
    skip_ws();
    const char c = peek();
    if (c == '"' || c == '\'') return parse_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != '#' && s_[pos_] != ',' && s_[pos_] != ']' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      ++pos_;
    }
    std::string tok = s_.substr(start, pos_ - start);
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char ch : tok) {
      if (ch != '_') digits.push_back(ch);
    }
    if (digits.empty()) fail("expected a value");
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    const char* last = digits.data() + digits.size();
    if (is_float) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) fail("invalid number '" + tok + "'");
      return v;
    }
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail("invalid value '" + tok + "'");
    return v;
  }

  TomlValue parse_array() {
    ++pos_;
    std::vector<std::string> items;
    for (;;) {
      skip_ws();
      if (peek() == ']') {
        ++pos_;
        return items;
      }
      if (peek() != '"' && peek() != '\'') fail("only arrays of strings are supported");
      items.push_back(parse_string());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

 private:
  const std::string& s_;
  const std::string& origin_;
  std::size_t lineno_;
  std::size_t pos_ = 0;
};

class TableReader {
 public:
  TableReader(const TomlTable& table, std::string origin) : table_(table), origin_(std::move(origin)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(fmt::format("{}: key '{}' {}", origin_, key, what));
  }

  const TomlValue* find(const std::string& key) const {
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second;
  }

  std::optional<std::string> string(const std::string& key) const {
    const TomlValue* v = find(key);
    if (!v) return std::nullopt;
    if (auto s = std::get_if<std::string>(v)) return *s;
    fail(key, "must be a string");
  }

  std::optional<double> number(const std::string& key) const {
    const TomlValue* v = find(key);
    if (!v) return std::nullopt;
    if (auto d = std::get_if<double>(v)) return *d;
    if (auto i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
    fail(key, "must be a number");
  }

  std::optional<std::int64_t> integer(const std::string& key) const {
    const TomlValue* v = find(key);
    if (!v) return std::nullopt;
    if (auto i = std::get_if<std::int64_t>(v)) return *i;
    fail(key, "must be an integer");
  }

  std::optional<std::size_t> count(const std::string& key) const {
    auto v = integer(key);
    if (!v) return std::nullopt;
    if (*v < 0) fail(key, "must be non-negative");
    return static_cast<std::size_t>(*v);
  }

 private:
  const TomlTable& table_;
  std::string origin_;
};

const char* const kKnownKeys[] = {
    "features_path", "anchors_path", "labels_path", "temperature", "knn",
    "laplacian_weight", "inner_iters", "outer_iters", "tolerance", "seed",
    "n_confident", "prompts_per_class", "class_names", "variance_floor"};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

TomlTable parse_flat_toml(const std::string& text, const std::string& origin) {
  TomlTable table;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    LineParser p(line, origin, lineno);
    if (p.at_end_or_comment()) continue;
    if (p.peek() == '[') p.fail("tables are not supported in a flat configuration");
    const std::string key = p.parse_key();
    p.expect('=');
    TomlValue value = p.parse_value();
    if (!p.at_end_or_comment()) p.fail("trailing characters after value");
    if (!table.emplace(key, std::move(value)).second) p.fail("duplicate key '" + key + "'");
  }
  return table;
}

RunConfig RunConfig::from_table(const TomlTable& table, const std::filesystem::path& base_dir,
                                const std::string& origin) {
  for (const auto& [key, _] : table) {
    bool known = false;
    for (const char* k : kKnownKeys) known = known || key == k;
    if (!known) throw ConfigError(fmt::format("{}: unknown key '{}'", origin, key));
  }
  const TableReader r(table, origin);
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  RunConfig c;
  if (auto v = r.string("features_path")) c.features_path = resolve(*v);
  if (auto v = r.string("anchors_path")) c.anchors_path = resolve(*v);
  if (auto v = r.string("labels_path")) c.labels_path = resolve(*v);
  c.temperature = r.number("temperature");
  if (auto v = r.count("knn")) c.solver.knn = *v;
  if (auto v = r.number("laplacian_weight")) c.solver.laplacian_weight = *v;
  if (auto v = r.count("inner_iters")) c.solver.inner_iters = *v;
  if (auto v = r.count("outer_iters")) c.solver.outer_iters = *v;
  if (auto v = r.number("tolerance")) c.solver.tolerance = *v;
  if (auto v = r.integer("seed")) c.solver.seed = *v;
  if (auto v = r.count("n_confident")) c.solver.n_confident = *v;
  if (auto v = r.number("variance_floor")) c.solver.variance_floor = *v;
  if (auto v = r.count("prompts_per_class")) c.prompts_per_class = *v;
  if (const TomlValue* v = r.find("class_names")) {
    auto names = std::get_if<std::vector<std::string>>(v);
    if (!names) r.fail("class_names", "must be an array of strings");
    c.class_names = *names;
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_table(parse_flat_toml(buf.str(), path.string()), path.parent_path(), path.string());
}

std::string RunConfig::to_toml() const {
  std::string out;
  out += "features_path = " + quote(features_path.generic_string()) + "\n";
  out += "anchors_path = " + quote(anchors_path.generic_string()) + "\n";
  if (labels_path) out += "labels_path = " + quote(labels_path->generic_string()) + "\n";
  if (temperature) out += fmt::format("temperature = {}\n", *temperature);
  if (!class_names.empty()) {
    out += "class_names = [";
    for (std::size_t i = 0; i < class_names.size(); ++i) {
      out += (i ? ", " : "") + quote(class_names[i]);
    }
    out += "]\n";
  }
  out += fmt::format("knn = {}\n", solver.knn);
  out += fmt::format("laplacian_weight = {:.17g}\n", solver.laplacian_weight);
  out += fmt::format("inner_iters = {}\n", solver.inner_iters);
  out += fmt::format("outer_iters = {}\n", solver.outer_iters);
  out += fmt::format("tolerance = {:e}\n", solver.tolerance);
  out += fmt::format("seed = {}\n", solver.seed);
  return out;
}

}  // namespace transclip
