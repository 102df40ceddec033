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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "transclip/solver.hpp"

namespace transclip {

// Value of a top-level key in a flat TOML document.
using TomlValue = std::variant<std::string, std::int64_t, double, bool, std::vector<std::string>>;
using TomlTable = std::map<std::string, TomlValue>;

// Parses `key = value` lines: strings, integers, floats, booleans and
// single-line string arrays. Tables and inline tables are rejected.
TomlTable parse_flat_toml(const std::string& text, const std::string& origin = "<config>");

// Run configuration file keys. Relative paths resolve against the file's directory.
struct RunConfig {
  std::filesystem::path features_path;
  std::filesystem::path anchors_path;
  std::optional<std::filesystem::path> labels_path;
  std::optional<double> temperature;
  std::vector<std::string> class_names;
  std::size_t prompts_per_class = 1;
  SolverConfig solver;

  static RunConfig from_table(const TomlTable& table, const std::filesystem::path& base_dir,
                              const std::string& origin);
  static RunConfig load(const std::filesystem::path& path);

  std::string to_toml() const;
};

}  // namespace transclip
