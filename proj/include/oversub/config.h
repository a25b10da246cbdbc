// Copyright 2026 The oversub Authors.
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

#ifndef OVERSUB_CONFIG_H_
#define OVERSUB_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace oversub {

// Plain-text configuration, a small subset of TOML:
//
//   file    := { line }
//   line    := ws ( section | pair | "" ) ws [ "#" comment ] "\n"
//   section := "[" name "]"
//   pair    := name ws "=" ws value
//   name    := [A-Za-z0-9_.-]+
//   value   := string | number | bool | array
//   string  := '"' { char | '\"' | '\\' } '"'
//   number  := integer | float          (as understood by std::from_chars)
//   bool    := "true" | "false"
//   array   := "[" [ scalar { "," scalar } ] "]"   (one line, no nesting)
//
// Keys before the first section belong to the "" section. Duplicate
// sections or keys are errors.
class ConfigValue {
 public:
  using Scalar = std::variant<bool, std::int64_t, double, std::string>;
  using Array = std::vector<Scalar>;

  ConfigValue() = default;
  explicit ConfigValue(Scalar s) : value_(std::move(s)) {}
  explicit ConfigValue(Array a) : value_(std::move(a)) {}

  bool is_array() const { return std::holds_alternative<Array>(value_); }
  const std::variant<Scalar, Array>& raw() const { return value_; }

 private:
  std::variant<Scalar, Array> value_;
};

class ConfigDocument {
 public:
  /// Throws ConfigError naming `source` and the line.
  static ConfigDocument parse(std::istream& in, const std::string& source = "config");
  static ConfigDocument load(const std::filesystem::path& path);

  const std::string& source() const { return source_; }
  bool has(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& section) const;

  // Typed getters throw ConfigError on a type mismatch. An integer is
  // accepted where a float is expected.
  std::optional<std::string> get_string(const std::string& section, const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& section, const std::string& key) const;
  std::optional<double> get_double(const std::string& section, const std::string& key) const;
  std::optional<bool> get_bool(const std::string& section, const std::string& key) const;
  std::optional<std::vector<std::string>> get_strings(const std::string& section,
                                                      const std::string& key) const;

  /// "section.key" for every entry never read by a getter.
  std::vector<std::string> unused_keys() const;

  /// Sorted "section.key = value" lines; stable across formatting changes.
  std::string canonical() const;

 private:
  const ConfigValue* find(const std::string& section, const std::string& key) const;
  [[noreturn]] void type_error(const std::string& section, const std::string& key,
                               const char* expected) const;

  std::string source_;
  std::map<std::string, std::map<std::string, ConfigValue>> sections_;
  mutable std::set<std::pair<std::string, std::string>> used_;
};

}  // namespace oversub

#endif  // OVERSUB_CONFIG_H_
