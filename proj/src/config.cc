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


#include "oversub/config.h"

#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>

#include "oversub/errors.h"
#include "oversub/trace.h"

namespace oversub {

namespace {

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
}

class LineParser {
 public:
  LineParser(std::string_view text, const std::string& where) : s_(text), where_(where) {}

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where_ + ": " + msg); }

  void skip_ws() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\r')) ++i_;
  }
  bool at_end() {
    skip_ws();
    return i_ >= s_.size() || s_[i_] == '#';
  }
  bool consume(char c) {
    skip_ws();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }
  std::string name() {
    skip_ws();
    const std::size_t b = i_;
    while (i_ < s_.size() && name_char(s_[i_])) ++i_;
    if (b == i_) fail("expected a name");
    return std::string(s_.substr(b, i_ - b));
  }

  ConfigValue::Scalar scalar() {
    skip_ws();
    if (i_ >= s_.size()) fail("missing value");
    if (s_[i_] == '"') return quoted();
    const std::size_t b = i_;
    while (i_ < s_.size() && !std::strchr(" \t\r,]#", s_[i_])) ++i_;
    const std::string_view tok = s_.substr(b, i_ - b);
    if (tok == "true") return true;
    if (tok == "false") return false;
    const bool floating = tok.find_first_of(".eE") != std::string_view::npos &&
                          tok.find_first_of("xX") == std::string_view::npos;
    if (!floating) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec == std::errc() && p == tok.data() + tok.size()) return v;
    }
    double d = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
    if (ec != std::errc() || p != tok.data() + tok.size() || tok.empty()) {
      fail("cannot parse value '" + std::string(tok) + "'");
    }
    return d;
  }

  ConfigValue value() {
    if (!consume('[')) return ConfigValue(scalar());
    ConfigValue::Array items;
    if (consume(']')) return ConfigValue(std::move(items));
    do {
      items.push_back(scalar());
    } while (consume(','));
    expect(']');
    return ConfigValue(std::move(items));
  }

 private:
  std::string quoted() {
    ++i_;
    std::string out;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\') {
        if (++i_ >= s_.size() || (s_[i_] != '"' && s_[i_] != '\\')) fail("bad escape");
      }
      out += s_[i_++];
    }
    if (i_ >= s_.size()) fail("unterminated string");
    ++i_;
    return out;
  }

  std::string_view s_;
  std::string where_;
  std::size_t i_ = 0;
};

std::string render(const ConfigValue::Scalar& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(v);
        } else {
          std::string out = "\"";
          for (char c : v) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
          }
          return out + "\"";
        }
      },
      s);
}

}  // namespace

ConfigDocument ConfigDocument::parse(std::istream& in, const std::string& source) {
  ConfigDocument doc;
  doc.source_ = source;
  std::string section;
  std::set<std::string> seen_sections;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    LineParser p(line, source + ":" + std::to_string(n));
    if (p.at_end()) continue;
    if (p.consume('[')) {
      section = p.name();
      p.expect(']');
      if (!seen_sections.insert(section).second) p.fail("duplicate section [" + section + "]");
      doc.sections_[section];
    } else {
      const std::string key = p.name();
      p.expect('=');
      ConfigValue v = p.value();
      if (!doc.sections_[section].emplace(key, std::move(v)).second) {
        p.fail("duplicate key '" + key + "'");
      }
    }
    if (!p.at_end()) p.fail("unexpected trailing text");
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse(in, path.string());
}

const ConfigValue* ConfigDocument::find(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  if (k == s->second.end()) return nullptr;
  used_.emplace(section, key);
  return &k->second;
}

bool ConfigDocument::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

bool ConfigDocument::has_section(const std::string& section) const {
  return sections_.count(section) > 0;
}

void ConfigDocument::type_error(const std::string& section, const std::string& key,
                                const char* expected) const {
  throw ConfigError(source_ + ": " + (section.empty() ? "" : section + ".") + key + " must be " +
                    expected);
}

std::optional<std::string> ConfigDocument::get_string(const std::string& section,
                                                      const std::string& key) const {
  const ConfigValue* v = find(section, key);
  if (!v) return std::nullopt;
  const auto* s = std::get_if<ConfigValue::Scalar>(&v->raw());
  if (!s || !std::holds_alternative<std::string>(*s)) type_error(section, key, "a string");
  return std::get<std::string>(*s);
}

std::optional<std::int64_t> ConfigDocument::get_int(const std::string& section,
                                                    const std::string& key) const {
  const ConfigValue* v = find(section, key);
  if (!v) return std::nullopt;
  const auto* s = std::get_if<ConfigValue::Scalar>(&v->raw());
  if (!s || !std::holds_alternative<std::int64_t>(*s)) type_error(section, key, "an integer");
  return std::get<std::int64_t>(*s);
}

std::optional<double> ConfigDocument::get_double(const std::string& section,
                                                 const std::string& key) const {
  const ConfigValue* v = find(section, key);
  if (!v) return std::nullopt;
  const auto* s = std::get_if<ConfigValue::Scalar>(&v->raw());
  if (s && std::holds_alternative<double>(*s)) return std::get<double>(*s);
  if (s && std::holds_alternative<std::int64_t>(*s)) {
    return static_cast<double>(std::get<std::int64_t>(*s));
  }
  type_error(section, key, "a number");
}

std::optional<bool> ConfigDocument::get_bool(const std::string& section,
                                             const std::string& key) const {
  const ConfigValue* v = find(section, key);
  if (!v) return std::nullopt;
  const auto* s = std::get_if<ConfigValue::Scalar>(&v->raw());
  if (!s || !std::holds_alternative<bool>(*s)) type_error(section, key, "true or false");
  return std::get<bool>(*s);
}

std::optional<std::vector<std::string>> ConfigDocument::get_strings(const std::string& section,
                                                                    const std::string& key) const {
  const ConfigValue* v = find(section, key);
  if (!v) return std::nullopt;
  const auto* a = std::get_if<ConfigValue::Array>(&v->raw());
  if (!a) type_error(section, key, "an array of strings");
  std::vector<std::string> out;
  for (const auto& item : *a) {
    if (!std::holds_alternative<std::string>(item)) type_error(section, key, "an array of strings");
    out.push_back(std::get<std::string>(item));
  }
  return out;
}

std::vector<std::string> ConfigDocument::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [section, entries] : sections_) {
    for (const auto& [key, value] : entries) {
      if (!used_.count({section, key})) out.push_back(section.empty() ? key : section + "." + key);
    }
  }
  return out;
}

std::string ConfigDocument::canonical() const {
  std::ostringstream out;
  for (const auto& [section, entries] : sections_) {
    for (const auto& [key, value] : entries) {
      out << (section.empty() ? "" : section + ".") << key << " = ";
      if (const auto* a = std::get_if<ConfigValue::Array>(&value.raw())) {
        out << '[';
        for (std::size_t i = 0; i < a->size(); ++i) out << (i ? ", " : "") << render((*a)[i]);
        out << ']';
      } else {
        out << render(std::get<ConfigValue::Scalar>(value.raw()));
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace oversub
