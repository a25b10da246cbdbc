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
#ifndef OVERSUB_SRC_CSV_H_
#define OVERSUB_SRC_CSV_H_

#include <charconv>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "oversub/errors.h"

namespace oversub::csv {

/// Line-oriented reader for the comma-separated files used by the tools.
/// Fields are unquoted; the first line must equal the expected header.
class Reader {
 public:
  Reader(std::istream& in, std::string name, std::string_view header)
      : in_(in), name_(std::move(name)) {
    std::string line;
    if (!next_line(line) || line != header) {
      fail("expected header '" + std::string(header) + "'");
    }
  }

  /// Reads the next non-empty row; false at end of input.
  bool next() {
    while (next_line(line_)) {
      if (line_.empty()) continue;
      fields_.clear();
      std::string_view rest(line_);
      for (;;) {
        auto comma = rest.find(',');
        fields_.push_back(rest.substr(0, comma));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      return true;
    }
    return false;
  }

  void expect_fields(std::size_t n) const {
    if (fields_.size() != n) {
      fail("expected " + std::to_string(n) + " fields, got " +
           std::to_string(fields_.size()));
    }
  }

  std::string_view field(std::size_t i) const { return fields_[i]; }

  std::string text(std::size_t i, std::string_view what) const {
    if (fields_[i].empty()) fail_field(what, "empty value");
    return std::string(fields_[i]);
  }

  std::int64_t integer(std::size_t i, std::string_view what) const {
    std::int64_t v = 0;
    auto f = fields_[i];
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || p != f.data() + f.size()) {
      fail_field(what, "not an integer: '" + std::string(f) + "'");
    }
    return v;
  }

  double number(std::size_t i, std::string_view what) const {
    double v = 0;
    auto f = fields_[i];
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || p != f.data() + f.size()) {
      fail_field(what, "not a number: '" + std::string(f) + "'");
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(name_ + ":" + std::to_string(line_no_) + ": " + msg);
  }
  [[noreturn]] void fail_field(std::string_view field,
                               const std::string& msg) const {
    fail("field " + std::string(field) + ": " + msg);
  }

  std::size_t line_number() const { return line_no_; }

 private:
  bool next_line(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::istream& in_;
  std::string name_;
  std::string line_;
  std::vector<std::string_view> fields_;
  std::size_t line_no_ = 0;
};

}  // namespace oversub::csv

#endif  // OVERSUB_SRC_CSV_H_
