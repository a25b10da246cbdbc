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
#ifndef OVERSUB_TRACE_H_
#define OVERSUB_TRACE_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "oversub/resources.h"

namespace oversub {

inline constexpr std::int64_t kSampleSeconds = 300;
inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr std::int64_t kSecondsPerDay = 86400;

/// UTC day number of a Unix timestamp.
constexpr std::int64_t day_of(std::int64_t t) {
  return t >= 0 ? t / kSecondsPerDay : -((-t + kSecondsPerDay - 1) / kSecondsPerDay);
}

/// Index of the daily time window containing t.
constexpr int window_of(std::int64_t t, int window_hours) {
  const std::int64_t sod = t - day_of(t) * kSecondsPerDay;
  return static_cast<int>(sod / (window_hours * kSecondsPerHour));
}

/// Throws ConfigError unless window_hours is a positive divisor of 24.
void check_window_hours(int window_hours);

enum class Offering { kIaas, kPaas };

std::string_view offering_name(Offering o);

struct VMRecord {
  std::string vm_id;
  std::string subscription_id;
  std::string vm_config;
  ResourceVector requested = ResourceVector::Zero();
  std::int64_t start = 0;  // Unix seconds, inclusive
  std::int64_t end = 0;    // Unix seconds, exclusive
  Offering offering = Offering::kIaas;

  /// 0 = Monday ... 6 = Sunday, from the UTC allocation day.
  int weekday_of_allocation() const;
  double duration_hours() const {
    return static_cast<double>(end - start) / kSecondsPerHour;
  }

  bool operator==(const VMRecord& o) const;
};

/// Per-5-minute maximum utilization, percent of the VM's requested amount.
/// Sample i covers [start + i*300, start + (i+1)*300).
struct UtilizationSeries {
  std::string vm_id;
  Resource resource = Resource::kCpu;
  std::int64_t start = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  std::int64_t timestamp(std::size_t i) const {
    return start + static_cast<std::int64_t>(i) * kSampleSeconds;
  }
  std::int64_t end() const { return timestamp(values.size()); }
  bool covers(std::int64_t t) const { return t >= start && t < end(); }
  /// Sample whose interval contains t; t must be covered.
  double at(std::int64_t t) const {
    return values[static_cast<std::size_t>((t - start) / kSampleSeconds)];
  }

  bool operator==(const UtilizationSeries& o) const = default;
};

using VmSeries = std::array<UtilizationSeries, kNumResources>;

struct ServerInfo {
  std::string server_id;
  std::string cluster_id;
  ResourceVector capacity = ResourceVector::Zero();

  bool operator==(const ServerInfo& o) const;
};

/// Validated, immutable set of VMs, their utilization, and the server fleet.
class TraceSet {
 public:
  TraceSet() = default;
  /// Validates every invariant; throws DataError naming the offending record.
  TraceSet(std::vector<VMRecord> vms, std::vector<VmSeries> series,
           std::vector<ServerInfo> servers);

  const std::vector<VMRecord>& vms() const { return vms_; }
  const std::vector<ServerInfo>& servers() const { return servers_; }
  const VmSeries& series_of(std::size_t vm) const { return series_[vm]; }
  const UtilizationSeries& series(std::size_t vm, Resource r) const {
    return series_[vm][index(r)];
  }
  std::optional<std::size_t> find(std::string_view vm_id) const;

  bool empty() const { return vms_.empty(); }
  std::int64_t begin_time() const { return begin_; }
  std::int64_t end_time() const { return end_; }
  /// SHA-256 over VM metadata and the fleet; identifies the trace in logs.
  const std::string& fingerprint() const { return fingerprint_; }

  bool operator==(const TraceSet& o) const;

 private:
  std::vector<VMRecord> vms_;
  std::vector<VmSeries> series_;
  std::vector<ServerInfo> servers_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::int64_t begin_ = 0;
  std::int64_t end_ = 0;
  std::string fingerprint_;
};

struct TracePaths {
  std::filesystem::path vms;
  std::filesystem::path util;
  std::filesystem::path servers;

  static TracePaths in_dir(const std::filesystem::path& dir);
};

TraceSet parse_trace(const TracePaths& paths);
/// Stream variant; the names are only used in error messages.
TraceSet parse_trace(std::istream& vms, std::istream& util,
                     std::istream& servers,
                     const std::array<std::string, 3>& names = {
                         "vms.csv", "util.csv", "servers.csv"});

void write_trace(const TraceSet& trace, const TracePaths& paths);
void write_trace(const TraceSet& trace, std::ostream& vms, std::ostream& util,
                 std::ostream& servers);

/// Maximum of one daily window on one UTC day.
struct WindowMax {
  std::int64_t day = 0;
  int window = 0;
  double max = 0.0;
  bool complete = false;  // every 5-minute sample of the window present
};

/// Window maxima of a series in time order, including partial windows.
std::vector<WindowMax> window_maxima(const UtilizationSeries& series,
                                     int window_hours);

/// UTC days fully covered by the series, in order.
std::vector<std::int64_t> complete_days(const UtilizationSeries& series);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace oversub

#endif  // OVERSUB_TRACE_H_
