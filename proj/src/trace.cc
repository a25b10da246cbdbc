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
#include "oversub/trace.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "csv.h"
#include "oversub/errors.h"
#include "oversub/hash.h"

namespace oversub {
namespace {

constexpr std::string_view kVmsHeader =
    "vm_id,subscription_id,vm_config,cpu_cores,mem_gb,net_gbps,ssd_gb,"
    "start_unix,end_unix,offering";
constexpr std::string_view kUtilHeader = "vm_id,resource,timestamp_unix,max_util_pct";
constexpr std::string_view kServersHeader =
    "server_id,cluster_id,cpu_cores,mem_gb,net_gbps,ssd_gb";

std::string describe(const VMRecord& vm) { return "vm " + vm.vm_id; }

void validate_vm(const VMRecord& vm) {
  if (vm.vm_id.empty()) throw DataError("vm with empty vm_id");
  if (vm.end <= vm.start) {
    throw DataError(describe(vm) + ": end must be after start");
  }
  if (vm.start % kSampleSeconds != 0 || vm.end % kSampleSeconds != 0) {
    throw DataError(describe(vm) + ": start/end not on the 5-minute grid");
  }
  if (!(at(vm.requested, Resource::kCpu) > 0) ||
      !(at(vm.requested, Resource::kMem) > 0)) {
    throw DataError(describe(vm) + ": requested cpu and mem must be positive");
  }
  if (!all_nonnegative(vm.requested)) {
    throw DataError(describe(vm) + ": negative requested resource");
  }
}

void validate_series(const VMRecord& vm, const UtilizationSeries& s,
                     Resource expected) {
  const std::string what = describe(vm) + " resource " +
                           std::string(resource_name(expected));
  if (s.vm_id != vm.vm_id || s.resource != expected) {
    throw DataError(what + ": series is attached to the wrong vm/resource");
  }
  if (s.start != vm.start) {
    throw DataError(what + ": series gap, missing timestamp " +
                    std::to_string(vm.start));
  }
  if (s.end() != vm.end) {
    if (s.end() < vm.end) {
      throw DataError(what + ": series gap, missing timestamp " +
                      std::to_string(s.end()));
    }
    throw DataError(what + ": samples beyond vm end " + std::to_string(vm.end));
  }
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    double v = s.values[i];
    if (!(v >= 0.0 && v <= 100.0)) {
      throw DataError(what + " at " + std::to_string(s.timestamp(i)) +
                      ": utilization out of [0,100]");
    }
  }
}

}  // namespace

void check_window_hours(int window_hours) {
  if (window_hours <= 0 || 24 % window_hours != 0) {
    throw ConfigError("window hours must divide 24, got " +
                      std::to_string(window_hours));
  }
}

std::string_view offering_name(Offering o) {
  return o == Offering::kPaas ? "paas" : "iaas";
}

int VMRecord::weekday_of_allocation() const {
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  std::int64_t d = (day_of(start) + 3) % 7;
  return static_cast<int>(d < 0 ? d + 7 : d);
}

bool VMRecord::operator==(const VMRecord& o) const {
  return vm_id == o.vm_id && subscription_id == o.subscription_id &&
         vm_config == o.vm_config && (requested == o.requested).all() &&
         start == o.start && end == o.end && offering == o.offering;
}

bool ServerInfo::operator==(const ServerInfo& o) const {
  return server_id == o.server_id && cluster_id == o.cluster_id &&
         (capacity == o.capacity).all();
}

TraceSet::TraceSet(std::vector<VMRecord> vms, std::vector<VmSeries> series,
                   std::vector<ServerInfo> servers)
    : vms_(std::move(vms)),
      series_(std::move(series)),
      servers_(std::move(servers)) {
  if (series_.size() != vms_.size()) {
    throw DataError("every vm needs a series for every resource");
  }
  by_id_.reserve(vms_.size());
  std::ostringstream meta;
  for (std::size_t i = 0; i < vms_.size(); ++i) {
    const VMRecord& vm = vms_[i];
    validate_vm(vm);
    if (!by_id_.emplace(vm.vm_id, i).second) {
      throw DataError("duplicate vm_id " + vm.vm_id);
    }
    for (Resource r : kAllResources) validate_series(vm, series_[i][index(r)], r);
    begin_ = i == 0 ? vm.start : std::min(begin_, vm.start);
    end_ = i == 0 ? vm.end : std::max(end_, vm.end);
    meta << vm.vm_id << ',' << vm.subscription_id << ',' << vm.vm_config;
    for (int k = 0; k < kNumResources; ++k) {
      meta << ',' << format_double(vm.requested(k));
    }
    meta << ',' << vm.start << ',' << vm.end << ',' << offering_name(vm.offering)
         << '\n';
  }
  for (const ServerInfo& s : servers_) {
    if (!all_nonnegative(s.capacity)) {
      throw DataError("server " + s.server_id + ": negative capacity");
    }
    meta << s.server_id << ',' << s.cluster_id;
    for (int k = 0; k < kNumResources; ++k) {
      meta << ',' << format_double(s.capacity(k));
    }
    meta << '\n';
  }
  fingerprint_ = sha256_hex(meta.str());
}

std::optional<std::size_t> TraceSet::find(std::string_view vm_id) const {
  auto it = by_id_.find(std::string(vm_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

bool TraceSet::operator==(const TraceSet& o) const {
  return vms_ == o.vms_ && series_ == o.series_ && servers_ == o.servers_;
}

TracePaths TracePaths::in_dir(const std::filesystem::path& dir) {
  return {dir / "vms.csv", dir / "util.csv", dir / "servers.csv"};
}

TraceSet parse_trace(const TracePaths& paths) {
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open " + p.string());
    return in;
  };
  std::ifstream vms = open(paths.vms);
  std::ifstream util = open(paths.util);
  std::ifstream servers = open(paths.servers);
  return parse_trace(vms, util, servers,
                     {paths.vms.filename().string(),
                      paths.util.filename().string(),
                      paths.servers.filename().string()});
}

TraceSet parse_trace(std::istream& vms_in, std::istream& util_in,
                     std::istream& servers_in,
                     const std::array<std::string, 3>& names) {
  std::vector<VMRecord> vms;
  std::unordered_map<std::string, std::size_t> by_id;
  {
    csv::Reader r(vms_in, names[0], kVmsHeader);
    while (r.next()) {
      r.expect_fields(10);
      VMRecord vm;
      vm.vm_id = r.text(0, "vm_id");
      vm.subscription_id = r.text(1, "subscription_id");
      vm.vm_config = r.text(2, "vm_config");
      static constexpr std::array<std::string_view, 4> kReq = {
          "cpu_cores", "mem_gb", "net_gbps", "ssd_gb"};
      for (int k = 0; k < kNumResources; ++k) {
        vm.requested(k) = r.number(3 + k, kReq[k]);
        if (vm.requested(k) < 0) r.fail_field(kReq[k], "negative amount");
      }
      if (vm.requested(0) <= 0) r.fail_field("cpu_cores", "must be positive");
      if (vm.requested(1) <= 0) r.fail_field("mem_gb", "must be positive");
      vm.start = r.integer(7, "start_unix");
      vm.end = r.integer(8, "end_unix");
      if (vm.start % kSampleSeconds != 0) {
        r.fail_field("start_unix", "not a multiple of 300");
      }
      if (vm.end % kSampleSeconds != 0) {
        r.fail_field("end_unix", "not a multiple of 300");
      }
      if (vm.end <= vm.start) r.fail_field("end_unix", "end must be after start");
      auto off = r.field(9);
      if (off == "iaas") {
        vm.offering = Offering::kIaas;
      } else if (off == "paas") {
        vm.offering = Offering::kPaas;
      } else {
        r.fail_field("offering", "expected iaas or paas");
      }
      if (!by_id.emplace(vm.vm_id, vms.size()).second) {
        r.fail_field("vm_id", "duplicate vm_id " + vm.vm_id);
      }
      vms.push_back(std::move(vm));
    }
  }

  struct Pending {
    std::vector<std::pair<std::int64_t, double>> samples;
  };
  std::vector<std::array<Pending, kNumResources>> pending(vms.size());
  {
    csv::Reader r(util_in, names[1], kUtilHeader);
    while (r.next()) {
      r.expect_fields(4);
      auto it = by_id.find(std::string(r.field(0)));
      if (it == by_id.end()) {
        r.fail_field("vm_id", "unknown vm " + std::string(r.field(0)));
      }
      auto res = parse_resource(r.field(1));
      if (!res) r.fail_field("resource", "unknown resource");
      std::int64_t ts = r.integer(2, "timestamp_unix");
      if (ts % kSampleSeconds != 0) {
        r.fail_field("timestamp_unix", "not a multiple of 300");
      }
      double v = r.number(3, "max_util_pct");
      if (!(v >= 0.0 && v <= 100.0)) {
        r.fail_field("max_util_pct", "utilization out of [0,100]");
      }
      pending[it->second][index(*res)].samples.emplace_back(ts, v);
    }
  }

  std::vector<VmSeries> series(vms.size());
  for (std::size_t i = 0; i < vms.size(); ++i) {
    const VMRecord& vm = vms[i];
    for (Resource res : kAllResources) {
      auto& samples = pending[i][index(res)].samples;
      std::sort(samples.begin(), samples.end());
      UtilizationSeries& s = series[i][index(res)];
      s.vm_id = vm.vm_id;
      s.resource = res;
      s.start = vm.start;
      s.values.reserve(samples.size());
      std::int64_t expect = vm.start;
      for (const auto& [ts, v] : samples) {
        if (ts < vm.start || ts >= vm.end) {
          throw DataError(names[1] + ": vm " + vm.vm_id + " resource " +
                          std::string(resource_name(res)) + ": timestamp " +
                          std::to_string(ts) + " outside vm lifetime");
        }
        if (ts < expect) {
          throw DataError(names[1] + ": vm " + vm.vm_id + " resource " +
                          std::string(resource_name(res)) +
                          ": duplicate timestamp " + std::to_string(ts));
        }
        if (ts > expect) break;
        s.values.push_back(v);
        expect += kSampleSeconds;
      }
      if (expect != vm.end) {
        throw DataError(names[1] + ": vm " + vm.vm_id + " resource " +
                        std::string(resource_name(res)) +
                        ": series gap, missing timestamp " +
                        std::to_string(expect));
      }
    }
  }

  std::vector<ServerInfo> servers;
  {
    csv::Reader r(servers_in, names[2], kServersHeader);
    while (r.next()) {
      r.expect_fields(6);
      ServerInfo s;
      s.server_id = r.text(0, "server_id");
      s.cluster_id = r.text(1, "cluster_id");
      static constexpr std::array<std::string_view, 4> kCap = {
          "cpu_cores", "mem_gb", "net_gbps", "ssd_gb"};
      for (int k = 0; k < kNumResources; ++k) {
        s.capacity(k) = r.number(2 + k, kCap[k]);
        if (s.capacity(k) < 0) r.fail_field(kCap[k], "negative capacity");
      }
      servers.push_back(std::move(s));
    }
  }
  return TraceSet(std::move(vms), std::move(series), std::move(servers));
}

void write_trace(const TraceSet& trace, const TracePaths& paths) {
  auto open = [](const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
  };
  std::ofstream vms = open(paths.vms);
  std::ofstream util = open(paths.util);
  std::ofstream servers = open(paths.servers);
  write_trace(trace, vms, util, servers);
}

void write_trace(const TraceSet& trace, std::ostream& vms, std::ostream& util,
                 std::ostream& servers) {
  vms << kVmsHeader << '\n';
  for (const VMRecord& vm : trace.vms()) {
    vms << vm.vm_id << ',' << vm.subscription_id << ',' << vm.vm_config;
    for (int k = 0; k < kNumResources; ++k) {
      vms << ',' << format_double(vm.requested(k));
    }
    vms << ',' << vm.start << ',' << vm.end << ',' << offering_name(vm.offering)
        << '\n';
  }
  util << kUtilHeader << '\n';
  std::string line;
  for (std::size_t i = 0; i < trace.vms().size(); ++i) {
    for (Resource r : kAllResources) {
      const UtilizationSeries& s = trace.series(i, r);
      for (std::size_t j = 0; j < s.size(); ++j) {
        line.clear();
        line += s.vm_id;
        line += ',';
        line += resource_name(r);
        line += ',';
        line += std::to_string(s.timestamp(j));
        line += ',';
        line += format_double(s.values[j]);
        line += '\n';
        util << line;
      }
    }
  }
  servers << kServersHeader << '\n';
  for (const ServerInfo& s : trace.servers()) {
    servers << s.server_id << ',' << s.cluster_id;
    for (int k = 0; k < kNumResources; ++k) {
      servers << ',' << format_double(s.capacity(k));
    }
    servers << '\n';
  }
}

std::vector<WindowMax> window_maxima(const UtilizationSeries& series,
                                     int window_hours) {
  check_window_hours(window_hours);
  const std::int64_t samples_per_window =
      window_hours * kSecondsPerHour / kSampleSeconds;
  std::vector<WindowMax> out;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::int64_t t = series.timestamp(i);
    const std::int64_t day = day_of(t);
    const int w = window_of(t, window_hours);
    if (out.empty() || out.back().day != day || out.back().window != w) {
      if (!out.empty()) out.back().complete = count == samples_per_window;
      out.push_back({day, w, series.values[i], false});
      count = 0;
    }
    out.back().max = std::max(out.back().max, series.values[i]);
    ++count;
  }
  if (!out.empty()) out.back().complete = count == samples_per_window;
  return out;
}

std::vector<std::int64_t> complete_days(const UtilizationSeries& series) {
  std::vector<std::int64_t> days;
  if (series.size() == 0) return days;
  std::int64_t first = day_of(series.start);
  if (first * kSecondsPerDay < series.start) ++first;
  for (std::int64_t d = first; (d + 1) * kSecondsPerDay <= series.end(); ++d) {
    days.push_back(d);
  }
  return days;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace oversub
