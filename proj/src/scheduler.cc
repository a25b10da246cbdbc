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


#include "oversub/scheduler.h"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <sstream>

#include "csv.h"
#include "oversub/errors.h"

namespace oversub {

std::string_view Policy::name() const {
  switch (kind) {
    case PolicyKind::kNone:
      return "none";
    case PolicyKind::kSingle:
      return "single";
    case PolicyKind::kCoach:
      return "coach";
    case PolicyKind::kAggressive:
      return "aggr";
  }
  return "?";
}

std::optional<Policy> parse_policy(std::string_view name) {
  if (name == "none") return Policy::none();
  if (name == "single") return Policy::single();
  if (name == "coach") return Policy::coach();
  if (name == "aggr" || name == "aggressive") return Policy::aggressive();
  return std::nullopt;
}

Assignment PlacementLog::assignment(std::size_t num_vms) const {
  Assignment a(num_vms);
  for (const Placement& p : entries) {
    if (p.vm < num_vms) a[p.vm] = p.server;
  }
  return a;
}

namespace {

struct Event {
  std::int64_t time;
  bool arrival;
  std::size_t vm;
};

// Departures sort before arrivals at the same instant.
bool event_less(const Event& a, const Event& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.arrival != b.arrival) return !a.arrival;
  return a.vm < b.vm;
}

PlacementSummary summarize(const std::vector<Placement>& entries, const TraceSet& trace) {
  PlacementSummary s;
  std::vector<Event> events;
  std::vector<bool> touched(trace.servers().size(), false);
  for (const Placement& p : entries) {
    ++s.arrivals;
    if (!p.server) {
      ++s.rejected;
      continue;
    }
    const VMRecord& vm = trace.vms()[p.vm];
    ++s.hosted;
    if (p.allocation.predicted) ++s.predicted;
    s.hosted_core_hours += at(vm.requested, Resource::kCpu) * vm.duration_hours();
    s.hosted_gb_hours += at(vm.requested, Resource::kMem) * vm.duration_hours();
    touched[*p.server] = true;
    events.push_back({vm.start, true, p.vm});
    events.push_back({vm.end, false, p.vm});
  }
  s.servers_touched = static_cast<std::size_t>(std::count(touched.begin(), touched.end(), true));

  std::vector<std::size_t> server_of(trace.vms().size());
  for (const Placement& p : entries) {
    if (p.server) server_of[p.vm] = *p.server;
  }
  std::sort(events.begin(), events.end(), event_less);
  std::vector<int> resident(trace.servers().size(), 0);
  std::size_t nonempty = 0;
  for (const Event& e : events) {
    int& n = resident[server_of[e.vm]];
    if (e.arrival) {
      if (n++ == 0) ++nonempty;
    } else if (--n == 0) {
      --nonempty;
    }
    s.peak_nonempty_servers = std::max(s.peak_nonempty_servers, nonempty);
  }
  return s;
}

}  // namespace

PlacementLog schedule(const TraceSet& trace, const UtilizationPredictor* predictor,
                      const Policy& policy, const ScheduleOptions& options) {
  check_window_hours(policy.window_hours);
  if (trace.servers().empty()) throw ConfigError("cannot schedule onto an empty fleet");
  if (policy.oversubscribes()) {
    if (!predictor) throw ConfigError("policy " + std::string(policy.name()) + " needs a predictor");
    if (predictor->window_hours() != policy.window_hours) {
      throw ConfigError("predictor windows do not match the policy");
    }
  }

  std::vector<ServerState> servers;
  servers.reserve(trace.servers().size());
  for (const ServerInfo& s : trace.servers()) {
    servers.emplace_back(capacity_units(s.capacity, options.granularity), policy.window_hours,
                         options.backing_ratio);
  }

  std::vector<Event> events;
  for (std::size_t v = 0; v < trace.vms().size(); ++v) {
    const VMRecord& vm = trace.vms()[v];
    if (vm.start < options.begin) continue;
    events.push_back({vm.start, true, v});
    events.push_back({vm.end, false, v});
  }
  std::sort(events.begin(), events.end(), event_less);

  PlacementLog log;
  log.policy = policy;
  log.trace_fingerprint = trace.fingerprint();
  std::vector<std::optional<std::size_t>> host(trace.vms().size());

  for (const Event& e : events) {
    const VMRecord& vm = trace.vms()[e.vm];
    if (!e.arrival) {
      if (host[e.vm]) servers[*host[e.vm]].remove(e.vm);
    } else {
      Placement p;
      p.time = e.time;
      p.vm = e.vm;
      std::optional<TimeWindowProfile> profile;
      if (policy.oversubscribes()) {
        profile = predictor->predict(vm, policy.percentile);
        if (profile) p.level = predictor->group_level(vm);
      }
      p.allocation = build_allocation(profile, vm, policy.window_hours, options.granularity);

      std::optional<double> best;
      for (std::size_t s = 0; s < servers.size(); ++s) {
        const std::optional<double> score = servers[s].fit_score(p.allocation);
        if (score && (!best || *score < *best)) {
          best = score;
          p.server = s;
        }
      }
      if (p.server) {
        servers[*p.server].add(e.vm, p.allocation);
        host[e.vm] = p.server;
      }
      log.entries.push_back(std::move(p));
    }
    if (options.observer) options.observer(e.time, servers);
  }
  log.summary = summarize(log.entries, trace);
  return log;
}

CapacityGain capacity_gain(const PlacementLog& baseline, const PlacementLog& other) {
  if (baseline.trace_fingerprint != other.trace_fingerprint) {
    throw DataError("placement logs come from different traces");
  }
  auto pct = [](double base, double x) { return base > 0 ? (x - base) / base * 100.0 : 0.0; };
  const PlacementSummary& b = baseline.summary;
  const PlacementSummary& o = other.summary;
  return {pct(b.hosted_core_hours, o.hosted_core_hours), pct(b.hosted_gb_hours, o.hosted_gb_hours),
          pct(static_cast<double>(b.hosted), static_cast<double>(o.hosted))};
}

namespace {

constexpr std::string_view kRejected = "REJECTED";

std::string placement_header() {
  std::string h = "policy,time_unix,vm_id,server_id,group_level,window_hours,predicted";
  for (Resource r : kAllResources) {
    const std::string n(resource_name(r));
    h += "," + n + "_requested_units," + n + "_guaranteed_units," + n + "_va_units," + n +
         "_peak_units";
  }
  return h;
}

void write_row(std::ostream& out, const auto& row) {
  bool first = true;
  for (std::int64_t v : row) {
    if (!first) out << ' ';
    out << v;
    first = false;
  }
}

std::optional<GroupLevel> parse_level(std::string_view s) {
  for (GroupLevel l :
       {GroupLevel::kSubscriptionConfig, GroupLevel::kSubscription, GroupLevel::kConfig}) {
    if (group_level_name(l) == s) return l;
  }
  return std::nullopt;
}

std::vector<std::int64_t> parse_units(const csv::Reader& in, std::size_t i, std::string_view what) {
  std::vector<std::int64_t> out;
  std::string_view f = in.field(i);
  while (!f.empty()) {
    const auto space = f.find(' ');
    const std::string_view tok = f.substr(0, space);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) {
      in.fail_field(what, "not a unit list: '" + std::string(in.field(i)) + "'");
    }
    out.push_back(v);
    if (space == std::string_view::npos) break;
    f.remove_prefix(space + 1);
  }
  return out;
}

}  // namespace

void write_placement_log(const PlacementLog& log, const TraceSet& trace, std::ostream& out) {
  out << placement_header() << '\n';
  for (const Placement& p : log.entries) {
    const HybridAllocation& a = p.allocation;
    out << log.policy.name() << ',' << p.time << ',' << trace.vms()[p.vm].vm_id << ','
        << (p.server ? std::string_view(trace.servers()[*p.server].server_id) : kRejected) << ','
        << (p.level ? group_level_name(*p.level) : std::string_view("none")) << ','
        << a.window_hours << ',' << (a.predicted ? 1 : 0);
    for (int r = 0; r < kNumResources; ++r) {
      out << ',' << a.requested(r) << ',' << a.guaranteed(r) << ',';
      write_row(out, a.va.row(r));
      out << ',';
      write_row(out, a.peak.row(r));
    }
    out << '\n';
  }
}

PlacementLog read_placement_log(std::istream& in, const TraceSet& trace, const std::string& name) {
  csv::Reader reader(in, name, placement_header());
  PlacementLog log;
  log.trace_fingerprint = trace.fingerprint();
  std::optional<Policy> policy;
  while (reader.next()) {
    reader.expect_fields(7 + 4 * kNumResources);
    const auto pol = parse_policy(reader.field(0));
    if (!pol) reader.fail_field("policy", "unknown policy");
    if (policy && policy->kind != pol->kind) reader.fail_field("policy", "mixed policies");
    policy = pol;
    Placement p;
    p.time = reader.integer(1, "time_unix");
    const auto vm = trace.find(reader.field(2));
    if (!vm) reader.fail_field("vm_id", "unknown VM '" + std::string(reader.field(2)) + "'");
    p.vm = *vm;
    if (reader.field(3) != kRejected) {
      const auto& servers = trace.servers();
      auto it = std::find_if(servers.begin(), servers.end(),
                             [&](const ServerInfo& s) { return s.server_id == reader.field(3); });
      if (it == servers.end()) reader.fail_field("server_id", "unknown server");
      p.server = static_cast<std::size_t>(it - servers.begin());
    }
    if (reader.field(4) != "none") {
      p.level = parse_level(reader.field(4));
      if (!p.level) reader.fail_field("group_level", "unknown level");
    }
    HybridAllocation& a = p.allocation;
    a.window_hours = static_cast<int>(reader.integer(5, "window_hours"));
    if (a.window_hours <= 0 || 24 % a.window_hours) reader.fail_field("window_hours", "not a divisor of 24");
    a.predicted = reader.integer(6, "predicted") != 0;
    const int windows = 24 / a.window_hours;
    a.va.resize(kNumResources, windows);
    a.peak.resize(kNumResources, windows);
    for (int r = 0; r < kNumResources; ++r) {
      const std::size_t base = 7 + 4 * static_cast<std::size_t>(r);
      a.requested(r) = reader.integer(base, "requested_units");
      a.guaranteed(r) = reader.integer(base + 1, "guaranteed_units");
      const auto va = parse_units(reader, base + 2, "va_units");
      const auto peak = parse_units(reader, base + 3, "peak_units");
      if (std::ssize(va) != windows || std::ssize(peak) != windows) {
        reader.fail_field("va_units", "expected " + std::to_string(windows) + " windows");
      }
      for (int t = 0; t < windows; ++t) {
        a.va(r, t) = va[t];
        a.peak(r, t) = peak[t];
      }
    }
    try {
      a.validate();
    } catch (const InvariantError& e) {
      reader.fail(e.what());
    }
    log.entries.push_back(std::move(p));
  }
  log.policy = policy.value_or(Policy::none());
  if (!log.entries.empty()) log.policy.window_hours = log.entries.front().allocation.window_hours;
  log.summary = summarize(log.entries, trace);
  return log;
}

}  // namespace oversub
