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


#ifndef OVERSUB_SCHEDULER_H_
#define OVERSUB_SCHEDULER_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oversub/characterize.h"
#include "oversub/hybrid.h"
#include "oversub/predict.h"
#include "oversub/trace.h"

namespace oversub {

enum class PolicyKind { kNone, kSingle, kCoach, kAggressive };

struct Policy {
  PolicyKind kind = PolicyKind::kNone;
  int percentile = 0;     // unused for kNone
  int window_hours = 24;

  static Policy none() { return {PolicyKind::kNone, 0, 24}; }
  /// One daily window at P95: a static per-VM oversubscription rate.
  static Policy single() { return {PolicyKind::kSingle, 95, 24}; }
  /// P95 over six 4-hour windows.
  static Policy coach() { return {PolicyKind::kCoach, 95, 4}; }
  static Policy aggressive() { return {PolicyKind::kAggressive, 50, 4}; }

  bool oversubscribes() const { return kind != PolicyKind::kNone; }
  std::string_view name() const;
};

/// Accepts none, single, coach, aggr (or aggressive).
std::optional<Policy> parse_policy(std::string_view name);

struct Placement {
  std::int64_t time = 0;
  std::size_t vm = 0;                 // index into TraceSet::vms()
  std::optional<std::size_t> server;  // nullopt: rejected
  std::optional<GroupLevel> level;    // group used for the prediction
  HybridAllocation allocation;
};

struct PlacementSummary {
  std::size_t arrivals = 0;
  std::size_t hosted = 0;
  std::size_t rejected = 0;
  std::size_t predicted = 0;  // hosted with an oversubscribed profile
  std::size_t servers_touched = 0;
  std::size_t peak_nonempty_servers = 0;
  double hosted_core_hours = 0;
  double hosted_gb_hours = 0;
};

struct PlacementLog {
  Policy policy;
  std::string trace_fingerprint;
  std::vector<Placement> entries;  // arrivals in event order
  PlacementSummary summary;

  /// Hosting server per VM; VMs never scheduled or rejected are nullopt.
  Assignment assignment(std::size_t num_vms) const;
};

struct ScheduleOptions {
  Granularity granularity;
  double backing_ratio = 1.0;
  /// Only VMs arriving at or after this time are scheduled.
  std::int64_t begin = std::numeric_limits<std::int64_t>::min();
  /// Called after every arrival and departure with the whole fleet.
  std::function<void(std::int64_t time, std::span<const ServerState>)> observer;
};

/// Event-driven best-fit placement. Arrivals get a profile from the
/// predictor (none policy: full request) and go to the server whose
/// tightest normalized slack after placement is smallest, lowest index on
/// ties. Departures precede arrivals at equal times.
PlacementLog schedule(const TraceSet& trace, const UtilizationPredictor* predictor,
                      const Policy& policy, const ScheduleOptions& options = {});

/// Percent more hosted resource-hours and VMs than the baseline.
struct CapacityGain {
  double core_hours_pct = 0;
  double gb_hours_pct = 0;
  double vm_count_pct = 0;
};

/// Throws DataError when the logs come from different traces.
CapacityGain capacity_gain(const PlacementLog& baseline, const PlacementLog& other);

/// CSV: one row per arrival with the allocation snapshot in units.
void write_placement_log(const PlacementLog& log, const TraceSet& trace, std::ostream& out);
PlacementLog read_placement_log(std::istream& in, const TraceSet& trace,
                                const std::string& name = "placements.csv");

}  // namespace oversub

#endif  // OVERSUB_SCHEDULER_H_
