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


#ifndef OVERSUB_SIMULATE_H_
#define OVERSUB_SIMULATE_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "oversub/characterize.h"
#include "oversub/hybrid.h"
#include "oversub/runtime_predictor.h"
#include "oversub/scheduler.h"
#include "oversub/trace.h"

namespace oversub {

enum class MitigationTier { kNone, kTrim, kExtend, kMigrate };
enum class Trigger { kReactive, kProactive };
enum class MitigationKind { kTrim, kExtend, kEvict, kMigrate };

std::string_view tier_name(MitigationTier t);
std::optional<MitigationTier> parse_tier(std::string_view s);
std::string_view trigger_name(Trigger t);
std::optional<Trigger> parse_trigger(std::string_view s);
std::string_view mitigation_kind_name(MitigationKind k);

struct ContentionConfig {
  double cpu_violation_fraction = 0.5;  // of server cores
  double cpu_wait_pct = 0.1;            // monitor: wait above this ...
  double cpu_util_pct = 20.0;           // ... while utilization is above this
  int monitor_period_s = 20;

  /// Throws ConfigError on nonpositive thresholds or a period that does not
  /// divide the 5-minute step.
  void validate() const;
};

struct MitigationConfig {
  MitigationTier tier = MitigationTier::kMigrate;
  Trigger trigger = Trigger::kReactive;
  double cold_fraction = 0.3;
  double trim_gbps = 1.1;
  double extend_gbps = 15.7;
  double migrate_gbps = 1.0;
  double migrate_setup_s = 30.0;
  /// Steps an idle VA page stays resident unless trimmed.
  int residency_steps = 12;
  /// With the migrate tier, also extend before migrating.
  bool migrate_includes_extend = false;
  double slowdown_penalty = 4.0;
  double ewma_alpha = kEwmaAlpha;
  HorizonConfig horizon;

  void validate() const;
  bool allows(MitigationKind k) const;
};

struct SimConfig {
  ContentionConfig contention;
  MitigationConfig mitigation;
  Granularity granularity;
  double backing_ratio = 1.0;
  std::uint64_t seed = 0;  // recorded; the model itself is deterministic
  bool record_timeline = false;
};

struct MitigationEvent {
  double time = 0;
  std::size_t server = 0;
  MitigationKind kind = MitigationKind::kTrim;
  Trigger trigger = Trigger::kReactive;
  double amount_gb = 0;
  std::optional<std::size_t> vm;           // migrated VM
  std::optional<std::size_t> destination;  // migration target
  double completion = 0;
  bool blocked = false;  // migration without a feasible destination
};

enum class EpisodeEnd { kTrim, kExtend, kMigrate, kDemand, kEndOfRun };
std::string_view episode_end_name(EpisodeEnd e);

struct Episode {
  std::size_t server = 0;
  Resource resource = Resource::kMem;
  double start = 0;
  double end = 0;
  EpisodeEnd cause = EpisodeEnd::kEndOfRun;
  double duration() const { return end - start; }
};

struct TimelineRow {
  double time = 0;
  std::size_t server = 0;
  double guaranteed_gb = 0;   // memory guaranteed to resident VMs
  double pool_gb = 0;         // backed pool plus extensions
  double pool_demand_gb = 0;  // resident VA pages
  double working_set_gb = 0;  // VA pages in the working set
  bool mem_violation = false;
  double cpu_demand = 0;
  bool cpu_violation = false;
};

struct SimReport {
  MitigationTier tier = MitigationTier::kNone;
  Trigger trigger = Trigger::kReactive;
  std::uint64_t seed = 0;
  double server_seconds = 0;  // time servers hosted at least one VM
  double cpu_violation_seconds = 0;
  double mem_violation_seconds = 0;
  std::size_t cpu_monitor_triggers = 0;  // monitor ticks above the wait threshold
  std::size_t redirected = 0;            // arrivals moved off their logged server
  std::size_t displaced = 0;             // arrivals that fit nowhere
  std::vector<Episode> episodes;
  std::vector<MitigationEvent> events;
  std::vector<double> worst_slowdown;  // per hosted VM
  std::vector<TimelineRow> timeline;

  double cpu_violation_share_pct() const;
  double mem_violation_share_pct() const;
  std::size_t count(MitigationKind k, bool blocked = false) const;
};

/// Replays actual utilization over the placements in 5-minute steps with a
/// monitor tick every contention.monitor_period_s seconds. Throws DataError
/// when a placed VM lacks utilization coverage.
SimReport run_simulation(const PlacementLog& log, const TraceSet& trace, const SimConfig& config);

struct TrimResult {
  double freed_gb = 0;
  double latency_s = 0;
  std::vector<double> per_vm_gb;  // parallel to the inputs
};

/// Reclaims cold pages: each VM offers cold_fraction of its resident but
/// idle pages; freed = min(needed, offered), taken proportionally.
TrimResult apply_trim(std::span<const double> resident_gb, std::span<const double> working_gb,
                      double needed_gb, const MitigationConfig& config);

struct ExtendResult {
  std::int64_t granted_units = 0;
  double granted_gb = 0;
  double latency_s = 0;
};

/// Grows the pool from unallocated memory, whole units, up to the need.
ExtendResult apply_extend(const ServerState& server, double needed_gb, const Granularity& g,
                          const MitigationConfig& config);

struct MigrationCandidate {
  std::size_t vm = 0;
  /// Pool pages freed by moving the VM, net of the pool shrinking by its VA.
  double pool_draw_gb = 0;
  double footprint_gb = 0;
  const HybridAllocation* allocation = nullptr;
};

struct MigrateResult {
  std::optional<std::size_t> vm;
  std::optional<std::size_t> destination;
  double latency_s = 0;
  bool blocked = false;
};

/// Picks the VM with the highest positive pool draw per GB of footprint that
/// fits on another server (best fit) and models the transfer latency. The
/// candidate's allocation is what the destination must admit.
MigrateResult apply_migrate(std::span<const MigrationCandidate> candidates,
                            std::span<const ServerState> servers, std::size_t source,
                            const MitigationConfig& config);

struct AllocationErrorStats {
  std::size_t instances = 0;     // VM x day x window instances
  std::size_t under_events = 0;  // observed window peak above the allocation
  double mean_over_pct = 0;      // mean positive error, percent of request
  std::vector<double> over_pct;  // per instance

  double under_rate_pct() const {
    return instances ? 100.0 * static_cast<double>(under_events) / static_cast<double>(instances) : 0;
  }
};

/// Over- and under-allocation per resource for the hosted VMs that received
/// an oversubscribed profile.
std::array<AllocationErrorStats, kNumResources> allocation_error(const PlacementLog& log,
                                                                 const TraceSet& trace,
                                                                 const Granularity& g = {});

void write_timeline(const SimReport& report, const TraceSet& trace, std::ostream& out);
void write_events(const SimReport& report, const TraceSet& trace, std::ostream& out);
void write_episodes(const SimReport& report, const TraceSet& trace, std::ostream& out);

}  // namespace oversub

#endif  // OVERSUB_SIMULATE_H_
