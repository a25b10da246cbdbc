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


#include <algorithm>
#include <map>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "oversub/errors.h"
#include "oversub/simulate.h"
#include "scenarios.h"
#include "support.h"

namespace oversub {
namespace {

using testing::kDay;
using testing::kHour;
using testing::kT0;
using testing::make_server;
using testing::make_vm;
using testing::crafted;
using testing::fixed_alloc;
using testing::mem_episodes;
using testing::Scenario;
using testing::simulate;
using testing::step_of;
using testing::time_of;

constexpr int kMem = index(Resource::kMem);
constexpr int kCpu = index(Resource::kCpu);

// ---- Mitigation primitives -------------------------------------------------------

TEST_CASE("trim frees cold pages at the trim bandwidth") {
  MitigationConfig c;
  const std::vector<double> resident = {20, 40.0 / 3}, working = {0, 0};
  TrimResult r = apply_trim(resident, working, 4, c);  // 10 GB cold
  CHECK(r.freed_gb == doctest::Approx(4));
  CHECK(r.latency_s == doctest::Approx(4 / 1.1));
  CHECK(r.latency_s == doctest::Approx(3.6).epsilon(0.02));
  CHECK(r.per_vm_gb[0] == doctest::Approx(2.4));
  CHECK(r.per_vm_gb[1] == doctest::Approx(1.6));
  CHECK(apply_trim(resident, working, 2.2, c).latency_s == doctest::Approx(2.0));
  CHECK(apply_trim(resident, working, 25, c).freed_gb == doctest::Approx(10));

  const std::vector<double> busy = {5, 5};
  const TrimResult none = apply_trim(busy, busy, 3, c);
  CHECK(none.freed_gb == 0);
  CHECK(none.latency_s == 0);
}

ServerState mem_server(std::int64_t cap, std::int64_t pa, std::int64_t va) {
  ServerState s(ResourceUnits::Constant(1000) * 0 + (ResourceUnits() << 100, cap, 100, 100).finished(), 24);
  if (pa + va > 0) {
    UnitTable p_x = UnitTable::Zero(kNumResources, 1), p_max = UnitTable::Zero(kNumResources, 1);
    p_x(kMem, 0) = pa;
    p_max(kMem, 0) = pa + va;
    s.add(0, make_allocation(24, (ResourceUnits() << 0, pa + va, 0, 0).finished(), p_x, p_max));
  }
  return s;
}

TEST_CASE("extend grants unallocated memory at the extend bandwidth") {
  MitigationConfig c;
  const Granularity g;
  const ServerState s = mem_server(64, 40, 16);  // 8 GB unallocated
  CHECK(s.unallocated_memory() == 8);
  ExtendResult r = apply_extend(s, 5, g, c);
  CHECK(r.granted_units == 5);
  CHECK(r.latency_s == doctest::Approx(5 / 15.7));
  CHECK(r.latency_s == doctest::Approx(0.32).epsilon(0.01));
  CHECK(apply_extend(s, 12, g, c).granted_gb == 8);  // partial
  CHECK(apply_extend(s, 4.2, g, c).granted_units == 5);
  CHECK(apply_extend(mem_server(64, 40, 24), 5, g, c).granted_units == 0);
}

TEST_CASE("migration picks the busiest VM per GB and models transfer time") {
  MitigationConfig c;
  std::vector<ServerState> servers = {mem_server(64, 0, 0), mem_server(64, 0, 0)};
  const HybridAllocation alloc = fixed_alloc(make_resources(0, 8, 0, 0), 2, 6);
  const std::vector<MigrationCandidate> cands = {{3, 2, 8, &alloc}, {4, 4, 8, &alloc}};
  MigrateResult r = apply_migrate(cands, servers, 0, c);
  REQUIRE(r.vm.has_value());
  CHECK(*r.vm == 4);
  CHECK(r.destination == std::optional<std::size_t>{1});
  CHECK(r.latency_s == doctest::Approx(38));
  CHECK_FALSE(r.blocked);

  std::vector<ServerState> full = {mem_server(64, 0, 0), mem_server(4, 0, 0)};
  r = apply_migrate(cands, full, 0, c);
  CHECK(r.blocked);
  CHECK_FALSE(r.destination.has_value());

  const std::vector<MigrationCandidate> idle = {{3, 0, 8, &alloc}};
  CHECK_FALSE(apply_migrate(idle, servers, 0, c).vm.has_value());
}

TEST_CASE("tier contents") {
  MitigationConfig c;
  c.tier = MitigationTier::kTrim;
  CHECK(c.allows(MitigationKind::kTrim));
  CHECK_FALSE(c.allows(MitigationKind::kExtend));
  c.tier = MitigationTier::kExtend;
  CHECK(c.allows(MitigationKind::kExtend));
  CHECK_FALSE(c.allows(MitigationKind::kMigrate));
  c.tier = MitigationTier::kMigrate;
  CHECK_FALSE(c.allows(MitigationKind::kExtend));
  c.migrate_includes_extend = true;
  CHECK(c.allows(MitigationKind::kExtend));
  CHECK_FALSE(c.allows(MitigationKind::kEvict));
  c.tier = MitigationTier::kNone;
  CHECK_FALSE(c.allows(MitigationKind::kTrim));
  CHECK(parse_tier("extend") == MitigationTier::kExtend);
  CHECK(parse_trigger("proactive") == Trigger::kProactive);
  CHECK_FALSE(parse_tier("evict").has_value());
}

TEST_CASE("invalid simulation settings") {
  ContentionConfig cc;
  cc.monitor_period_s = 7;
  CHECK_THROWS_AS(cc.validate(), ConfigError);
  MitigationConfig mc;
  mc.cold_fraction = 1.5;
  CHECK_THROWS_AS(mc.validate(), ConfigError);
  mc = {};
  mc.trim_gbps = 0;
  CHECK_THROWS_AS(mc.validate(), ConfigError);
}

// ---- Crafted scenario ----------------------------------------------------------------

TEST_CASE("flat demand within the guarantees never violates") {
  const Scenario s = crafted([](int vm, std::int64_t) { return vm == 0 ? 20.0 : 50.0; });
  for (MitigationTier tier : {MitigationTier::kNone, MitigationTier::kTrim, MitigationTier::kExtend,
                              MitigationTier::kMigrate}) {
    for (Trigger trig : {Trigger::kReactive, Trigger::kProactive}) {
      const SimReport r = simulate(s, tier, trig);
      CHECK(r.mem_violation_seconds == 0);
      CHECK(r.cpu_violation_seconds == 0);
      CHECK(r.episodes.empty());
      CHECK(r.events.empty());
      CHECK(r.server_seconds == 3 * kDay);
    }
  }
}

TEST_CASE("without mitigation both episodes run their natural course") {
  const Scenario s = crafted();
  const auto eps = mem_episodes(simulate(s, MitigationTier::kNone));
  REQUIRE(eps.size() == 2);
  CHECK(eps[0].start == time_of(290));
  CHECK(eps[0].end == time_of(299));  // b's idle pages age out
  CHECK(eps[0].cause == EpisodeEnd::kDemand);
  CHECK(eps[1].start == time_of(779));
  CHECK(eps[1].cause == EpisodeEnd::kEndOfRun);
}

TEST_CASE("trim resolves the first episode but not the second") {
  const Scenario s = crafted();
  const SimReport r = simulate(s, MitigationTier::kTrim);
  const auto eps = mem_episodes(r);
  REQUIRE(eps.size() == 2);
  CHECK(eps[0].cause == EpisodeEnd::kTrim);
  CHECK(eps[0].duration() == doctest::Approx(0.5 / 1.1));
  CHECK(eps[1].cause == EpisodeEnd::kEndOfRun);
  CHECK(eps[1].end == kT0 + 3 * kDay);
  CHECK(r.count(MitigationKind::kTrim) == 1);
  CHECK(r.mem_violation_seconds == doctest::Approx(0.5 / 1.1 + (864 - 779) * 300));
}

TEST_CASE("extend resolves the second episode quickly") {
  const Scenario s = crafted();
  const SimReport r = simulate(s, MitigationTier::kExtend, Trigger::kReactive, true);
  const auto eps = mem_episodes(r);
  REQUIRE(eps.size() == 2);
  CHECK(eps[0].cause == EpisodeEnd::kTrim);
  CHECK(eps[1].cause == EpisodeEnd::kExtend);
  CHECK(eps[1].duration() == doctest::Approx(3 / 15.7));
  CHECK(r.count(MitigationKind::kExtend) == 1);
  // Pool after the grant: the recomputed 14 GB plus the 3 GB extension.
  double last_pool = 0;
  for (const TimelineRow& row : r.timeline) {
    if (row.server == 0) last_pool = row.pool_gb;
  }
  CHECK(last_pool == 17);
}

TEST_CASE("migration resolves the second episode, later than extend") {
  const Scenario s = crafted();
  const SimReport r = simulate(s, MitigationTier::kMigrate);
  const auto eps = mem_episodes(r);
  REQUIRE(eps.size() == 2);
  CHECK(eps[0].cause == EpisodeEnd::kTrim);
  CHECK(eps[1].cause == EpisodeEnd::kMigrate);
  // Moving b would shrink the pool by more than b holds, so a (32 GB) goes.
  CHECK(eps[1].duration() == doctest::Approx(62));
  const auto ext = mem_episodes(simulate(s, MitigationTier::kExtend));
  CHECK(eps[1].end > ext[1].end);
  REQUIRE(r.count(MitigationKind::kMigrate) == 1);
  const auto mig = std::find_if(r.events.begin(), r.events.end(),
                                [](const auto& e) { return e.kind == MitigationKind::kMigrate; });
  CHECK(mig->vm == std::optional<std::size_t>{0});
  CHECK(mig->destination == std::optional<std::size_t>{1});
  CHECK(mig->completion - mig->time == doctest::Approx(62));

  // With only one server the migration has nowhere to go.
  Scenario lone = crafted();
  std::vector<ServerInfo> one = {lone.trace.servers()[0]};
  std::vector<VmSeries> series = {lone.trace.series_of(0), lone.trace.series_of(1)};
  lone.trace = TraceSet(lone.trace.vms(), series, one);
  lone.log.trace_fingerprint = lone.trace.fingerprint();
  const SimReport blocked = simulate(lone, MitigationTier::kMigrate);
  CHECK(blocked.count(MitigationKind::kMigrate, true) > 0);
  CHECK(blocked.count(MitigationKind::kMigrate) == 0);
  CHECK(mem_episodes(blocked).back().cause == EpisodeEnd::kEndOfRun);
}

TEST_CASE("proactive triggering resolves no later than reactive") {
  const Scenario s = crafted();
  for (MitigationTier tier : {MitigationTier::kTrim, MitigationTier::kExtend, MitigationTier::kMigrate}) {
    const SimReport re = simulate(s, tier, Trigger::kReactive);
    const SimReport pro = simulate(s, tier, Trigger::kProactive);
    MESSAGE(tier_name(tier) << ": reactive " << re.mem_violation_seconds << " s, proactive "
                            << pro.mem_violation_seconds << " s");
    CHECK(pro.mem_violation_seconds < re.mem_violation_seconds);
    {
      const auto first = std::find_if(pro.events.begin(), pro.events.end(), [](const auto& e) {
        return e.trigger == Trigger::kProactive;
      });
      CHECK(first != pro.events.end());
    }
  }
}

TEST_CASE("slowdown proxy follows the unmet share") {
  const Scenario s = crafted();
  const SimReport none = simulate(s, MitigationTier::kNone);
  REQUIRE(none.worst_slowdown.size() == 2);
  // Episode 2 leaves 3 of 17 GB unmet, split in proportion to pages held.
  CHECK(none.worst_slowdown[0] > 1.0);
  CHECK(none.worst_slowdown[0] <= 5.0);
  const SimReport flat = simulate(crafted([](int, std::int64_t) { return 20.0; }), MitigationTier::kNone);
  CHECK(flat.worst_slowdown[0] == 1.0);
}

TEST_CASE("CPU demand above half the cores is a violation") {
  const Scenario s = crafted([](int, std::int64_t) { return 20.0; });
  // Both VMs at 2 cores; raise them to 100% for the first hour.
  std::vector<VmSeries> series = {s.trace.series_of(0), s.trace.series_of(1)};
  std::vector<VMRecord> vms = s.trace.vms();
  for (auto& vm : vms) vm.requested(kCpu) = 8;
  for (auto& vs : series) {
    for (std::size_t k = 0; k < 12; ++k) vs[kCpu].values[k] = 100;
  }
  Scenario hot{TraceSet(vms, series, s.trace.servers()), s.log};
  hot.log.trace_fingerprint = hot.trace.fingerprint();
  const SimReport r = simulate(hot, MitigationTier::kMigrate);
  CHECK(r.cpu_violation_seconds == kHour);
  CHECK(r.mem_violation_seconds == 0);
  CHECK(r.cpu_monitor_triggers == 0);  // 16 cores on 16: no wait time
}

TEST_CASE("simulation input errors") {
  Scenario s = crafted();
  Scenario other = crafted([](int, std::int64_t) { return 10.0; });
  other.log.trace_fingerprint = "x";
  CHECK_THROWS_AS(run_simulation(other.log, s.trace, SimConfig{}), DataError);

  std::vector<VmSeries> series = {s.trace.series_of(0), s.trace.series_of(1)};
  std::vector<VMRecord> vms = s.trace.vms();
  series[1][kMem].values.resize(10);
  series[1][kMem].start = vms[1].start;
  bool threw = false;
  try {
    TraceSet short_trace(vms, series, s.trace.servers());
    s.log.trace_fingerprint = short_trace.fingerprint();
    run_simulation(s.log, short_trace, SimConfig{});
  } catch (const DataError& e) {
    threw = std::string(e.what()).find("b") != std::string::npos;
  }
  CHECK(threw);
}

// ---- Random fleets -----------------------------------------------------------------

class RandomPredictor final : public UtilizationPredictor {
 public:
  explicit RandomPredictor(std::uint64_t seed) : seed_(seed) {}
  int window_hours() const override { return 4; }
  std::optional<TimeWindowProfile> predict(const VMRecord& vm, int) const override {
    std::mt19937_64 rng(seed_ ^ std::hash<std::string>{}(vm.vm_id));
    TimeWindowProfile p;
    p.window_hours = 4;
    p.p_x.resize(kNumResources, 6);
    p.p_max.resize(kNumResources, 6);
    for (int i = 0; i < kNumResources; ++i) {
      for (int w = 0; w < 6; ++w) {
        const int lo = 5 * static_cast<int>(rng() % 15);
        p.p_x(i, w) = lo;
        p.p_max(i, w) = std::min(100, lo + 5 * static_cast<int>(rng() % 10));
      }
    }
    return p;
  }

 private:
  std::uint64_t seed_;
};

Scenario random_fleet(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<VMRecord> vms;
  std::vector<VmSeries> series;
  const int n = 6 + static_cast<int>(rng() % 10);
  for (int k = 0; k < n; ++k) {
    const std::int64_t start = kT0 + static_cast<std::int64_t>(rng() % 48) * 1800;
    const std::int64_t len = kHour * (6 + static_cast<std::int64_t>(rng() % 42));
    const ResourceVector req = make_resources(1 + rng() % 8, 4 + rng() % 28, 1, 10);
    vms.push_back(make_vm("v" + std::to_string(k), "s", "c", req, start, start + len));
    double level = 30 + rng() % 40;
    series.push_back(testing::make_series(vms.back(), [&rng, level](Resource, std::int64_t) mutable {
      level = std::clamp(level + std::uniform_real_distribution<double>(-12, 12)(rng), 0.0, 100.0);
      if (rng() % 40 == 0) return 100.0;
      return level;
    }));
  }
  std::vector<ServerInfo> fleet;
  const int servers = 2 + static_cast<int>(rng() % 2);
  for (int s = 0; s < servers; ++s) fleet.push_back(make_server("h" + std::to_string(s), make_resources(16, 64, 10, 200)));
  Scenario out{TraceSet(vms, series, fleet), {}};
  const RandomPredictor pred(seed);
  out.log = schedule(out.trace, &pred, Policy::coach());
  return out;
}

std::string render(const SimReport& r, const TraceSet& trace) {
  std::ostringstream out;
  write_events(r, trace, out);
  write_episodes(r, trace, out);
  write_timeline(r, trace, out);
  out << r.mem_violation_seconds << ' ' << r.cpu_violation_seconds << ' ' << r.server_seconds;
  for (double x : r.worst_slowdown) out << ' ' << x;
  return out.str();
}

TEST_CASE("random fleets: conservation, ordering, determinism, relief") {
  int relief_checked = 0;
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const Scenario s = random_fleet(seed);
    std::map<MitigationTier, double> violation;
    for (MitigationTier tier : {MitigationTier::kNone, MitigationTier::kTrim, MitigationTier::kExtend,
                                MitigationTier::kMigrate}) {
      SimConfig c;
      c.mitigation.tier = tier;
      c.mitigation.migrate_includes_extend = seed % 2 == 0;
      c.record_timeline = true;
      const SimReport r = run_simulation(s.log, s.trace, c);  // pools rechecked inside
      violation[tier] = r.mem_violation_seconds;
      for (const TimelineRow& row : r.timeline) {
        REQUIRE(row.guaranteed_gb + row.pool_gb <= s.trace.servers()[row.server].capacity(kMem) + 1e-9);
      }
      // Within each round of a server, kinds escalate in tier order.
      for (std::size_t k = 1; k < r.events.size(); ++k) {
        const auto& a = r.events[k - 1];
        const auto& b = r.events[k];
        // A migration closes its round; anything starting at its completion is a new round.
        if (a.server == b.server && !a.blocked && a.kind != MitigationKind::kMigrate &&
            b.time == a.completion) {
          REQUIRE(static_cast<int>(a.kind) < static_cast<int>(b.kind));
        }
        REQUIRE(b.completion >= b.time);
      }
      for (const Episode& e : r.episodes) REQUIRE(e.end >= e.start);
      if (tier == MitigationTier::kMigrate) {
        REQUIRE(render(r, s.trace) == render(run_simulation(s.log, s.trace, c), s.trace));
      }
    }
    CHECK(violation[MitigationTier::kTrim] <= violation[MitigationTier::kNone] + 1e-6);
    CHECK(violation[MitigationTier::kExtend] <= violation[MitigationTier::kTrim] + 1e-6);
    CHECK(violation[MitigationTier::kMigrate] <= violation[MitigationTier::kTrim] + 1e-6);
    if (seed % 2 == 0) {
      CHECK(violation[MitigationTier::kMigrate] <= violation[MitigationTier::kExtend] + 1e-6);
    }
    if (violation[MitigationTier::kNone] > 0) ++relief_checked;
  }
  CHECK(relief_checked > 10);
}

// ---- Allocation error ------------------------------------------------------------------

TEST_CASE("exact flat prediction has no under-allocation") {
  const ResourceVector req = make_resources(4, 32, 2, 100);
  const VMRecord vm = make_vm("f", "s", "c", req, kT0, kT0 + 2 * kDay);
  const TraceSet trace({vm}, {testing::flat_series(vm, 40)}, {make_server("h", make_resources(16, 64, 10, 200))});
  TimeWindowProfile p;
  p.window_hours = 4;
  p.p_x = WindowTable<int>::Constant(kNumResources, 6, 40);
  p.p_max = WindowTable<int>::Constant(kNumResources, 6, 40);
  PlacementLog log;
  log.policy = Policy::coach();
  log.trace_fingerprint = trace.fingerprint();
  log.entries.push_back({kT0, 0, 0, std::nullopt, build_allocation(p, vm, 4)});
  const auto err = allocation_error(log, trace);
  for (Resource r : kAllResources) {
    const auto& e = err[index(r)];
    CHECK(e.instances == 12);
    CHECK(e.under_events == 0);
    // Over-error is rounding only: at most one management unit of the request.
    CHECK(e.mean_over_pct <= 100.0 * Granularity{}(r) / req(index(r)) + 1e-9);
  }

  // A VM without a profile is excluded.
  log.entries[0].allocation = build_allocation(std::nullopt, vm, 4);
  CHECK(allocation_error(log, trace)[kMem].instances == 0);
}

TEST_CASE("under-allocation counts window peaks above the allocation") {
  const ResourceVector req = make_resources(5, 20, 2, 100);
  const VMRecord vm = make_vm("u", "s", "c", req, kT0, kT0 + kDay);
  const TraceSet trace({vm}, {testing::make_series(vm, testing::windowed({30, 30, 30, 60, 30, 30}))},
                       {make_server("h", make_resources(16, 64, 10, 200))});
  TimeWindowProfile p;
  p.window_hours = 4;
  p.p_x = WindowTable<int>::Constant(kNumResources, 6, 30);
  p.p_max = WindowTable<int>::Constant(kNumResources, 6, 50);
  PlacementLog log;
  log.policy = Policy::coach();
  log.trace_fingerprint = trace.fingerprint();
  log.entries.push_back({kT0, 0, 0, std::nullopt, build_allocation(p, vm, 4)});
  const auto err = allocation_error(log, trace);
  // Memory reserves the 50% peak in every window; fungible resources reserve 30%.
  CHECK(err[kMem].under_events == 1);
  CHECK(err[kCpu].under_events == 1);
  CHECK(err[kMem].mean_over_pct == doctest::Approx(20.0 * 5 / 6));
  CHECK(err[kCpu].mean_over_pct == doctest::Approx(0));
  CHECK(err[kMem].under_rate_pct() == doctest::Approx(100.0 / 6));
}

}  // namespace
}  // namespace oversub
