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

#include "oversub/simulate.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>

#include "oversub/errors.h"

namespace oversub {

std::string_view tier_name(MitigationTier t) {
  switch (t) {
    case MitigationTier::kNone:
      return "none";
    case MitigationTier::kTrim:
      return "trim";
    case MitigationTier::kExtend:
      return "extend";
    case MitigationTier::kMigrate:
      return "migrate";
  }
  return "?";
}

std::optional<MitigationTier> parse_tier(std::string_view s) {
  for (MitigationTier t : {MitigationTier::kNone, MitigationTier::kTrim, MitigationTier::kExtend,
                           MitigationTier::kMigrate}) {
    if (tier_name(t) == s) return t;
  }
  return std::nullopt;
}

std::string_view trigger_name(Trigger t) {
  return t == Trigger::kReactive ? "reactive" : "proactive";
}

std::optional<Trigger> parse_trigger(std::string_view s) {
  if (s == "reactive") return Trigger::kReactive;
  if (s == "proactive") return Trigger::kProactive;
  return std::nullopt;
}

std::string_view mitigation_kind_name(MitigationKind k) {
  switch (k) {
    case MitigationKind::kTrim:
      return "trim";
    case MitigationKind::kExtend:
      return "extend";
    case MitigationKind::kEvict:
      return "evict";
    case MitigationKind::kMigrate:
      return "migrate";
  }
  return "?";
}

std::string_view episode_end_name(EpisodeEnd e) {
  switch (e) {
    case EpisodeEnd::kTrim:
      return "trim";
    case EpisodeEnd::kExtend:
      return "extend";
    case EpisodeEnd::kMigrate:
      return "migrate";
    case EpisodeEnd::kDemand:
      return "demand";
    case EpisodeEnd::kEndOfRun:
      return "end_of_run";
  }
  return "?";
}

void ContentionConfig::validate() const {
  if (!(cpu_violation_fraction > 0) || !(cpu_wait_pct > 0) || !(cpu_util_pct > 0)) {
    throw ConfigError("contention thresholds must be positive");
  }
  if (monitor_period_s <= 0 || kSampleSeconds % monitor_period_s != 0) {
    throw ConfigError("monitor period must divide the 300 s step");
  }
}

void MitigationConfig::validate() const {
  if (!(cold_fraction >= 0 && cold_fraction <= 1)) throw ConfigError("cold_fraction must be in [0,1]");
  if (!(trim_gbps > 0) || !(extend_gbps > 0) || !(migrate_gbps > 0)) {
    throw ConfigError("mitigation bandwidths must be positive");
  }
  if (migrate_setup_s < 0) throw ConfigError("migrate_setup_s must be >= 0");
  if (residency_steps < 1) throw ConfigError("residency_steps must be >= 1");
  if (slowdown_penalty < 0) throw ConfigError("slowdown_penalty must be >= 0");
  if (!(ewma_alpha > 0 && ewma_alpha <= 1)) throw ConfigError("ewma alpha must be in (0,1]");
}

bool MitigationConfig::allows(MitigationKind k) const {
  switch (k) {
    case MitigationKind::kTrim:
      return tier != MitigationTier::kNone;
    case MitigationKind::kExtend:
      return tier == MitigationTier::kExtend ||
             (tier == MitigationTier::kMigrate && migrate_includes_extend);
    case MitigationKind::kEvict:
      return false;  // traces carry no VM priorities
    case MitigationKind::kMigrate:
      return tier == MitigationTier::kMigrate;
  }
  return false;
}

double SimReport::cpu_violation_share_pct() const {
  return server_seconds > 0 ? 100.0 * cpu_violation_seconds / server_seconds : 0.0;
}

double SimReport::mem_violation_share_pct() const {
  return server_seconds > 0 ? 100.0 * mem_violation_seconds / server_seconds : 0.0;
}

std::size_t SimReport::count(MitigationKind k, bool blocked) const {
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [&](const auto& e) {
    return e.kind == k && e.blocked == blocked;
  }));
}

TrimResult apply_trim(std::span<const double> resident_gb, std::span<const double> working_gb,
                      double needed_gb, const MitigationConfig& config) {
  TrimResult out;
  out.per_vm_gb.assign(resident_gb.size(), 0.0);
  double offered = 0;
  for (std::size_t i = 0; i < resident_gb.size(); ++i) {
    out.per_vm_gb[i] = config.cold_fraction * std::max(0.0, resident_gb[i] - working_gb[i]);
    offered += out.per_vm_gb[i];
  }
  out.freed_gb = std::clamp(needed_gb, 0.0, offered);
  const double share = offered > 0 ? out.freed_gb / offered : 0.0;
  for (double& v : out.per_vm_gb) v *= share;
  out.latency_s = out.freed_gb / config.trim_gbps;
  return out;
}

ExtendResult apply_extend(const ServerState& server, double needed_gb, const Granularity& g,
                          const MitigationConfig& config) {
  ExtendResult out;
  const double unit = g(Resource::kMem);
  const std::int64_t wanted = needed_gb > 0 ? units_ceil(needed_gb, unit) : 0;
  out.granted_units = std::clamp<std::int64_t>(wanted, 0, std::max<std::int64_t>(0, server.unallocated_memory()));
  out.granted_gb = static_cast<double>(out.granted_units) * unit;
  out.latency_s = out.granted_gb / config.extend_gbps;
  return out;
}

MigrateResult apply_migrate(std::span<const MigrationCandidate> candidates,
                            std::span<const ServerState> servers, std::size_t source,
                            const MitigationConfig& config) {
  std::vector<const MigrationCandidate*> ranked;
  for (const MigrationCandidate& c : candidates) {
    if (c.pool_draw_gb > 0 && c.footprint_gb > 0 && c.allocation) ranked.push_back(&c);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
    const double ra = a->pool_draw_gb / a->footprint_gb, rb = b->pool_draw_gb / b->footprint_gb;
    if (ra != rb) return ra > rb;
    return a->vm < b->vm;
  });
  MigrateResult out;
  for (const MigrationCandidate* c : ranked) {
    std::optional<double> best;
    for (std::size_t s = 0; s < servers.size(); ++s) {
      if (s == source) continue;
      const auto score = servers[s].fit_score(*c->allocation);
      if (score && (!best || *score < *best)) {
        best = score;
        out.destination = s;
      }
    }
    if (out.destination) {
      out.vm = c->vm;
      out.latency_s = c->footprint_gb / config.migrate_gbps + config.migrate_setup_s;
      return out;
    }
  }
  if (!ranked.empty()) {
    out.vm = ranked.front()->vm;
    out.blocked = true;
  }
  return out;
}

namespace {

constexpr double kEps = 1e-9;
constexpr int kMem = index(Resource::kMem);
constexpr int kCpu = index(Resource::kCpu);

struct VmState {
  std::size_t server = 0;
  bool active = false;     // demand counted on `server`
  bool migrating = false;  // reserved on a destination
  double req_mem = 0;
  double req_cpu = 0;
  double pa_gb = 0;
  double mem_pct = 0;
  double demand_gb = 0;
  double working_gb = 0;
  double held_gb = 0;
  double cpu_demand = 0;
  std::deque<double> history;  // recent working sets
  EwmaState ewma;
  std::optional<HorizonPredictor> horizon;
  double horizon_pct = 0;
  double worst_slowdown = 1.0;
};

struct Pending {
  double completion = 0;
  MitigationKind kind = MitigationKind::kTrim;
  std::vector<std::pair<std::size_t, double>> trims;
  std::int64_t extend_units = 0;
  std::size_t vm = 0;
  std::size_t destination = 0;
};

struct ServerRuntime {
  std::vector<std::size_t> active;
  std::vector<Pending> pending;  // ordered by completion
  double busy_until = -std::numeric_limits<double>::infinity();
  double blocked_until = -std::numeric_limits<double>::infinity();
  bool migration_in_flight = false;
  double cursor = 0;
  bool mem_violated = false;
  double mem_since = 0;
  bool cpu_violated = false;
  double cpu_since = 0;
  double sum_held = 0;
  double sum_working = 0;
  double cpu_demand = 0;
};

class Simulation {
 public:
  Simulation(const PlacementLog& log, const TraceSet& trace, const SimConfig& config)
      : log_(log), trace_(trace), config_(config), mit_(config.mitigation),
        vms_(trace.vms().size()), runtime_(trace.servers().size()) {
    config_.contention.validate();
    mit_.validate();
    servers_.reserve(trace.servers().size());
    for (const ServerInfo& s : trace.servers()) {
      servers_.emplace_back(capacity_units(s.capacity, config.granularity), log.policy.window_hours,
                            config.backing_ratio);
    }
    report_.tier = mit_.tier;
    report_.trigger = mit_.trigger;
    report_.seed = config.seed;
  }

  SimReport run() {
    std::vector<const Placement*> arrivals;
    for (const Placement& p : log_.entries) {
      if (p.server) arrivals.push_back(&p);
    }
    if (arrivals.empty()) return std::move(report_);
    std::stable_sort(arrivals.begin(), arrivals.end(),
                     [this](const Placement* a, const Placement* b) { return start(*a) < start(*b); });
    for (const Placement* p : arrivals) check_coverage(p->vm);

    std::vector<std::size_t> by_end;
    for (const Placement* p : arrivals) by_end.push_back(p->vm);
    std::stable_sort(by_end.begin(), by_end.end(), [this](std::size_t a, std::size_t b) {
      return trace_.vms()[a].end < trace_.vms()[b].end;
    });

    const std::int64_t begin = start(*arrivals.front());
    const std::int64_t finish = trace_.vms()[by_end.back()].end;
    std::size_t next_arrival = 0, next_departure = 0;
    for (std::int64_t t = begin; t < finish; t += kSampleSeconds) {
      const double now = static_cast<double>(t);
      for (std::size_t s = 0; s < servers_.size(); ++s) settle(s, now);
      handoffs(t);
      while (next_departure < by_end.size() && trace_.vms()[by_end[next_departure]].end <= t) {
        depart(by_end[next_departure++]);
      }
      while (next_arrival < arrivals.size() && start(*arrivals[next_arrival]) <= t) {
        arrive(*arrivals[next_arrival++]);
      }
      for (std::size_t s = 0; s < servers_.size(); ++s) {
        const ServerRuntime& rt = runtime_[s];
        if (!rt.active.empty() || !rt.pending.empty() || rt.mem_violated || rt.cpu_violated) step(s, t);
      }
    }
    const double end = static_cast<double>(finish);
    for (std::size_t s = 0; s < servers_.size(); ++s) {
      settle(s, end);
      close_episodes(s, end);
    }
    for (const Placement* p : arrivals) report_.worst_slowdown.push_back(vms_[p->vm].worst_slowdown);
    return std::move(report_);
  }

 private:
  std::int64_t start(const Placement& p) const { return trace_.vms()[p.vm].start; }

  double unit(Resource r) const { return config_.granularity(r); }

  void check_coverage(std::size_t v) const {
    const VMRecord& vm = trace_.vms()[v];
    for (Resource r : kAllResources) {
      const UtilizationSeries& s = trace_.series(v, r);
      if (s.start > vm.start || s.end() < vm.end) {
        throw DataError("VM " + vm.vm_id + ": " + std::string(resource_name(r)) +
                        " series does not cover its lifetime");
      }
    }
  }

  double pool_capacity(std::size_t s) const {
    const ServerState& st = servers_[s];
    return static_cast<double>(st.backed_pool()(kMem) + st.extension()) * unit(Resource::kMem);
  }

  // Catches the integration cursor up without changing state.
  void settle(std::size_t s, double to) {
    ServerRuntime& rt = runtime_[s];
    if (to <= rt.cursor) return;
    if (rt.mem_violated) report_.mem_violation_seconds += to - rt.cursor;
    rt.cursor = to;
  }

  void update_mem_status(std::size_t s, double now, EpisodeEnd cause) {
    ServerRuntime& rt = runtime_[s];
    const bool violated = rt.sum_held > pool_capacity(s) + kEps;
    if (violated == rt.mem_violated) return;
    if (violated) {
      rt.mem_since = now;
    } else {
      report_.episodes.push_back({s, Resource::kMem, rt.mem_since, now, cause});
    }
    rt.mem_violated = violated;
  }

  void close_episodes(std::size_t s, double end) {
    ServerRuntime& rt = runtime_[s];
    if (rt.mem_violated) report_.episodes.push_back({s, Resource::kMem, rt.mem_since, end, EpisodeEnd::kEndOfRun});
    if (rt.cpu_violated) report_.episodes.push_back({s, Resource::kCpu, rt.cpu_since, end, EpisodeEnd::kEndOfRun});
    rt.mem_violated = rt.cpu_violated = false;
  }

  void recompute_sums(std::size_t s) {
    ServerRuntime& rt = runtime_[s];
    rt.sum_held = rt.sum_working = rt.cpu_demand = 0;
    for (std::size_t v : rt.active) {
      rt.sum_held += vms_[v].held_gb;
      rt.sum_working += vms_[v].working_gb;
      rt.cpu_demand += vms_[v].cpu_demand;
    }
  }

  void record(std::size_t s, double now) {
    if (!config_.record_timeline) return;
    const ServerRuntime& rt = runtime_[s];
    const double guaranteed = static_cast<double>(servers_[s].guaranteed_sum()(kMem)) * unit(Resource::kMem);
    report_.timeline.push_back({now, s, guaranteed, pool_capacity(s), rt.sum_held, rt.sum_working,
                                rt.mem_violated, rt.cpu_demand, rt.cpu_violated});
  }

  void remove_active(std::size_t s, std::size_t v) {
    auto& a = runtime_[s].active;
    a.erase(std::remove(a.begin(), a.end(), v), a.end());
  }

  void place(std::size_t v, std::size_t s, const HybridAllocation& allocation) {
    servers_[s].add(v, allocation);
    VmState& st = vms_[v];
    st.server = s;
    st.active = true;
    st.held_gb = 0;
    st.history.clear();
    runtime_[s].active.push_back(v);
  }

  void arrive(const Placement& p) {
    const VMRecord& vm = trace_.vms()[p.vm];
    VmState& st = vms_[p.vm];
    st.req_mem = at(vm.requested, Resource::kMem);
    st.req_cpu = at(vm.requested, Resource::kCpu);
    st.pa_gb = static_cast<double>(p.allocation.guaranteed(kMem)) * unit(Resource::kMem);
    st.ewma = EwmaState{mit_.ewma_alpha};
    if (mit_.trigger == Trigger::kProactive && mit_.tier != MitigationTier::kNone) {
      st.horizon.emplace(mit_.horizon);
    }
    std::optional<std::size_t> target;
    if (servers_[*p.server].fit_check(p.allocation).fits) {
      target = p.server;
    } else {
      std::optional<double> best;
      for (std::size_t s = 0; s < servers_.size(); ++s) {
        const auto score = servers_[s].fit_score(p.allocation);
        if (score && (!best || *score < *best)) {
          best = score;
          target = s;
        }
      }
      if (target) {
        ++report_.redirected;
      } else {
        ++report_.displaced;
        return;
      }
    }
    allocation_of_[p.vm] = p.allocation;
    place(p.vm, *target, p.allocation);
  }

  void depart(std::size_t v) {
    VmState& st = vms_[v];
    if (allocation_of_.find(v) == allocation_of_.end()) return;
    allocation_of_.erase(v);
    if (st.active) {
      servers_[st.server].remove(v);
      remove_active(st.server, v);
    } else if (!st.migrating) {
      // Mid-handoff: released at the source, reserved at the destination.
      servers_[st.server].remove(v);
    }
    if (st.migrating) {
      auto dest = migration_dest_.find(v);
      servers_[dest->second].remove(v);
      migration_dest_.erase(dest);
      st.migrating = false;
    }
    st.active = false;
  }

  void handoffs(std::int64_t t) {
    for (std::size_t v : arrived_) {
      if (allocation_of_.count(v) == 0) continue;
      VmState& st = vms_[v];
      if (trace_.vms()[v].end <= t) continue;
      st.active = true;
      st.held_gb = 0;
      st.history.clear();
      runtime_[st.server].active.push_back(v);
    }
    arrived_.clear();
  }

  void observe_vm(std::size_t v, std::int64_t t) {
    VmState& st = vms_[v];
    const double mem_pct = trace_.series(v, Resource::kMem).at(t);
    st.mem_pct = mem_pct;
    st.demand_gb = mem_pct / 100.0 * st.req_mem;
    st.working_gb = std::max(0.0, st.demand_gb - st.pa_gb);
    st.cpu_demand = trace_.series(v, Resource::kCpu).at(t) / 100.0 * st.req_cpu;
    st.history.push_back(st.working_gb);
    if (st.history.size() > static_cast<std::size_t>(mit_.residency_steps)) st.history.pop_front();
    const double recent = *std::max_element(st.history.begin(), st.history.end());
    st.held_gb = std::max(st.working_gb, std::min(st.held_gb, recent));
    if (st.horizon) {
      st.horizon->observe(t, mem_pct, mem_pct);
      st.horizon_pct = st.horizon->predict(t + kSampleSeconds).value_or(0.0);
    }
  }

  void account_slowdown(std::size_t s) {
    const ServerRuntime& rt = runtime_[s];
    const double cap = pool_capacity(s);
    const double overflow = std::max(0.0, rt.sum_held - cap);
    const double cpu_cap = static_cast<double>(servers_[s].capacity()(kCpu)) * unit(Resource::kCpu);
    const double cpu_unmet = rt.cpu_demand > 0 ? std::max(0.0, rt.cpu_demand - cpu_cap) / rt.cpu_demand : 0.0;
    for (std::size_t v : rt.active) {
      VmState& st = vms_[v];
      double mem_unmet = 0;
      if (overflow > 0 && rt.sum_held > 0 && st.demand_gb > 0) {
        mem_unmet = st.held_gb * overflow / rt.sum_held / st.demand_gb;
      }
      const double f = std::min(1.0, std::max(mem_unmet, cpu_unmet));
      st.worst_slowdown = std::max(st.worst_slowdown, 1.0 + mit_.slowdown_penalty * f);
    }
  }

  void step(std::size_t s, std::int64_t t) {
    ServerRuntime& rt = runtime_[s];
    const double now = static_cast<double>(t);
    for (std::size_t v : rt.active) observe_vm(v, t);
    recompute_sums(s);
    if (!rt.active.empty()) report_.server_seconds += kSampleSeconds;
    update_mem_status(s, now, EpisodeEnd::kDemand);

    const double cpu_cap = static_cast<double>(servers_[s].capacity()(kCpu)) * unit(Resource::kCpu);
    const bool cpu_violated = rt.cpu_demand > config_.contention.cpu_violation_fraction * cpu_cap + kEps;
    if (cpu_violated != rt.cpu_violated) {
      if (cpu_violated) {
        rt.cpu_since = now;
      } else {
        report_.episodes.push_back({s, Resource::kCpu, rt.cpu_since, now, EpisodeEnd::kDemand});
      }
      rt.cpu_violated = cpu_violated;
    }
    if (cpu_violated) report_.cpu_violation_seconds += kSampleSeconds;
    account_slowdown(s);
    record(s, now);

    const int period = config_.contention.monitor_period_s;
    const double wait = rt.cpu_demand > 0 ? 100.0 * std::max(0.0, rt.cpu_demand - cpu_cap) / rt.cpu_demand : 0.0;
    const double util = cpu_cap > 0 ? 100.0 * rt.cpu_demand / cpu_cap : 0.0;
    for (int k = 0; k < kSampleSeconds / period; ++k) {
      const double tick = now + k * period;
      complete_until(s, tick, true);
      settle(s, tick);
      if (wait > config_.contention.cpu_wait_pct && util > config_.contention.cpu_util_pct) {
        ++report_.cpu_monitor_triggers;
      }
      monitor(s, tick);
    }
    complete_until(s, now + kSampleSeconds, false);
    settle(s, now + kSampleSeconds);
  }

  void complete_until(std::size_t s, double until, bool inclusive) {
    ServerRuntime& rt = runtime_[s];
    while (!rt.pending.empty()) {
      const double c = rt.pending.front().completion;
      if (inclusive ? c > until : c >= until) break;
      Pending p = std::move(rt.pending.front());
      rt.pending.erase(rt.pending.begin());
      settle(s, c);
      apply(s, p);
      servers_[s].check_invariants();
      recompute_sums(s);
      update_mem_status(s, c, p.kind == MitigationKind::kTrim     ? EpisodeEnd::kTrim
                              : p.kind == MitigationKind::kExtend ? EpisodeEnd::kExtend
                                                                  : EpisodeEnd::kMigrate);
      record(s, c);
    }
  }

  void apply(std::size_t s, const Pending& p) {
    ServerRuntime& rt = runtime_[s];
    switch (p.kind) {
      case MitigationKind::kTrim:
        for (const auto& [v, gb] : p.trims) {
          VmState& st = vms_[v];
          if (st.active && st.server == s) st.held_gb = std::max(st.working_gb, st.held_gb - gb);
        }
        break;
      case MitigationKind::kExtend: {
        ServerState& st = servers_[s];
        const std::int64_t grant = std::min(p.extend_units, std::max<std::int64_t>(0, st.unallocated_memory()));
        st.set_extension(st.extension() + grant);
        break;
      }
      case MitigationKind::kMigrate: {
        rt.migration_in_flight = false;
        VmState& st = vms_[p.vm];
        if (!st.migrating) break;  // departed in flight
        servers_[s].remove(p.vm);
        remove_active(s, p.vm);
        st.active = false;
        st.migrating = false;
        st.server = p.destination;
        migration_dest_.erase(p.vm);
        arrived_.push_back(p.vm);
        break;
      }
      case MitigationKind::kEvict:
        break;
    }
  }

  void schedule_pending(std::size_t s, Pending p) {
    auto& q = runtime_[s].pending;
    auto it = std::upper_bound(q.begin(), q.end(), p.completion,
                               [](double c, const Pending& x) { return c < x.completion; });
    q.insert(it, std::move(p));
  }

  // Pages a VM holds minus what the pool shrinks by without its VA.
  double pool_relief(std::size_t s, std::size_t v) const {
    const ServerState& st = servers_[s];
    const auto without = (st.va_sum().row(kMem) - allocation_of_.at(v).va.row(kMem)).maxCoeff();
    const auto backed = static_cast<std::int64_t>(
        std::ceil(static_cast<double>(without) * st.backing_ratio() - kEps));
    const double shrink = static_cast<double>(st.backed_pool()(kMem) - backed) * unit(Resource::kMem);
    return expected_held(v) - shrink;
  }

  // The destination reserves the VM's current working set, up to its request.
  HybridAllocation resize_for_move(const HybridAllocation& a, double held_gb) const {
    HybridAllocation out = a;
    const std::int64_t room = a.requested(kMem) - a.guaranteed(kMem);
    const std::int64_t need = std::min(room, units_ceil(held_gb, unit(Resource::kMem)));
    for (int t = 0; t < out.windows(); ++t) {
      out.va(kMem, t) = std::max(out.va(kMem, t), need);
      out.peak(kMem, t) = std::max(out.peak(kMem, t), out.guaranteed(kMem) + out.va(kMem, t));
    }
    return out;
  }

  // Pool pages the VM is expected to hold; the current ones when reactive.
  double expected_held(std::size_t v) const {
    const VmState& st = vms_[v];
    if (mit_.trigger != Trigger::kProactive) return st.held_gb;
    const double pct = std::max(ewma_predict(st.ewma), st.horizon_pct);
    return std::max(st.held_gb, std::max(0.0, pct / 100.0 * st.req_mem - st.pa_gb));
  }

  double predicted_pool_demand(std::size_t s) const {
    double total = 0;
    for (std::size_t v : runtime_[s].active) total += expected_held(v);
    return total;
  }

  void monitor(std::size_t s, double tick) {
    ServerRuntime& rt = runtime_[s];
    const bool proactive = mit_.trigger == Trigger::kProactive;
    if (proactive) {
      for (std::size_t v : rt.active) vms_[v].ewma = ewma_update(vms_[v].ewma, vms_[v].mem_pct);
    }
    if (mit_.tier == MitigationTier::kNone || rt.busy_until > tick || rt.active.empty()) return;
    const double cap = pool_capacity(s);
    double need = rt.sum_held - cap;
    Trigger trigger = Trigger::kReactive;
    // A current deficit is served first; the predicted one waits for the next round.
    if (proactive && need <= kEps) {
      need = predicted_pool_demand(s) - cap;
      trigger = Trigger::kProactive;
    }
    if (need <= kEps) return;
    start_round(s, tick, need, trigger);
  }

  void start_round(std::size_t s, double tick, double need, Trigger trigger) {
    ServerRuntime& rt = runtime_[s];
    double at = tick;
    double remaining = need;
    rt.busy_until = tick;

    if (mit_.allows(MitigationKind::kTrim)) {
      std::vector<double> held, working;
      for (std::size_t v : rt.active) {
        held.push_back(vms_[v].held_gb);
        working.push_back(vms_[v].working_gb);
      }
      TrimResult tr = apply_trim(held, working, remaining, mit_);
      if (tr.freed_gb > 1e-6) {
        Pending p;
        p.kind = MitigationKind::kTrim;
        p.completion = at + tr.latency_s;
        for (std::size_t i = 0; i < rt.active.size(); ++i) {
          if (tr.per_vm_gb[i] > 0) p.trims.emplace_back(rt.active[i], tr.per_vm_gb[i]);
        }
        report_.events.push_back({at, s, MitigationKind::kTrim, trigger, tr.freed_gb, {}, {}, p.completion, false});
        at = p.completion;
        remaining -= tr.freed_gb;
        schedule_pending(s, std::move(p));
      }
    }
    if (remaining > kEps && mit_.allows(MitigationKind::kExtend)) {
      ExtendResult er = apply_extend(servers_[s], remaining, config_.granularity, mit_);
      if (er.granted_units > 0) {
        Pending p;
        p.kind = MitigationKind::kExtend;
        p.completion = at + er.latency_s;
        p.extend_units = er.granted_units;
        report_.events.push_back({at, s, MitigationKind::kExtend, trigger, er.granted_gb, {}, {}, p.completion, false});
        at = p.completion;
        remaining -= er.granted_gb;
        schedule_pending(s, std::move(p));
      }
    }
    rt.busy_until = at;
    if (remaining > kEps && mit_.allows(MitigationKind::kMigrate) && !rt.migration_in_flight &&
        rt.blocked_until <= tick) {
      std::vector<HybridAllocation> resized;
      resized.reserve(rt.active.size());
      std::vector<MigrationCandidate> candidates;
      for (std::size_t v : rt.active) {
        const VmState& st = vms_[v];
        if (st.migrating) continue;
        resized.push_back(resize_for_move(allocation_of_.at(v), expected_held(v)));
        candidates.push_back({v, pool_relief(s, v), st.req_mem, &resized.back()});
      }
      MigrateResult mr = apply_migrate(candidates, servers_, s, mit_);
      if (mr.blocked) {
        report_.events.push_back({at, s, MitigationKind::kMigrate, trigger, 0.0, mr.vm, {}, at, true});
        rt.blocked_until = tick + kSampleSeconds;
      } else if (mr.vm) {
        VmState& st = vms_[*mr.vm];
        const auto chosen = std::find_if(candidates.begin(), candidates.end(),
                                         [&](const MigrationCandidate& c) { return c.vm == *mr.vm; });
        allocation_of_[*mr.vm] = *chosen->allocation;
        servers_[*mr.destination].add(*mr.vm, *chosen->allocation);
        servers_[*mr.destination].check_invariants();
        st.migrating = true;
        migration_dest_[*mr.vm] = *mr.destination;
        rt.migration_in_flight = true;
        Pending p;
        p.kind = MitigationKind::kMigrate;
        p.completion = at + mr.latency_s;
        p.vm = *mr.vm;
        p.destination = *mr.destination;
        report_.events.push_back(
            {at, s, MitigationKind::kMigrate, trigger, st.req_mem, mr.vm, mr.destination, p.completion, false});
        schedule_pending(s, std::move(p));
      }
    }
  }

  const PlacementLog& log_;
  const TraceSet& trace_;
  SimConfig config_;
  MitigationConfig mit_;
  std::vector<ServerState> servers_;
  std::vector<VmState> vms_;
  std::vector<ServerRuntime> runtime_;
  std::unordered_map<std::size_t, HybridAllocation> allocation_of_;
  std::unordered_map<std::size_t, std::size_t> migration_dest_;
  std::vector<std::size_t> arrived_;  // migrated, awaiting the step barrier
  SimReport report_;
};

}  // namespace

SimReport run_simulation(const PlacementLog& log, const TraceSet& trace, const SimConfig& config) {
  if (log.trace_fingerprint != trace.fingerprint()) {
    throw DataError("placement log was produced from a different trace");
  }
  return Simulation(log, trace, config).run();
}

std::array<AllocationErrorStats, kNumResources> allocation_error(const PlacementLog& log,
                                                                 const TraceSet& trace,
                                                                 const Granularity& g) {
  std::array<AllocationErrorStats, kNumResources> out;
  for (const Placement& p : log.entries) {
    if (!p.server || !p.allocation.predicted) continue;
    const VMRecord& vm = trace.vms()[p.vm];
    const HybridAllocation& a = p.allocation;
    for (Resource r : kAllResources) {
      const int i = index(r);
      const double requested = vm.requested(i);
      if (requested <= 0) continue;
      AllocationErrorStats& stats = out[i];
      for (const WindowMax& w : window_maxima(trace.series(p.vm, r), a.window_hours)) {
        const double allocated = static_cast<double>(a.guaranteed(i) + a.va(i, w.window)) * g.unit(i);
        const double observed = w.max / 100.0 * requested;
        ++stats.instances;
        if (observed > allocated + kEps) ++stats.under_events;
        stats.over_pct.push_back(100.0 * std::max(0.0, allocated - observed) / requested);
      }
    }
  }
  for (AllocationErrorStats& s : out) {
    double sum = 0;
    for (double v : s.over_pct) sum += v;
    s.mean_over_pct = s.over_pct.empty() ? 0.0 : sum / static_cast<double>(s.over_pct.size());
  }
  return out;
}

void write_timeline(const SimReport& report, const TraceSet& trace, std::ostream& out) {
  out << "time_unix,server_id,guaranteed_gb,pool_gb,pool_demand_gb,working_set_gb,mem_violation,"
         "cpu_demand_cores,cpu_violation\n";
  for (const TimelineRow& r : report.timeline) {
    out << format_double(r.time) << ',' << trace.servers()[r.server].server_id << ','
        << format_double(r.guaranteed_gb) << ',' << format_double(r.pool_gb) << ',' << format_double(r.pool_demand_gb) << ','
        << format_double(r.working_set_gb) << ',' << (r.mem_violation ? 1 : 0) << ','
        << format_double(r.cpu_demand) << ',' << (r.cpu_violation ? 1 : 0) << '\n';
  }
}

void write_events(const SimReport& report, const TraceSet& trace, std::ostream& out) {
  out << "time_unix,server_id,kind,trigger,amount_gb,vm_id,destination,completion_unix,blocked\n";
  for (const MitigationEvent& e : report.events) {
    out << format_double(e.time) << ',' << trace.servers()[e.server].server_id << ','
        << mitigation_kind_name(e.kind) << ',' << trigger_name(e.trigger) << ','
        << format_double(e.amount_gb) << ',' << (e.vm ? trace.vms()[*e.vm].vm_id : "") << ','
        << (e.destination ? trace.servers()[*e.destination].server_id : "") << ','
        << format_double(e.completion) << ',' << (e.blocked ? 1 : 0) << '\n';
  }
}

void write_episodes(const SimReport& report, const TraceSet& trace, std::ostream& out) {
  out << "server_id,resource,start_unix,end_unix,duration_s,end_cause\n";
  for (const Episode& e : report.episodes) {
    out << trace.servers()[e.server].server_id << ',' << resource_name(e.resource) << ','
        << format_double(e.start) << ',' << format_double(e.end) << ','
        << format_double(e.duration()) << ',' << episode_end_name(e.cause) << '\n';
  }
}

}  // namespace oversub
