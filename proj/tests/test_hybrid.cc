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
#include <random>
#include <vector>

#include "doctest.h"
#include "oversub/errors.h"
#include "oversub/hybrid.h"
#include "support.h"

namespace oversub {
namespace {

constexpr int kMem = index(Resource::kMem);
constexpr int kCpu = index(Resource::kCpu);

UnitTable row_table(int row, std::vector<std::int64_t> values) {
  UnitTable t = UnitTable::Zero(kNumResources, static_cast<Eigen::Index>(values.size()));
  for (std::size_t w = 0; w < values.size(); ++w) t(row, static_cast<Eigen::Index>(w)) = values[w];
  return t;
}

ResourceUnits units(std::int64_t cpu, std::int64_t mem, std::int64_t net, std::int64_t ssd) {
  ResourceUnits u;
  u << cpu, mem, net, ssd;
  return u;
}

// Memory-only allocation from unit tables over three 8-hour windows.
HybridAllocation mem_alloc(std::int64_t requested, std::vector<std::int64_t> p_x,
                           std::vector<std::int64_t> p_max) {
  return make_allocation(8, units(0, requested, 0, 0), row_table(kMem, std::move(p_x)),
                         row_table(kMem, std::move(p_max)));
}

HybridAllocation vm1() { return mem_alloc(32, {16, 8, 13}, {28, 8, 22}); }
HybridAllocation vm2() { return mem_alloc(32, {12, 12, 12}, {10, 18, 24}); }

TEST_CASE("PA is the window max of p_x, rounded up to the granularity") {
  const std::vector<int> p_x = {50, 25, 40};
  CHECK(pa_demand(p_x, 32, 1.0) == 16);
  const std::vector<int> full = {100, 100, 100};
  CHECK(pa_demand(full, 32, 1.0) == 32);
  CHECK(percent_to_units(30, 3, 0.25) == 4);   // 0.9 cores -> 1.0
  CHECK(percent_to_units(33, 10, 0.1) == 33);  // 3.3 Gbps exactly
  CHECK(percent_to_units(0, 10, 0.1) == 0);
}

TEST_CASE("VA is the clamped excess over PA per window") {
  // p_max in percent of 32 GB: 28, 8, 22 GB.
  const std::vector<int> p_max1 = {88, 25, 69};
  CHECK(va_demand(p_max1, 16, 32, 1.0) == std::vector<std::int64_t>{13, 0, 7});
  CHECK((vm1().va.row(kMem) == row_table(kMem, {12, 0, 6}).row(kMem)).all());
  CHECK((vm2().va.row(kMem) == row_table(kMem, {0, 6, 12}).row(kMem)).all());
  CHECK(vm1().guaranteed(kMem) == 16);
  CHECK(vm2().guaranteed(kMem) == 12);
  const std::vector<int> low = {20, 30, 10};
  CHECK(va_demand(low, 16, 32, 1.0) == std::vector<std::int64_t>{0, 0, 0});
}

TEST_CASE("profile to allocation") {
  TimeWindowProfile p;
  p.window_hours = 8;
  p.p_x = WindowTable<int>::Zero(kNumResources, 3);
  p.p_max = WindowTable<int>::Zero(kNumResources, 3);
  p.p_x.row(kMem) << 50, 25, 40;
  p.p_max.row(kMem) << 90, 25, 70;
  p.p_x.row(kCpu) << 20, 60, 40;
  p.p_max.row(kCpu) << 40, 80, 60;
  const VMRecord vm = testing::make_vm("a", "s", "c", make_resources(4, 32, 10, 64), 0, 300);
  const HybridAllocation a = build_allocation(p, vm, 8);
  a.validate();
  CHECK(a.predicted);
  CHECK(a.requested(kCpu) == 16);
  CHECK(a.guaranteed(kMem) == 16);
  CHECK(a.va(kMem, 0) == 13);  // ceil(28.8) - 16
  // Fungible: demand follows p_x; guaranteed is the floor over windows.
  CHECK(a.guaranteed(kCpu) == 4);
  CHECK(a.va(kCpu, 1) == 6);
  CHECK(a.peak(kCpu, 2) == 7);  // ceil(1.6 / 0.25)
  CHECK_THROWS_AS(build_allocation(p, vm, 4), InvariantError);

  const HybridAllocation none = build_allocation(std::nullopt, vm, 8);
  CHECK_FALSE(none.predicted);
  CHECK((none.guaranteed == none.requested).all());
  CHECK((none.va == 0).all());
}

TEST_CASE("worked pools: guaranteed 28, pool 18, total 46") {
  const std::vector<HybridAllocation> both = {vm1(), vm2()};
  const PoolSummary s = server_pools(both);
  CHECK(s.guaranteed(kMem) == 28);
  CHECK((s.va_sum.row(kMem) == row_table(kMem, {12, 6, 18}).row(kMem)).all());
  CHECK(s.pool(kMem) == 18);
  CHECK(s.guaranteed(kMem) + s.pool(kMem) == 46);

  const std::vector<HybridAllocation> one = {vm1()};
  CHECK(server_pools(one).pool(kMem) == 12);

  const std::vector<HybridAllocation> same = {mem_alloc(20, {0, 0, 0}, {10, 0, 0}),
                                              mem_alloc(20, {0, 0, 0}, {10, 0, 0})};
  CHECK(server_pools(same).pool(kMem) == 20);
}

TEST_CASE("backing ratio scales only the memory pool") {
  ServerState s(units(0, 48, 0, 0), 8, 0.7);
  s.add(0, vm1());
  s.add(1, vm2());
  CHECK(s.oversub_pool()(kMem) == 18);
  CHECK(s.backed_pool()(kMem) == 13);  // ceil(12.6)
  CHECK(s.unallocated_memory() == 48 - 28 - 13);
  CHECK_THROWS_AS(ServerState(units(0, 48, 0, 0), 8, 0.0), ConfigError);
  CHECK_THROWS_AS(ServerState(units(0, 48, 0, 0), 8, 1.5), ConfigError);
}

TEST_CASE("CPU windows {2,6,4} into free {4,6,8}") {
  // 8 cores; an existing VM uses {4,2,0} cores, leaving {4,6,8}.
  ServerState s(units(32, 0, 0, 0), 8);
  s.add(0, make_allocation(8, units(16, 0, 0, 0), row_table(kCpu, {16, 8, 0}),
                           row_table(kCpu, {16, 8, 0})));
  const HybridAllocation cand = make_allocation(8, units(24, 0, 0, 0), row_table(kCpu, {8, 24, 16}),
                                                row_table(kCpu, {8, 24, 16}));
  const FitResult r = fit_check(s, cand);
  CHECK(r.fits);
  CHECK(r.slack(kCpu, 0) == 8);  // 2 cores
  CHECK(r.slack(kCpu, 1) == 0);
  CHECK(r.slack(kCpu, 2) == 16);  // 4 cores
  CHECK(r.slack(kCpu, 3) == 24);
}

TEST_CASE("worked memory example fits a 48 GB server and a third VM2 is rejected") {
  ServerState s(units(0, 48, 0, 0), 8);
  CHECK(s.fit_check(vm1()).fits);
  s.add(0, vm1());
  const FitResult second = s.fit_check(vm2());
  CHECK(second.fits);
  CHECK(second.slack(kMem, 3) == 20);
  CHECK(second.slack(kMem, 2) == 2);
  s.add(1, vm2());
  s.check_invariants();
  const FitResult third = s.fit_check(vm2());
  CHECK_FALSE(third.fits);
  CHECK(third.slack(kMem, 2) < 0);
  CHECK_FALSE(s.fit_score(vm2()).has_value());
}

TEST_CASE("pool extension is reserved out of memory capacity") {
  ServerState s(units(0, 48, 0, 0), 8);
  s.add(0, vm1());
  s.set_extension(16);
  CHECK_FALSE(s.fit_check(vm2()).fits);
  s.set_extension(0);
  CHECK(s.fit_check(vm2()).fits);
  CHECK_THROWS_AS(s.set_extension(-1), InvariantError);
}

TEST_CASE("schema mismatch is an error") {
  ServerState s(units(0, 48, 0, 0), 24);
  CHECK_THROWS_AS(s.fit_check(vm1()), InvariantError);
  CHECK_THROWS_AS(s.add(0, vm1()), InvariantError);
  CHECK_THROWS_AS(mem_alloc(32, {1}, {2}), InvariantError);
  const std::vector<HybridAllocation> mixed = {
      vm1(), make_allocation(24, units(0, 32, 0, 0), row_table(kMem, {1}), row_table(kMem, {2}))};
  CHECK_THROWS_AS(server_pools(mixed), InvariantError);
}

// ---- Properties ----------------------------------------------------------------

struct RawVm {
  ResourceUnits requested;
  UnitTable p_x, p_max;
};

RawVm random_raw(std::mt19937_64& rng, int windows) {
  RawVm v;
  v.p_x.resize(kNumResources, windows);
  v.p_max.resize(kNumResources, windows);
  for (int i = 0; i < kNumResources; ++i) {
    v.requested(i) = 1 + static_cast<std::int64_t>(rng() % 40);
    for (int t = 0; t < windows; ++t) {
      const auto hi = static_cast<std::int64_t>(rng() % (v.requested(i) + 1));
      v.p_max(i, t) = hi;
      v.p_x(i, t) = static_cast<std::int64_t>(rng() % (hi + 1));
    }
  }
  return v;
}

HybridAllocation from_raw(const RawVm& v, int windows) {
  return make_allocation(24 / windows, v.requested, v.p_x, v.p_max);
}

// Direct restatement: memory reserves max(max_t p_x, p_max_t) in window t,
// fungible resources reserve p_x_t; the static slot holds the guaranteed parts.
struct Oracle {
  std::int64_t guaranteed(const RawVm& v, int i) const {
    std::int64_t g = i == kMem ? 0 : v.p_x(i, 0);
    for (int t = 0; t < v.p_x.cols(); ++t) {
      g = i == kMem ? std::max(g, v.p_x(i, t)) : std::min(g, v.p_x(i, t));
    }
    return g;
  }
  std::int64_t va(const RawVm& v, int i, int t) const {
    const std::int64_t g = guaranteed(v, i);
    return i == kMem ? std::max<std::int64_t>(0, v.p_max(i, t) - g) : v.p_x(i, t) - g;
  }
  std::int64_t pool(const std::vector<RawVm>& vms, int i) const {
    std::int64_t best = 0;
    for (int t = 0; t < vms.front().p_x.cols(); ++t) {
      std::int64_t sum = 0;
      for (const RawVm& v : vms) sum += va(v, i, t);
      best = std::max(best, sum);
    }
    return best;
  }
  bool fits(const std::vector<RawVm>& placed, const RawVm& cand, const ResourceUnits& cap) const {
    std::vector<RawVm> all = placed;
    all.push_back(cand);
    for (int i = 0; i < kNumResources; ++i) {
      std::int64_t g = 0;
      for (const RawVm& v : all) g += guaranteed(v, i);
      if (g > cap(i)) return false;
      if (g + pool(all, i) > cap(i)) return false;
    }
    return true;
  }
};

TEST_CASE("pools and fit match a brute-force restatement") {
  std::mt19937_64 rng(11);
  const Oracle oracle;
  for (int trial = 0; trial < 400; ++trial) {
    const int windows = std::vector<int>{1, 2, 3, 4, 6, 8}[rng() % 6];
    const int n = 1 + static_cast<int>(rng() % 10);
    std::vector<RawVm> raws;
    for (int k = 0; k < n; ++k) raws.push_back(random_raw(rng, windows));
    ResourceUnits cap;
    for (int i = 0; i < kNumResources; ++i) cap(i) = 20 + static_cast<std::int64_t>(rng() % 200);

    ServerState s(cap, 24 / windows);
    std::vector<RawVm> placed;
    for (const RawVm& raw : raws) {
      const HybridAllocation a = from_raw(raw, windows);
      a.validate();
      for (int i = 0; i < kNumResources; ++i) {
        REQUIRE(a.guaranteed(i) == oracle.guaranteed(raw, i));
        for (int t = 0; t < windows; ++t) REQUIRE(a.va(i, t) == oracle.va(raw, i, t));
      }
      const bool expect = oracle.fits(placed, raw, cap);
      REQUIRE(s.fit_check(a).fits == expect);
      REQUIRE(s.fit_score(a).has_value() == expect);
      if (expect) {
        s.add(placed.size(), a);
        placed.push_back(raw);
        s.check_invariants();
      }
    }
    if (!placed.empty()) {
      for (int i = 0; i < kNumResources; ++i) {
        REQUIRE(s.oversub_pool()(i) == oracle.pool(placed, i));
      }
    }
  }
}

TEST_CASE("multiplexed pool lies between the largest single VA and the sum of VA maxima") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const int windows = std::vector<int>{2, 3, 6}[rng() % 3];
    std::vector<HybridAllocation> allocs;
    const int n = 1 + static_cast<int>(rng() % 10);
    for (int k = 0; k < n; ++k) allocs.push_back(from_raw(random_raw(rng, windows), windows));
    const PoolSummary p = server_pools(allocs);
    ResourceUnits sum_max = ResourceUnits::Zero(), max_max = ResourceUnits::Zero();
    for (const auto& a : allocs) {
      sum_max += a.max_va();
      max_max = max_max.max(a.max_va());
    }
    REQUIRE(fits_within(p.pool, sum_max));
    REQUIRE(fits_within(max_max, p.pool));
  }
}

TEST_CASE("remove then re-add restores the exact pools") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    ServerState s(units(1000, 1000, 1000, 1000), 4);
    const int n = 2 + static_cast<int>(rng() % 8);
    for (int k = 0; k < n; ++k) s.add(static_cast<std::size_t>(k), from_raw(random_raw(rng, 6), 6));
    const ResourceUnits g = s.guaranteed_sum();
    const UnitTable va = s.va_sum();
    const auto victim = static_cast<std::size_t>(rng() % n);
    HybridAllocation a = s.remove(victim);
    s.check_invariants();
    s.add(victim, a);
    REQUIRE((s.guaranteed_sum() == g).all());
    REQUIRE((s.va_sum() == va).all());
  }
  ServerState empty(units(1, 1, 1, 1), 4);
  CHECK_THROWS_AS(empty.remove(0), InvariantError);
}

TEST_CASE("fit is monotone under componentwise shrinking") {
  std::mt19937_64 rng(14);
  int fitting = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    ResourceUnits cap;
    for (int i = 0; i < kNumResources; ++i) cap(i) = 30 + static_cast<std::int64_t>(rng() % 60);
    ServerState s(cap, 8);
    for (int k = 0; k < 3; ++k) {
      const HybridAllocation a = from_raw(random_raw(rng, 3), 3);
      if (s.fit_check(a).fits) s.add(static_cast<std::size_t>(k), a);
    }
    const HybridAllocation big = from_raw(random_raw(rng, 3), 3);
    if (!s.fit_check(big).fits) continue;
    ++fitting;
    HybridAllocation small = big;
    for (int i = 0; i < kNumResources; ++i) {
      small.guaranteed(i) = static_cast<std::int64_t>(rng() % (big.guaranteed(i) + 1));
      for (int t = 0; t < 3; ++t) small.va(i, t) = static_cast<std::int64_t>(rng() % (big.va(i, t) + 1));
    }
    REQUIRE(s.fit_check(small).fits);
    REQUIRE(*s.fit_score(small) >= *s.fit_score(big));
  }
  CHECK(fitting > 100);
}

TEST_CASE("unpredicted VMs pack exactly like full reservations") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 300; ++trial) {
    const ResourceVector cap = make_resources(16, 64, 20, 400);
    ServerState s(capacity_units(cap, Granularity{}), 4);
    ResourceVector used = ResourceVector::Zero();
    for (int k = 0; k < 12; ++k) {
      const ResourceVector req = make_resources(0.25 * (1 + rng() % 32), 1.0 + rng() % 32,
                                                0.1 * (1 + rng() % 80), 1.0 + rng() % 200);
      const VMRecord vm = testing::make_vm("v", "s", "c", req, 0, 300);
      const HybridAllocation a = build_allocation(std::nullopt, vm, 4);
      const bool classic = fits_within(used + req, cap + 1e-9);
      REQUIRE(s.fit_check(a).fits == classic);
      if (classic) {
        s.add(static_cast<std::size_t>(k), a);
        used += req;
      }
    }
    REQUIRE((s.oversub_pool() == 0).all());
  }
}

}  // namespace
}  // namespace oversub
