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


#ifndef OVERSUB_HYBRID_H_
#define OVERSUB_HYBRID_H_

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "oversub/predict.h"
#include "oversub/resources.h"
#include "oversub/trace.h"

namespace oversub {

enum class Fungibility { kFungible, kNonFungible };

/// Memory is the only resource that cannot be multiplexed without a static
/// backing split.
constexpr Fungibility fungibility(Resource r) {
  return r == Resource::kMem ? Fungibility::kNonFungible : Fungibility::kFungible;
}

/// A VM's split into a guaranteed amount and per-window oversubscribed
/// demand, in management units.
///
/// Memory: guaranteed = max_t p_x_t (the PA portion) and
/// va_t = max(0, p_max_t - guaranteed). Fungible resources: the per-window
/// demand is p_x_t, guaranteed is its minimum over windows and va_t the rest.
/// `peak` holds the per-window fit vector (p_max_t for memory, p_x_t otherwise).
struct HybridAllocation {
  int window_hours = 24;
  bool predicted = false;  // false: full request guaranteed, no VA
  ResourceUnits requested = ResourceUnits::Zero();
  ResourceUnits guaranteed = ResourceUnits::Zero();
  UnitTable va;
  UnitTable peak;

  int windows() const { return static_cast<int>(va.cols()); }
  /// guaranteed + va_t, the amount reserved for the VM in window t.
  UnitTable allocated() const;
  ResourceUnits max_va() const;
  /// Throws InvariantError if va < 0, guaranteed < 0, or
  /// guaranteed + max_t va_t > requested.
  void validate() const;

  bool operator==(const HybridAllocation& o) const;
};

/// Percent of `requested` to whole units, rounded up.
std::int64_t percent_to_units(double pct, double requested, double unit);

/// PA portion: max over windows of p_x, as units of `requested`.
std::int64_t pa_demand(std::span<const int> p_x, double requested, double unit);
/// Per-window VA: max(0, p_max_t * requested - pa), as units.
std::vector<std::int64_t> va_demand(std::span<const int> p_max, std::int64_t pa,
                                    double requested, double unit);

/// Core split from per-window unit tables (rows follow kAllResources).
HybridAllocation make_allocation(int window_hours, const ResourceUnits& requested,
                                 const UnitTable& p_x_units, const UnitTable& p_max_units);

/// Allocation for a VM; without a profile the full request is guaranteed
/// over `window_hours` windows.
HybridAllocation build_allocation(const std::optional<TimeWindowProfile>& profile,
                                  const VMRecord& vm, int window_hours,
                                  const Granularity& granularity = {});

/// Aggregate pools of a set of allocations sharing one window schema.
struct PoolSummary {
  ResourceUnits guaranteed = ResourceUnits::Zero();  // sum of guaranteed
  UnitTable va_sum;                                  // sum of va per window
  ResourceUnits pool = ResourceUnits::Zero();        // max_t va_sum
};

/// Throws InvariantError when window schemas differ.
PoolSummary server_pools(std::span<const HybridAllocation> allocations);

/// Per-resource slack: one column per window plus a final guaranteed-sum
/// column. Negative entries mean the candidate does not fit.
struct FitResult {
  bool fits = false;
  UnitTable slack;
};

/// A server's placed allocations and multiplexed pools.
class ServerState {
 public:
  ServerState(ResourceUnits capacity, int window_hours, double backing_ratio = 1.0);

  const ResourceUnits& capacity() const { return capacity_; }
  int window_hours() const { return window_hours_; }
  int windows() const { return static_cast<int>(va_sum_.cols()); }
  double backing_ratio() const { return backing_ratio_; }

  const ResourceUnits& guaranteed_sum() const { return guaranteed_; }
  const UnitTable& va_sum() const { return va_sum_; }
  /// Multiplexed pool per resource: max_t sum of va_t.
  ResourceUnits oversub_pool() const;
  /// Pool actually backed: memory pool scaled by the backing ratio, rounded up.
  ResourceUnits backed_pool() const;
  /// Extra memory units granted to the pool at runtime.
  std::int64_t extension() const { return extension_; }
  void set_extension(std::int64_t units);
  /// Memory units neither guaranteed, backed, nor granted.
  std::int64_t unallocated_memory() const;

  std::span<const std::pair<std::size_t, HybridAllocation>> placed() const { return placed_; }
  std::size_t size() const { return placed_.size(); }
  bool empty() const { return placed_.empty(); }
  const HybridAllocation* find(std::size_t vm) const;

  FitResult fit_check(const HybridAllocation& candidate) const;
  /// Tightest post-placement slack over resources and slots, normalized by
  /// capacity; nullopt when the candidate does not fit. Allocation free.
  std::optional<double> fit_score(const HybridAllocation& candidate) const;

  /// Adds without checking fit; callers check first.
  void add(std::size_t vm, HybridAllocation allocation);
  /// Removes and returns a placed allocation; throws InvariantError if absent.
  HybridAllocation remove(std::size_t vm);

  /// Recomputes pools from scratch and checks every capacity invariant;
  /// throws InvariantError on violation.
  void check_invariants() const;

 private:
  void check_schema(const HybridAllocation& a) const;

  ResourceUnits capacity_;
  int window_hours_;
  double backing_ratio_;
  ResourceUnits guaranteed_ = ResourceUnits::Zero();
  UnitTable va_sum_;
  std::int64_t extension_ = 0;
  std::vector<std::pair<std::size_t, HybridAllocation>> placed_;
};

/// fit_check as a free function.
inline FitResult fit_check(const ServerState& server, const HybridAllocation& candidate) {
  return server.fit_check(candidate);
}

}  // namespace oversub

#endif  // OVERSUB_HYBRID_H_
