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


#include "oversub/hybrid.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "oversub/errors.h"

namespace oversub {

namespace {

constexpr int kMem = index(Resource::kMem);

std::string schema_message(int a, int b) {
  return "window schema mismatch: " + std::to_string(a) + " vs " + std::to_string(b) +
         " windows";
}

}  // namespace

UnitTable HybridAllocation::allocated() const {
  return va.colwise() + guaranteed;
}

ResourceUnits HybridAllocation::max_va() const {
  if (va.cols() == 0) return ResourceUnits::Zero();
  return va.rowwise().maxCoeff();
}

void HybridAllocation::validate() const {
  if (va.cols() != peak.cols() || va.cols() == 0 || va.cols() * window_hours != 24) {
    throw InvariantError("allocation windows do not tile the day");
  }
  if (!all_nonnegative(guaranteed) || !all_nonnegative(va)) {
    throw InvariantError("allocation has a negative component");
  }
  if (!fits_within(guaranteed + max_va(), requested)) {
    throw InvariantError("guaranteed + max va exceeds the request");
  }
}

bool HybridAllocation::operator==(const HybridAllocation& o) const {
  return window_hours == o.window_hours && predicted == o.predicted &&
         (requested == o.requested).all() && (guaranteed == o.guaranteed).all() &&
         va.cols() == o.va.cols() && (va == o.va).all() && (peak == o.peak).all();
}

std::int64_t percent_to_units(double pct, double requested, double unit) {
  return std::max<std::int64_t>(0, units_ceil(pct / 100.0 * requested, unit));
}

std::int64_t pa_demand(std::span<const int> p_x, double requested, double unit) {
  int hi = 0;
  for (int v : p_x) hi = std::max(hi, v);
  return percent_to_units(hi, requested, unit);
}

std::vector<std::int64_t> va_demand(std::span<const int> p_max, std::int64_t pa,
                                    double requested, double unit) {
  std::vector<std::int64_t> out;
  out.reserve(p_max.size());
  for (int v : p_max) out.push_back(std::max<std::int64_t>(0, percent_to_units(v, requested, unit) - pa));
  return out;
}

HybridAllocation make_allocation(int window_hours, const ResourceUnits& requested,
                                 const UnitTable& p_x_units, const UnitTable& p_max_units) {
  check_window_hours(window_hours);
  const int windows = 24 / window_hours;
  if (p_x_units.cols() != windows || p_max_units.cols() != windows) {
    throw InvariantError(schema_message(static_cast<int>(p_x_units.cols()), windows));
  }
  HybridAllocation a;
  a.window_hours = window_hours;
  a.predicted = true;
  a.requested = requested;
  a.va.resize(kNumResources, windows);
  a.peak.resize(kNumResources, windows);
  for (Resource r : kAllResources) {
    const int i = index(r);
    if (fungibility(r) == Fungibility::kNonFungible) {
      a.guaranteed(i) = p_x_units.row(i).maxCoeff();
      a.va.row(i) = (p_max_units.row(i) - a.guaranteed(i)).max(0);
      a.peak.row(i) = p_max_units.row(i);
    } else {
      a.guaranteed(i) = p_x_units.row(i).minCoeff();
      a.va.row(i) = p_x_units.row(i) - a.guaranteed(i);
      a.peak.row(i) = p_x_units.row(i);
    }
  }
  return a;
}

HybridAllocation build_allocation(const std::optional<TimeWindowProfile>& profile,
                                  const VMRecord& vm, int window_hours,
                                  const Granularity& granularity) {
  check_window_hours(window_hours);
  ResourceUnits requested;
  for (int i = 0; i < kNumResources; ++i) {
    requested(i) = units_ceil(vm.requested(i), granularity.unit(i));
  }
  if (!profile) {
    const int windows = 24 / window_hours;
    HybridAllocation a;
    a.window_hours = window_hours;
    a.requested = requested;
    a.guaranteed = requested;
    a.va = UnitTable::Zero(kNumResources, windows);
    a.peak = requested.replicate(1, windows);
    return a;
  }
  if (profile->window_hours != window_hours) {
    throw InvariantError(schema_message(profile->windows(), 24 / window_hours));
  }
  const int windows = profile->windows();
  UnitTable p_x(kNumResources, windows), p_max(kNumResources, windows);
  for (int i = 0; i < kNumResources; ++i) {
    for (int t = 0; t < windows; ++t) {
      p_x(i, t) = percent_to_units(profile->p_x(i, t), vm.requested(i), granularity.unit(i));
      p_max(i, t) = percent_to_units(profile->p_max(i, t), vm.requested(i), granularity.unit(i));
    }
  }
  return make_allocation(window_hours, requested, p_x, p_max);
}

PoolSummary server_pools(std::span<const HybridAllocation> allocations) {
  PoolSummary s;
  if (allocations.empty()) {
    s.va_sum = UnitTable::Zero(kNumResources, 0);
    return s;
  }
  const int windows = allocations.front().windows();
  s.va_sum = UnitTable::Zero(kNumResources, windows);
  for (const HybridAllocation& a : allocations) {
    if (a.windows() != windows) throw InvariantError(schema_message(a.windows(), windows));
    s.guaranteed += a.guaranteed;
    s.va_sum += a.va;
  }
  s.pool = s.va_sum.rowwise().maxCoeff();
  return s;
}

ServerState::ServerState(ResourceUnits capacity, int window_hours, double backing_ratio)
    : capacity_(capacity), window_hours_(window_hours), backing_ratio_(backing_ratio) {
  check_window_hours(window_hours);
  if (!(backing_ratio > 0.0 && backing_ratio <= 1.0)) {
    throw ConfigError("backing_ratio must be in (0,1]");
  }
  if (!all_nonnegative(capacity)) throw InvariantError("negative server capacity");
  va_sum_ = UnitTable::Zero(kNumResources, 24 / window_hours);
}

ResourceUnits ServerState::oversub_pool() const { return va_sum_.rowwise().maxCoeff(); }

ResourceUnits ServerState::backed_pool() const {
  ResourceUnits p = oversub_pool();
  p(kMem) = static_cast<std::int64_t>(
      std::ceil(static_cast<double>(p(kMem)) * backing_ratio_ - kUnitEpsilon));
  return p;
}

void ServerState::set_extension(std::int64_t units) {
  if (units < 0) throw InvariantError("negative pool extension");
  extension_ = units;
}

std::int64_t ServerState::unallocated_memory() const {
  return capacity_(kMem) - guaranteed_(kMem) - backed_pool()(kMem) - extension_;
}

const HybridAllocation* ServerState::find(std::size_t vm) const {
  for (const auto& [id, a] : placed_) {
    if (id == vm) return &a;
  }
  return nullptr;
}

void ServerState::check_schema(const HybridAllocation& a) const {
  if (a.windows() != windows()) throw InvariantError(schema_message(a.windows(), windows()));
}

FitResult ServerState::fit_check(const HybridAllocation& candidate) const {
  check_schema(candidate);
  const int w = windows();
  FitResult out;
  out.slack.resize(kNumResources, w + 1);
  for (int i = 0; i < kNumResources; ++i) {
    const std::int64_t reserve = i == kMem ? extension_ : 0;
    const std::int64_t base = capacity_(i) - reserve - guaranteed_(i) - candidate.guaranteed(i);
    for (int t = 0; t < w; ++t) out.slack(i, t) = base - va_sum_(i, t) - candidate.va(i, t);
    out.slack(i, w) = base;
  }
  out.fits = (out.slack >= 0).all();
  return out;
}

std::optional<double> ServerState::fit_score(const HybridAllocation& candidate) const {
  check_schema(candidate);
  const int w = windows();
  double tightest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kNumResources; ++i) {
    const std::int64_t reserve = i == kMem ? extension_ : 0;
    const std::int64_t base = capacity_(i) - reserve - guaranteed_(i) - candidate.guaranteed(i);
    std::int64_t lowest = base;
    for (int t = 0; t < w; ++t) lowest = std::min(lowest, base - va_sum_(i, t) - candidate.va(i, t));
    if (lowest < 0) return std::nullopt;
    if (capacity_(i) > 0) {
      tightest = std::min(tightest, static_cast<double>(lowest) / static_cast<double>(capacity_(i)));
    }
  }
  return tightest;
}

void ServerState::add(std::size_t vm, HybridAllocation allocation) {
  check_schema(allocation);
  if (find(vm)) throw InvariantError("VM placed twice on one server");
  guaranteed_ += allocation.guaranteed;
  va_sum_ += allocation.va;
  placed_.emplace_back(vm, std::move(allocation));
}

HybridAllocation ServerState::remove(std::size_t vm) {
  auto it = std::find_if(placed_.begin(), placed_.end(),
                         [vm](const auto& p) { return p.first == vm; });
  if (it == placed_.end()) throw InvariantError("removing a VM that is not placed");
  HybridAllocation a = std::move(it->second);
  placed_.erase(it);
  guaranteed_ -= a.guaranteed;
  va_sum_ -= a.va;
  return a;
}

void ServerState::check_invariants() const {
  std::vector<HybridAllocation> all;
  all.reserve(placed_.size());
  for (const auto& [id, a] : placed_) {
    a.validate();
    all.push_back(a);
  }
  if (!all.empty()) {
    const PoolSummary fresh = server_pools(all);
    if ((fresh.guaranteed != guaranteed_).any() || (fresh.va_sum != va_sum_).any()) {
      throw InvariantError("incremental pools diverge from recomputation");
    }
  } else if ((guaranteed_ != 0).any() || (va_sum_ != 0).any()) {
    throw InvariantError("empty server with nonzero pools");
  }
  ResourceUnits committed = guaranteed_ + oversub_pool();
  committed(kMem) += extension_;
  if (!fits_within(committed, capacity_)) {
    throw InvariantError("guaranteed + pool exceeds capacity");
  }
  for (int t = 0; t < windows(); ++t) {
    ResourceUnits total = guaranteed_ + va_sum_.col(t);
    if (!fits_within(total, capacity_)) {
      throw InvariantError("window " + std::to_string(t) + " total exceeds capacity");
    }
  }
}

}  // namespace oversub
