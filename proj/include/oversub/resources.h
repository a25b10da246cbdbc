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

#ifndef OVERSUB_RESOURCES_H_
#define OVERSUB_RESOURCES_H_

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>

namespace oversub {

/// Resource dimensions tracked for every VM and server, in a fixed order.
enum class Resource : int { kCpu = 0, kMem = 1, kNet = 2, kSsd = 3 };

inline constexpr int kNumResources = 4;
inline constexpr std::array<Resource, kNumResources> kAllResources = {
    Resource::kCpu, Resource::kMem, Resource::kNet, Resource::kSsd};

constexpr int index(Resource r) { return static_cast<int>(r); }

std::string_view resource_name(Resource r);
std::optional<Resource> parse_resource(std::string_view name);

/// Per-resource quantities. Scalar is `double` for absolute amounts
/// (cores, GB, Gbps, GB) and `std::int64_t` for counts of management units.
template <typename Scalar>
using ResourceArray = Eigen::Array<Scalar, kNumResources, 1>;

/// Per-resource x per-window table (rows follow kAllResources).
template <typename Scalar>
using WindowTable = Eigen::Array<Scalar, kNumResources, Eigen::Dynamic>;

using ResourceVector = ResourceArray<double>;
using ResourceUnits = ResourceArray<std::int64_t>;
using UnitTable = WindowTable<std::int64_t>;

inline ResourceVector make_resources(double cpu, double mem, double net,
                                     double ssd) {
  ResourceVector v;
  v << cpu, mem, net, ssd;
  return v;
}

template <typename Derived>
auto& at(Eigen::ArrayBase<Derived>& v, Resource r) {
  return v.derived()(index(r));
}
template <typename Derived>
auto at(const Eigen::ArrayBase<Derived>& v, Resource r) {
  return v.derived()(index(r));
}

/// Componentwise a <= b.
template <typename A, typename B>
bool fits_within(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b) {
  return (a.derived() <= b.derived()).all();
}

template <typename Derived>
bool all_nonnegative(const Eigen::ArrayBase<Derived>& v) {
  return (v.derived() >= 0).all();
}

/// Resource management granularity: allocations are made in whole units.
struct Granularity {
  ResourceVector unit = make_resources(0.25, 1.0, 0.1, 1.0);

  double operator()(Resource r) const { return unit(index(r)); }
};

// Tolerance for snapping floating amounts onto the unit grid; absorbs
// representation error such as 0.1 * 3 != 0.3.
inline constexpr double kUnitEpsilon = 1e-9;

/// Smallest whole number of units covering `amount`.
inline std::int64_t units_ceil(double amount, double unit) {
  return static_cast<std::int64_t>(std::ceil(amount / unit - kUnitEpsilon));
}

/// Largest whole number of units contained in `amount`.
inline std::int64_t units_floor(double amount, double unit) {
  return static_cast<std::int64_t>(std::floor(amount / unit + kUnitEpsilon));
}

inline ResourceUnits capacity_units(const ResourceVector& capacity,
                                    const Granularity& g) {
  ResourceUnits u;
  for (int i = 0; i < kNumResources; ++i) {
    u(i) = units_floor(capacity(i), g.unit(i));
  }
  return u;
}

inline ResourceVector to_amounts(const ResourceUnits& units,
                                 const Granularity& g) {
  return units.cast<double>() * g.unit;
}

}  // namespace oversub

#endif  // OVERSUB_RESOURCES_H_
