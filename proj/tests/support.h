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


// Builders shared by the test binaries.

#ifndef OVERSUB_TESTS_SUPPORT_H_
#define OVERSUB_TESTS_SUPPORT_H_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "oversub/resources.h"
#include "oversub/trace.h"

namespace oversub::testing {

inline constexpr std::int64_t kT0 = 1700006400;  // UTC midnight
inline constexpr std::int64_t kHour = 3600;
inline constexpr std::int64_t kDay = 86400;

inline VMRecord make_vm(std::string id, std::string sub, std::string config,
                        ResourceVector requested, std::int64_t start, std::int64_t end) {
  VMRecord vm;
  vm.vm_id = std::move(id);
  vm.subscription_id = std::move(sub);
  vm.vm_config = std::move(config);
  vm.requested = requested;
  vm.start = start;
  vm.end = end;
  return vm;
}

using UtilFn = std::function<double(Resource, std::int64_t)>;

inline VmSeries make_series(const VMRecord& vm, const UtilFn& fn) {
  VmSeries out;
  for (Resource r : kAllResources) {
    UtilizationSeries& s = out[index(r)];
    s.vm_id = vm.vm_id;
    s.resource = r;
    s.start = vm.start;
    for (std::int64_t t = vm.start; t < vm.end; t += kSampleSeconds) s.values.push_back(fn(r, t));
  }
  return out;
}

inline VmSeries flat_series(const VMRecord& vm, double pct) {
  return make_series(vm, [pct](Resource, std::int64_t) { return pct; });
}

/// Utilization that follows per-window levels, repeated every day.
inline UtilFn windowed(std::vector<double> levels) {
  return [levels = std::move(levels)](Resource, std::int64_t t) {
    const int wh = 24 / static_cast<int>(levels.size());
    return levels[window_of(t, wh)];
  };
}

inline UtilizationSeries single_series(std::vector<double> values, std::int64_t start = kT0,
                                       Resource r = Resource::kCpu) {
  UtilizationSeries s;
  s.vm_id = "vm";
  s.resource = r;
  s.start = start;
  s.values = std::move(values);
  return s;
}

/// Series of whole days where window w of day d holds levels[d][w] for its
/// whole duration.
inline UtilizationSeries daily_windows(const std::vector<std::vector<double>>& levels,
                                       std::int64_t start = kT0) {
  std::vector<double> values;
  for (const auto& day : levels) {
    const std::int64_t per_window = 24 / static_cast<std::int64_t>(day.size()) * kHour / kSampleSeconds;
    for (double v : day) values.insert(values.end(), per_window, v);
  }
  return single_series(std::move(values), start);
}

inline ServerInfo make_server(std::string id, ResourceVector capacity, std::string cluster = "c0") {
  return {std::move(id), std::move(cluster), capacity};
}

}  // namespace oversub::testing

#endif  // OVERSUB_TESTS_SUPPORT_H_
