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
#ifndef OVERSUB_SYNTH_H_
#define OVERSUB_SYNTH_H_

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "oversub/resources.h"
#include "oversub/trace.h"

namespace oversub {

/// A constant-level stretch of the day, [start_hour, end_hour); wraps past
/// midnight when end_hour <= start_hour.
struct Segment {
  double start_hour = 0;
  double end_hour = 0;
  double level = 0;

  bool contains(double hour_of_day) const;
};

/// Diurnal utilization shape, evaluated at one-minute resolution.
struct PatternTemplate {
  double valley = 20;             // level outside every segment
  std::vector<Segment> segments;  // highest covering segment wins
  double jitter = 0;              // per-minute uniform noise in [-jitter, jitter]
  double spike_prob = 0;          // per-day probability of one burst
  double spike_level = 0;
  int spike_minutes = 30;

  double level_at(double hour_of_day) const;
  /// Same shape with every level shifted by delta.
  PatternTemplate shifted(double delta) const;
};

struct GroupTemplate {
  std::array<PatternTemplate, kNumResources> resources;
};

/// Ranges from which per-subscription templates are drawn.
struct PatternRange {
  double valley_min = 10, valley_max = 30;
  double peak_min = 40, peak_max = 80;
  double peak_hours = 6;
  double jitter = 2;
  double vm_spread = 3;  // per-VM uniform level offset
  double spike_prob = 0;
  double spike_level = 90;
};

struct VmSize {
  std::string name;
  ResourceVector requested = ResourceVector::Zero();
  double weight = 1;
};

struct FleetShape {
  int servers = 20;
  int clusters = 1;
  ResourceVector capacity = make_resources(64, 512, 40, 4000);
};

struct GenConfig {
  std::int64_t start_unix = 1700006400;  // a UTC midnight
  int days = 7;
  int num_vms = 400;
  int num_subscriptions = 30;
  double zipf_exponent = 1.1;     // subscription popularity
  double primary_size_share = 0.8;  // VMs of a subscription using its main size
  std::vector<VmSize> sizes;
  double long_fraction = 0.3;
  double long_min_days = 1;
  double long_max_days = 7;
  double short_max_hours = 12;
  double paas_fraction = 0.3;
  std::array<PatternRange, kNumResources> patterns;
  std::vector<double> peak_start_hours;  // empty: any whole hour
  std::vector<GroupTemplate> templates;  // non-empty: subscription k uses k % n
  FleetShape fleet;

  /// Throws ConfigError on invalid distribution parameters.
  void validate() const;

  /// Bundled configurations: quickstart, complementary, noisy, large.
  static GenConfig preset(std::string_view name);
  static std::vector<std::string> preset_names();
};

/// Deterministic for a fixed (config, seed).
TraceSet generate_synthetic_trace(const GenConfig& config, std::uint64_t seed);

/// Renders n consecutive 5-minute maxima of a template starting at a
/// grid-aligned time. Values are clamped to [0,100] and rounded to 0.01.
std::vector<double> render_series(const PatternTemplate& tmpl,
                                  std::int64_t start, std::size_t n,
                                  std::mt19937_64& rng);

}  // namespace oversub

#endif  // OVERSUB_SYNTH_H_
