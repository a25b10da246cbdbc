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
#include "oversub/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "oversub/errors.h"

namespace oversub {
namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

std::size_t pick_weighted(std::mt19937_64& rng, const std::vector<double>& cumulative) {
  const double u = uniform01(rng) * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
}

std::vector<double> cumulate(const std::vector<double>& w) {
  std::vector<double> c(w.size());
  double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) c[i] = (s += w[i]);
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string numbered(const char* prefix, int width, long long n) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*lld", prefix, width, n);
  return buf;
}

void check_range(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("generator config: " + msg);
}

PatternTemplate flat(double level, double jitter) {
  PatternTemplate t;
  t.valley = level;
  t.jitter = jitter;
  return t;
}

PatternTemplate diurnal(double valley, double start, double end, double peak,
                        double jitter) {
  PatternTemplate t;
  t.valley = valley;
  t.segments.push_back({start, end, peak});
  t.jitter = jitter;
  return t;
}

std::vector<VmSize> default_sizes() {
  return {
      {"D2", make_resources(2, 8, 1, 64), 4},
      {"D4", make_resources(4, 16, 2, 128), 5},
      {"D8", make_resources(8, 32, 4, 256), 3},
      {"E4", make_resources(4, 32, 2, 128), 2},
      {"E8", make_resources(8, 64, 4, 256), 1},
      {"F4", make_resources(4, 8, 2, 64), 1},
  };
}

}  // namespace

bool Segment::contains(double h) const {
  if (start_hour < end_hour) return h >= start_hour && h < end_hour;
  return h >= start_hour || h < end_hour;
}

double PatternTemplate::level_at(double hour_of_day) const {
  double best = -1;
  for (const Segment& s : segments) {
    if (s.contains(hour_of_day)) best = std::max(best, s.level);
  }
  return best < 0 ? valley : best;
}

PatternTemplate PatternTemplate::shifted(double delta) const {
  PatternTemplate t = *this;
  t.valley += delta;
  for (Segment& s : t.segments) s.level += delta;
  return t;
}

std::vector<double> render_series(const PatternTemplate& tmpl,
                                  std::int64_t start, std::size_t n,
                                  std::mt19937_64& rng) {
  std::vector<double> out(n);
  if (n == 0) return out;
  const std::int64_t end = start + static_cast<std::int64_t>(n) * kSampleSeconds;

  // Bursts: at most one per UTC day, placed uniformly within the day.
  std::vector<std::pair<std::int64_t, std::int64_t>> spikes;
  if (tmpl.spike_prob > 0) {
    for (std::int64_t d = day_of(start); d * kSecondsPerDay < end; ++d) {
      const bool hit = uniform01(rng) < tmpl.spike_prob;
      const double where = uniform01(rng);
      if (!hit) continue;
      const std::int64_t span = std::int64_t{tmpl.spike_minutes} * 60;
      const std::int64_t s =
          d * kSecondsPerDay +
          static_cast<std::int64_t>(where * static_cast<double>(kSecondsPerDay - span) / 60) * 60;
      spikes.emplace_back(s, s + span);
    }
  }

  std::size_t spike_idx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t slot = start + static_cast<std::int64_t>(i) * kSampleSeconds;
    double m = 0;
    for (int minute = 0; minute < 5; ++minute) {
      const std::int64_t t = slot + minute * 60;
      const double hour =
          static_cast<double>(t - day_of(t) * kSecondsPerDay) / kSecondsPerHour;
      double level = tmpl.level_at(hour);
      while (spike_idx < spikes.size() && spikes[spike_idx].second <= t) ++spike_idx;
      if (spike_idx < spikes.size() && spikes[spike_idx].first <= t) {
        level = std::max(level, tmpl.spike_level);
      }
      if (tmpl.jitter > 0) level += uniform(rng, -tmpl.jitter, tmpl.jitter);
      m = minute == 0 ? level : std::max(m, level);
    }
    m = std::clamp(m, 0.0, 100.0);
    out[i] = std::round(m * 100.0) / 100.0;
  }
  return out;
}

void GenConfig::validate() const {
  check_range(start_unix % kSampleSeconds == 0, "start_unix must be a multiple of 300");
  check_range(days >= 1, "days must be >= 1");
  check_range(num_vms >= 0, "num_vms must be >= 0");
  check_range(num_subscriptions >= 1, "num_subscriptions must be >= 1");
  check_range(zipf_exponent >= 0, "zipf_exponent must be >= 0");
  check_range(primary_size_share >= 0 && primary_size_share <= 1,
              "primary_size_share must be in [0,1]");
  check_range(!sizes.empty(), "at least one vm size required");
  for (const VmSize& s : sizes) {
    check_range(s.weight > 0, "size " + s.name + ": weight must be positive");
    check_range(s.requested(0) > 0 && s.requested(1) > 0,
                "size " + s.name + ": cpu and mem must be positive");
    check_range(all_nonnegative(s.requested), "size " + s.name + ": negative amount");
  }
  check_range(long_fraction >= 0 && long_fraction <= 1, "long_fraction must be in [0,1]");
  check_range(long_min_days > 0 && long_min_days <= long_max_days,
              "need 0 < long_min_days <= long_max_days");
  check_range(short_max_hours > 0, "short_max_hours must be positive");
  check_range(paas_fraction >= 0 && paas_fraction <= 1, "paas_fraction must be in [0,1]");
  for (const PatternRange& p : patterns) {
    check_range(p.valley_min >= 0 && p.valley_min <= p.valley_max && p.valley_max <= 100,
                "valley range must satisfy 0 <= min <= max <= 100");
    check_range(p.peak_min >= 0 && p.peak_min <= p.peak_max && p.peak_max <= 100,
                "peak range must satisfy 0 <= min <= max <= 100");
    check_range(p.peak_hours > 0 && p.peak_hours <= 24, "peak_hours must be in (0,24]");
    check_range(p.jitter >= 0 && p.vm_spread >= 0, "jitter and vm_spread must be >= 0");
    check_range(p.spike_prob >= 0 && p.spike_prob <= 1, "spike_prob must be in [0,1]");
  }
  for (double h : peak_start_hours) {
    check_range(h >= 0 && h < 24, "peak_start_hours must be in [0,24)");
  }
  for (const GroupTemplate& g : templates) {
    for (const PatternTemplate& t : g.resources) {
      check_range(t.jitter >= 0, "template jitter must be >= 0");
      check_range(t.spike_prob >= 0 && t.spike_prob <= 1,
                  "template spike_prob must be in [0,1]");
      check_range(t.spike_minutes > 0 && t.spike_minutes < 1440,
                  "template spike_minutes must be in (0,1440)");
    }
  }
  check_range(fleet.servers >= 0 && fleet.clusters >= 1, "fleet shape invalid");
  check_range(all_nonnegative(fleet.capacity), "fleet capacity must be >= 0");
}

TraceSet generate_synthetic_trace(const GenConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(splitmix64(seed));

  std::vector<double> size_weights;
  for (const VmSize& s : config.sizes) size_weights.push_back(s.weight);
  const auto size_cdf = cumulate(size_weights);

  // Per-subscription pattern, main size, and popularity.
  const int n_subs = config.num_subscriptions;
  std::vector<GroupTemplate> sub_templates(n_subs);
  std::vector<std::size_t> sub_size(n_subs);
  std::vector<double> sub_weights(n_subs);
  for (int k = 0; k < n_subs; ++k) {
    if (!config.templates.empty()) {
      sub_templates[k] = config.templates[k % config.templates.size()];
    } else {
      double start_hour;
      if (config.peak_start_hours.empty()) {
        start_hour = std::floor(uniform(rng, 0, 24));
      } else {
        start_hour = config.peak_start_hours[rng() % config.peak_start_hours.size()];
      }
      for (int r = 0; r < kNumResources; ++r) {
        const PatternRange& p = config.patterns[r];
        PatternTemplate& t = sub_templates[k].resources[r];
        t.valley = uniform(rng, p.valley_min, p.valley_max);
        const double peak = std::max(t.valley, uniform(rng, p.peak_min, p.peak_max));
        t.segments = {{start_hour, std::fmod(start_hour + p.peak_hours, 24.0), peak}};
        if (p.peak_hours >= 24) t.segments = {{0, 24, peak}};
        t.jitter = p.jitter;
        t.spike_prob = p.spike_prob;
        t.spike_level = p.spike_level;
      }
    }
    sub_size[k] = pick_weighted(rng, size_cdf);
    sub_weights[k] = 1.0 / std::pow(static_cast<double>(k + 1), config.zipf_exponent);
  }
  const auto sub_cdf = cumulate(sub_weights);

  const std::int64_t trace_end =
      config.start_unix + std::int64_t{config.days} * kSecondsPerDay;
  const std::int64_t slots = (trace_end - config.start_unix) / kSampleSeconds;

  std::vector<VMRecord> vms;
  std::vector<VmSeries> series;
  vms.reserve(config.num_vms);
  series.reserve(config.num_vms);
  for (int i = 0; i < config.num_vms; ++i) {
    std::mt19937_64 vrng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) + 1)));
    VMRecord vm;
    vm.vm_id = numbered("vm-", 6, i);
    const std::size_t sub = pick_weighted(vrng, sub_cdf);
    vm.subscription_id = numbered("sub-", 4, static_cast<long long>(sub));
    const std::size_t size = uniform01(vrng) < config.primary_size_share
                                 ? sub_size[sub]
                                 : pick_weighted(vrng, size_cdf);
    vm.vm_config = config.sizes[size].name;
    vm.requested = config.sizes[size].requested;
    vm.offering = uniform01(vrng) < config.paas_fraction ? Offering::kPaas : Offering::kIaas;

    const std::int64_t slot = static_cast<std::int64_t>(uniform01(vrng) * static_cast<double>(slots - 1));
    vm.start = config.start_unix + slot * kSampleSeconds;
    double seconds;
    if (uniform01(vrng) < config.long_fraction) {
      seconds = uniform(vrng, config.long_min_days, config.long_max_days) * kSecondsPerDay;
    } else {
      seconds = uniform(vrng, kSampleSeconds, config.short_max_hours * kSecondsPerHour);
    }
    std::int64_t dur = std::max<std::int64_t>(
        kSampleSeconds,
        static_cast<std::int64_t>(seconds / kSampleSeconds) * kSampleSeconds);
    vm.end = std::min(vm.start + dur, trace_end);

    const std::size_t n = static_cast<std::size_t>((vm.end - vm.start) / kSampleSeconds);
    VmSeries s;
    for (Resource r : kAllResources) {
      const double spread = config.patterns[index(r)].vm_spread;
      const double offset = spread > 0 ? uniform(vrng, -spread, spread) : 0.0;
      UtilizationSeries& u = s[index(r)];
      u.vm_id = vm.vm_id;
      u.resource = r;
      u.start = vm.start;
      u.values = render_series(sub_templates[sub].resources[index(r)].shifted(offset),
                               vm.start, n, vrng);
    }
    vms.push_back(std::move(vm));
    series.push_back(std::move(s));
  }

  std::vector<ServerInfo> servers;
  for (int k = 0; k < config.fleet.servers; ++k) {
    servers.push_back({numbered("srv-", 4, k),
                       numbered("c", 1, k % config.fleet.clusters),
                       config.fleet.capacity});
  }
  return TraceSet(std::move(vms), std::move(series), std::move(servers));
}

std::vector<std::string> GenConfig::preset_names() {
  return {"quickstart", "complementary", "noisy", "large"};
}

GenConfig GenConfig::preset(std::string_view name) {
  GenConfig c;
  c.sizes = default_sizes();
  // CPU swings widely; memory, network and SSD stay within narrow bands.
  c.patterns[index(Resource::kCpu)] = {5, 25, 30, 85, 6, 4, 4, 0.05, 90};
  c.patterns[index(Resource::kMem)] = {30, 60, 35, 75, 6, 1, 2, 0, 0};
  c.patterns[index(Resource::kNet)] = {5, 20, 10, 40, 6, 2, 2, 0, 0};
  c.patterns[index(Resource::kSsd)] = {20, 50, 20, 55, 6, 0.5, 2, 0, 0};
  c.peak_start_hours = {0, 4, 8, 12, 16, 20};
  if (name == "quickstart") {
    return c;
  }
  if (name == "complementary") {
    c.days = 14;
    c.num_vms = 600;
    c.num_subscriptions = 12;
    c.zipf_exponent = 0;
    c.sizes = {{"D4", make_resources(4, 16, 2, 128), 1}};
    c.long_fraction = 1.0;
    c.long_min_days = 3;
    c.long_max_days = 10;
    c.paas_fraction = 0;
    for (PatternRange& p : c.patterns) p.vm_spread = 1;
    // Three CPU shifts that peak in disjoint 8-hour windows.
    for (double start : {0.0, 8.0, 16.0}) {
      GroupTemplate g;
      g.resources[index(Resource::kCpu)] = diurnal(10, start, start + 8, 80, 2);
      g.resources[index(Resource::kMem)] = flat(50, 1);
      g.resources[index(Resource::kNet)] = diurnal(5, start, start + 8, 30, 1);
      g.resources[index(Resource::kSsd)] = flat(30, 0.5);
      c.templates.push_back(g);
    }
    c.fleet = {10, 1, make_resources(32, 512, 40, 4000)};
    return c;
  }
  if (name == "noisy") {
    c.days = 14;
    c.num_vms = 1500;
    c.num_subscriptions = 40;
    c.long_fraction = 0.6;
    c.long_min_days = 2;
    c.long_max_days = 12;
    c.patterns[index(Resource::kCpu)] = {5, 30, 30, 80, 6, 8, 6, 0.12, 95};
    c.patterns[index(Resource::kMem)] = {30, 60, 35, 75, 6, 1.5, 2, 0.01, 90};
    c.fleet = {40, 2, make_resources(64, 512, 40, 4000)};
    return c;
  }
  if (name == "large") {
    c.days = 14;
    c.num_vms = 10000;
    c.num_subscriptions = 300;
    c.long_fraction = 0.28;
    c.long_min_days = 1;
    c.long_max_days = 14;
    c.fleet = {100, 4, make_resources(64, 512, 40, 4000)};
    return c;
  }
  throw ConfigError("unknown generator preset '" + std::string(name) + "'");
}

}  // namespace oversub
