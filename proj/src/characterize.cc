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

#include "oversub/characterize.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <numeric>

#include "oversub/errors.h"

namespace oversub {
namespace {

double pct(double part, double whole) { return whole > 0 ? 100.0 * part / whole : 0.0; }

double nearest_rank(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

// Window maxima for each complete UTC day, keyed by day.
std::map<std::int64_t, std::vector<double>> daily_window_maxima(
    const UtilizationSeries& series, int window_hours) {
  const int windows = 24 / window_hours;
  std::map<std::int64_t, std::vector<double>> out;
  for (std::int64_t d : complete_days(series)) {
    out.emplace(d, std::vector<double>(windows, 0.0));
  }
  for (const WindowMax& w : window_maxima(series, window_hours)) {
    auto it = out.find(w.day);
    if (it != out.end()) it->second[w.window] = w.max;
  }
  return out;
}

}  // namespace

DistributionSummary summarize(std::vector<double> values) {
  DistributionSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.p25 = nearest_rank(values, 0.25);
  s.median = nearest_rank(values, 0.5);
  s.p75 = nearest_rank(values, 0.75);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  return s;
}

std::vector<double> default_hours_thresholds(HoursDimension dim) {
  if (dim == HoursDimension::kDuration) {
    return {1.0 / 60, 5.0 / 60, 0.5, 1, 6, 12, 24, 48, 72, 168};
  }
  return {1, 2, 4, 8, 16, 32, 64, 128, 256};
}

std::vector<ResourceHoursRow> resource_hours(std::span<const VMRecord> vms,
                                             HoursDimension dim,
                                             std::span<const double> thresholds) {
  if (vms.empty()) throw DataError("resource_hours: empty trace");
  double total_core_h = 0, total_gb_h = 0;
  for (const VMRecord& vm : vms) {
    total_core_h += at(vm.requested, Resource::kCpu) * vm.duration_hours();
    total_gb_h += at(vm.requested, Resource::kMem) * vm.duration_hours();
  }
  const double n = static_cast<double>(vms.size());
  std::vector<ResourceHoursRow> rows;
  for (double t : thresholds) {
    ResourceHoursRow row;
    row.threshold = t;
    double core_h = 0, gb_h = 0, vms_c = 0, vms_g = 0;
    for (const VMRecord& vm : vms) {
      const double cores = at(vm.requested, Resource::kCpu);
      const double gb = at(vm.requested, Resource::kMem);
      const double h = vm.duration_hours();
      bool by_cores, by_gb;
      if (dim == HoursDimension::kDuration) {
        by_cores = by_gb = h > t;
      } else {
        by_cores = cores >= t;
        by_gb = gb >= t;
      }
      if (by_cores) {
        core_h += cores * h;
        vms_c += 1;
      }
      if (by_gb) {
        gb_h += gb * h;
        vms_g += 1;
      }
    }
    row.pct_core_hours = pct(core_h, total_core_h);
    row.pct_gb_hours = pct(gb_h, total_gb_h);
    row.pct_vms_cores = pct(vms_c, n);
    row.pct_vms_gb = pct(vms_g, n);
    rows.push_back(row);
  }
  return rows;
}

std::string_view oversub_mode_name(OversubMode m) {
  switch (m) {
    case OversubMode::kNone:
      return "none";
    case OversubMode::kCpuOnly:
      return "cpu_only";
    case OversubMode::kCpuMem:
      return "cpu_mem";
  }
  return "?";
}

std::optional<OversubMode> parse_oversub_mode(std::string_view s) {
  for (OversubMode m : {OversubMode::kNone, OversubMode::kCpuOnly, OversubMode::kCpuMem}) {
    if (oversub_mode_name(m) == s) return m;
  }
  return std::nullopt;
}

StrandingReport compute_stranding(const TraceSet& trace, const Assignment& assignment,
                                  const ResourceVector& fill_shape, OversubMode mode,
                                  std::span<const std::int64_t> timestamps) {
  if (!(at(fill_shape, Resource::kCpu) > 0 && at(fill_shape, Resource::kMem) > 0)) {
    throw ConfigError("fill shape needs positive cpu and memory");
  }
  if (!all_nonnegative(fill_shape)) throw ConfigError("fill shape must be >= 0");
  if (assignment.size() != trace.vms().size()) {
    throw ConfigError("assignment does not match the trace");
  }
  for (std::int64_t t : timestamps) {
    if (trace.empty() || t < trace.begin_time() || t >= trace.end_time()) {
      throw ConfigError("timestamp " + std::to_string(t) + " outside trace range");
    }
  }

  const auto& servers = trace.servers();
  std::vector<std::vector<std::size_t>> resident(servers.size());
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    if (assignment[v]) {
      if (*assignment[v] >= servers.size()) throw ConfigError("assignment names unknown server");
      resident[*assignment[v]].push_back(v);
    }
  }

  ResourceVector reclaim = ResourceVector::Zero();
  if (mode != OversubMode::kNone) at(reclaim, Resource::kCpu) = 1;
  if (mode == OversubMode::kCpuMem) at(reclaim, Resource::kMem) = 1;

  StrandingReport report;
  report.samples.reserve(servers.size() * timestamps.size());
  for (std::size_t s = 0; s < servers.size(); ++s) {
    const ResourceVector& cap = servers[s].capacity;
    for (std::int64_t t : timestamps) {
      ResourceVector committed = ResourceVector::Zero();
      for (std::size_t v : resident[s]) {
        const VMRecord& vm = trace.vms()[v];
        if (t < vm.start || t >= vm.end) continue;
        ResourceVector util;
        for (Resource r : kAllResources) util(index(r)) = trace.series(v, r).at(t) / 100.0;
        // Reclaimed resources only count what the VM is not using right now.
        committed += vm.requested * (1.0 - reclaim * (1.0 - util));
      }
      committed = committed.min(cap);
      const ResourceVector free = cap - committed;

      int n = std::numeric_limits<int>::max();
      for (int r = 0; r < kNumResources; ++r) {
        if (fill_shape(r) > 0) {
          n = std::min(n, static_cast<int>(std::floor(free(r) / fill_shape(r) + kUnitEpsilon)));
        }
      }
      n = std::max(n, 0);
      const ResourceVector remainder = (free - n * fill_shape).max(0.0);

      StrandingSample sample;
      sample.server = s;
      sample.time = t;
      sample.placements = n;
      for (int r = 0; r < kNumResources; ++r) {
        const double c = cap(r);
        sample.allocated_pct(r) = pct(committed(r), c);
        sample.placeable_pct(r) = pct(n * fill_shape(r), c);
        sample.stranded_pct(r) = pct(remainder(r), c);
      }
      int blocking = 0, fill_dims = 0;
      std::optional<Resource> first;
      for (Resource r : kAllResources) {
        if (at(fill_shape, r) <= 0) continue;
        ++fill_dims;
        if (at(remainder, r) < at(fill_shape, r) - kUnitEpsilon) {
          ++blocking;
          if (!first) first = r;
        }
      }
      // Exhausting every dimension at once means the shape is aligned with
      // the server and nothing is stranded by a single resource.
      if (blocking < fill_dims) sample.bottleneck = first;
      report.samples.push_back(sample);
    }
  }

  std::map<std::string, ClusterStranding> clusters;
  for (const StrandingSample& sample : report.samples) {
    ClusterStranding& c = clusters[servers[sample.server].cluster_id];
    c.cluster_id = servers[sample.server].cluster_id;
    ++c.samples;
    c.mean_stranded_pct += sample.stranded_pct;
    if (sample.bottleneck) {
      at(c.bottleneck_share_pct, *sample.bottleneck) += 1;
    } else {
      c.no_bottleneck_share_pct += 1;
    }
  }
  for (auto& [id, c] : clusters) {
    const double n = static_cast<double>(c.samples);
    c.mean_stranded_pct /= n;
    c.bottleneck_share_pct *= 100.0 / n;
    c.no_bottleneck_share_pct *= 100.0 / n;
    report.clusters.push_back(c);
  }
  return report;
}

PeakValleyResult detect_peaks_valleys(const UtilizationSeries& series, int window_hours,
                                      double threshold_pct) {
  check_window_hours(window_hours);
  PeakValleyResult result;
  const auto days = daily_window_maxima(series, window_hours);
  if (series.size() > 0) {
    const std::int64_t touched = day_of(series.end() - 1) - day_of(series.start) + 1;
    result.skipped_partial_days = static_cast<int>(touched - static_cast<std::int64_t>(days.size()));
  }
  for (const auto& [day, maxima] : days) {
    PeakValleyDay d;
    d.day = day;
    d.window_max = maxima;
    const auto [lo, hi] = std::minmax_element(maxima.begin(), maxima.end());
    if (*hi - *lo < threshold_pct) {
      d.none = true;
    } else {
      for (int w = 0; w < static_cast<int>(maxima.size()); ++w) {
        if (maxima[w] == *hi) d.peaks.push_back(w);
        if (maxima[w] == *lo) d.valleys.push_back(w);
      }
    }
    result.days.push_back(std::move(d));
  }
  return result;
}

PeakValleySummary summarize_peaks(std::span<const PeakValleyResult> results,
                                  int window_hours) {
  check_window_hours(window_hours);
  PeakValleySummary s;
  s.windows = 24 / window_hours;
  s.peak_count.assign(s.windows, 0);
  s.valley_count.assign(s.windows, 0);
  std::size_t with_peak = 0, with_valley = 0;
  for (const PeakValleyResult& r : results) {
    for (const PeakValleyDay& d : r.days) {
      ++s.vm_days;
      if (d.none) ++s.none_days;
      if (!d.peaks.empty()) ++with_peak;
      if (!d.valleys.empty()) ++with_valley;
      for (int w : d.peaks) ++s.peak_count[w];
      for (int w : d.valleys) ++s.valley_count[w];
    }
  }
  for (int w = 0; w < s.windows; ++w) {
    s.peak_pct.push_back(pct(static_cast<double>(s.peak_count[w]), static_cast<double>(with_peak)));
    s.valley_pct.push_back(
        pct(static_cast<double>(s.valley_count[w]), static_cast<double>(with_valley)));
  }
  s.none_pct = pct(static_cast<double>(s.none_days), static_cast<double>(s.vm_days));
  return s;
}

std::vector<DayPairDiff> day_over_day_consistency(const UtilizationSeries& series,
                                                  int window_hours) {
  check_window_hours(window_hours);
  const auto days = daily_window_maxima(series, window_hours);
  std::vector<DayPairDiff> out;
  for (auto it = days.begin(); it != days.end(); ++it) {
    auto next = std::next(it);
    if (next == days.end() || next->first != it->first + 1) continue;
    const auto& a = it->second;
    const auto& b = next->second;
    DayPairDiff diff;
    diff.day = it->first;
    for (std::size_t w = 0; w < a.size(); ++w) diff.window_diff.push_back(std::abs(a[w] - b[w]));
    diff.peak_diff = std::abs(*std::max_element(a.begin(), a.end()) -
                              *std::max_element(b.begin(), b.end()));
    diff.valley_diff = std::abs(*std::min_element(a.begin(), a.end()) -
                                *std::min_element(b.begin(), b.end()));
    out.push_back(std::move(diff));
  }
  return out;
}

SavingsResult window_savings(const UtilizationSeries& series, int window_hours) {
  check_window_hours(window_hours);
  SavingsResult r;
  if (series.size() == 0) return r;
  r.lifetime_max = *std::max_element(series.values.begin(), series.values.end());
  double total = 0;
  for (const auto& [day, maxima] : daily_window_maxima(series, window_hours)) {
    for (int w = 0; w < static_cast<int>(maxima.size()); ++w) {
      const double saving = r.lifetime_max - maxima[w];
      r.windows.push_back({day, w, maxima[w], saving});
      total += saving;
    }
  }
  if (!r.windows.empty()) r.mean_saving = total / static_cast<double>(r.windows.size());
  return r;
}

}  // namespace oversub
