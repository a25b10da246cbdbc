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
#ifndef OVERSUB_CHARACTERIZE_H_
#define OVERSUB_CHARACTERIZE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oversub/resources.h"
#include "oversub/trace.h"

namespace oversub {

/// Order statistics of a sample (nearest-rank quartiles).
struct DistributionSummary {
  std::size_t count = 0;
  double min = 0, p25 = 0, median = 0, p75 = 0, max = 0, mean = 0;
};
DistributionSummary summarize(std::vector<double> values);

// ---- Allocated resource-hours ---------------------------------------------

enum class HoursDimension { kDuration, kSize };

/// Share of allocated resource-hours held by VMs above a threshold.
/// Duration rows count VMs lasting strictly longer than the threshold in
/// hours. Size rows count VMs with at least threshold cores (core-hours,
/// pct_vms_cores) or at least threshold GB (GB-hours, pct_vms_gb).
struct ResourceHoursRow {
  double threshold = 0;
  double pct_core_hours = 0;
  double pct_gb_hours = 0;
  double pct_vms_cores = 0;
  double pct_vms_gb = 0;
};

std::vector<double> default_hours_thresholds(HoursDimension dim);

/// Throws DataError on an empty VM set.
std::vector<ResourceHoursRow> resource_hours(std::span<const VMRecord> vms,
                                             HoursDimension dim,
                                             std::span<const double> thresholds);

// ---- Stranding --------------------------------------------------------------

enum class OversubMode { kNone, kCpuOnly, kCpuMem };

std::string_view oversub_mode_name(OversubMode m);
std::optional<OversubMode> parse_oversub_mode(std::string_view s);

/// Server index hosting each VM (parallel to TraceSet::vms()), if any.
using Assignment = std::vector<std::optional<std::size_t>>;

struct StrandingSample {
  std::size_t server = 0;
  std::int64_t time = 0;
  int placements = 0;  // hypothetical fill-shape VMs that fit
  // Percent of capacity; the three add up to 100 per resource.
  ResourceVector allocated_pct = ResourceVector::Zero();
  ResourceVector placeable_pct = ResourceVector::Zero();
  ResourceVector stranded_pct = ResourceVector::Zero();
  std::optional<Resource> bottleneck;
};

struct ClusterStranding {
  std::string cluster_id;
  std::size_t samples = 0;
  ResourceVector mean_stranded_pct = ResourceVector::Zero();
  ResourceVector bottleneck_share_pct = ResourceVector::Zero();
  double no_bottleneck_share_pct = 0;
};

struct StrandingReport {
  std::vector<StrandingSample> samples;   // server-major, then time
  std::vector<ClusterStranding> clusters;  // sorted by cluster_id
};

/// Fills each server with whole fill-shape VMs at every timestamp until
/// some resource blocks. In the oversubscription modes the allocated but
/// unused CPU (and memory) of resident VMs is returned to the free pool
/// first. Throws ConfigError for a timestamp outside the trace.
StrandingReport compute_stranding(const TraceSet& trace, const Assignment& assignment,
                                  const ResourceVector& fill_shape, OversubMode mode,
                                  std::span<const std::int64_t> timestamps);

// ---- Peaks and valleys --------------------------------------------------------

struct PeakValleyDay {
  std::int64_t day = 0;
  std::vector<double> window_max;
  std::vector<int> peaks;    // windows whose max equals the day max
  std::vector<int> valleys;  // windows whose max equals the day min
  bool none = false;         // spread across windows below the threshold
};

struct PeakValleyResult {
  std::vector<PeakValleyDay> days;  // complete UTC days only
  int skipped_partial_days = 0;
};

PeakValleyResult detect_peaks_valleys(const UtilizationSeries& series,
                                      int window_hours, double threshold_pct = 5.0);

struct PeakValleySummary {
  int windows = 0;
  std::size_t vm_days = 0;
  std::size_t none_days = 0;
  std::vector<std::size_t> peak_count;    // raw VM-days peaking per window
  std::vector<std::size_t> valley_count;
  // Normalized by the VM-days that had any peak (valley).
  std::vector<double> peak_pct;
  std::vector<double> valley_pct;
  double none_pct = 0;
};

PeakValleySummary summarize_peaks(std::span<const PeakValleyResult> results,
                                  int window_hours);

// ---- Day-over-day consistency -----------------------------------------------

struct DayPairDiff {
  std::int64_t day = 0;  // first day of the pair
  std::vector<double> window_diff;  // |max_d[w] - max_{d+1}[w]|
  double peak_diff = 0;             // |daily max_d - daily max_{d+1}|
  double valley_diff = 0;           // |daily min_d - daily min_{d+1}|
};

/// Empty when fewer than two consecutive complete days exist.
std::vector<DayPairDiff> day_over_day_consistency(const UtilizationSeries& series,
                                                  int window_hours);

// ---- Time-window savings ------------------------------------------------------

struct WindowSaving {
  std::int64_t day = 0;
  int window = 0;
  double window_max = 0;
  double saving = 0;  // lifetime max - window max
};

struct SavingsResult {
  double lifetime_max = 0;
  std::vector<WindowSaving> windows;  // complete UTC days only
  double mean_saving = 0;
};

SavingsResult window_savings(const UtilizationSeries& series, int window_hours);

}  // namespace oversub

#endif  // OVERSUB_CHARACTERIZE_H_
