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
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oversub/characterize.h"
#include "oversub/errors.h"
#include "oversub/synth.h"
#include "support.h"

namespace oversub {
namespace {

using testing::kDay;
using testing::kHour;
using testing::kT0;

VMRecord sized(const std::string& id, double cores, double gb, std::int64_t seconds) {
  return testing::make_vm(id, "s", "c", make_resources(cores, gb, 0, 0), kT0, kT0 + seconds);
}

TEST_CASE("one long VM matches sixty one-minute VMs in GB-hours") {
  std::vector<VMRecord> vms;
  for (int i = 0; i < 60; ++i) vms.push_back(sized("short" + std::to_string(i), 1, 32, 60));
  vms.push_back(sized("long", 1, 32, 3600));
  const double threshold[] = {0.5};
  const auto rows = resource_hours(vms, HoursDimension::kDuration, threshold);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].pct_gb_hours == doctest::Approx(50.0));
  CHECK(rows[0].pct_vms_gb == doctest::Approx(100.0 / 61));
  CHECK(rows[0].pct_vms_gb < 1.7);
}

TEST_CASE("identical VMs hold everything below their duration") {
  std::vector<VMRecord> vms(5, sized("x", 4, 16, 10 * 3600));
  const auto rows = resource_hours(vms, HoursDimension::kDuration,
                                   default_hours_thresholds(HoursDimension::kDuration));
  for (const auto& row : rows) {
    const double expect = row.threshold < 10 ? 100 : 0;
    CHECK(row.pct_core_hours == expect);
    CHECK(row.pct_gb_hours == expect);
    CHECK(row.pct_vms_cores == expect);
  }
}

TEST_CASE("VMs longer than a day hold five sixths of resource-hours") {
  std::vector<VMRecord> vms = {sized("a", 2, 8, kDay), sized("b", 2, 8, 2 * kDay),
                               sized("c", 2, 8, 3 * kDay)};
  const double threshold[] = {24};
  const auto rows = resource_hours(vms, HoursDimension::kDuration, threshold);
  CHECK(rows[0].pct_core_hours == doctest::Approx(500.0 / 6));
  CHECK(rows[0].pct_gb_hours == doctest::Approx(500.0 / 6));
  CHECK(rows[0].pct_vms_cores == doctest::Approx(200.0 / 3));
}

TEST_CASE("size thresholds are inclusive and per dimension") {
  std::vector<VMRecord> vms = {sized("a", 2, 8, 3600), sized("b", 8, 64, 3600)};
  const double threshold[] = {8};
  const auto rows = resource_hours(vms, HoursDimension::kSize, threshold);
  CHECK(rows[0].pct_core_hours == doctest::Approx(80.0));
  CHECK(rows[0].pct_gb_hours == doctest::Approx(100.0));
  CHECK(rows[0].pct_vms_cores == doctest::Approx(50.0));
  CHECK_THROWS_AS(resource_hours(std::vector<VMRecord>{}, HoursDimension::kSize, threshold), DataError);
}

// A fleet of the given servers plus one busy-free VM so the trace has a range.
TraceSet fleet(std::vector<ServerInfo> servers, std::vector<VMRecord> vms = {},
               std::vector<double> cpu_pct = {}) {
  std::vector<VmSeries> series;
  if (vms.empty()) {
    vms.push_back(testing::make_vm("anchor", "s", "c", make_resources(1, 1, 0, 0), kT0, kT0 + kDay));
  }
  for (std::size_t i = 0; i < vms.size(); ++i) {
    const double c = i < cpu_pct.size() ? cpu_pct[i] : 0.0;
    series.push_back(testing::make_series(vms[i], [c](Resource r, std::int64_t) {
      return r == Resource::kCpu ? c : 0.0;
    }));
  }
  return TraceSet(std::move(vms), std::move(series), std::move(servers));
}

TEST_CASE("aligned fill shape leaves nothing stranded") {
  const TraceSet t = fleet({testing::make_server("s0", make_resources(16, 64, 0, 0))});
  const std::int64_t ts[] = {kT0};
  const auto report = compute_stranding(t, Assignment(1), make_resources(1, 4, 0, 0), OversubMode::kNone, ts);
  REQUIRE(report.samples.size() == 1);
  const auto& s = report.samples[0];
  CHECK(s.placements == 16);
  CHECK(s.stranded_pct(0) == 0);
  CHECK(s.stranded_pct(1) == 0);
  CHECK_FALSE(s.bottleneck.has_value());
  CHECK(report.clusters[0].no_bottleneck_share_pct == 100);
}

TEST_CASE("memory-short server strands a quarter of its cores") {
  const TraceSet t = fleet({testing::make_server("s0", make_resources(16, 48, 0, 0))});
  const std::int64_t ts[] = {kT0};
  const auto report = compute_stranding(t, Assignment(1), make_resources(1, 4, 0, 0), OversubMode::kNone, ts);
  const auto& s = report.samples[0];
  CHECK(s.placements == 12);
  CHECK(s.stranded_pct(0) == doctest::Approx(25));
  CHECK(s.stranded_pct(1) == doctest::Approx(0));
  REQUIRE(s.bottleneck.has_value());
  CHECK(*s.bottleneck == Resource::kMem);
}

TEST_CASE("reclaiming idle CPU moves the bottleneck to memory") {
  const VMRecord vm = testing::make_vm("idle", "s", "c", make_resources(16, 32, 0, 0), kT0, kT0 + kDay);
  const TraceSet t = fleet({testing::make_server("s0", make_resources(16, 64, 0, 0))}, {vm}, {10});
  const Assignment assignment = {0};
  const std::int64_t ts[] = {kT0 + kHour};
  const auto none = compute_stranding(t, assignment, make_resources(1, 4, 0, 0), OversubMode::kNone, ts);
  const auto cpu = compute_stranding(t, assignment, make_resources(1, 4, 0, 0), OversubMode::kCpuOnly, ts);
  CHECK(none.clusters[0].bottleneck_share_pct(0) > cpu.clusters[0].bottleneck_share_pct(0));
  CHECK(none.clusters[0].bottleneck_share_pct(1) < cpu.clusters[0].bottleneck_share_pct(1));
  CHECK(*cpu.samples[0].bottleneck == Resource::kMem);
}

TEST_CASE("stranding rejects timestamps outside the trace") {
  const TraceSet t = fleet({testing::make_server("s0", make_resources(16, 64, 0, 0))});
  const std::int64_t ts[] = {kT0 + 2 * kDay};
  CHECK_THROWS_AS(compute_stranding(t, Assignment(1), make_resources(1, 4, 0, 0), OversubMode::kNone, ts),
                  ConfigError);
  const std::int64_t ok[] = {kT0};
  CHECK_THROWS_AS(compute_stranding(t, Assignment(1), make_resources(0, 4, 0, 0), OversubMode::kNone, ok),
                  ConfigError);
}

TEST_CASE("stranding components sum to capacity under random assignments") {
  GenConfig config = GenConfig::preset("quickstart");
  config.num_vms = 150;
  config.days = 2;
  const TraceSet t = generate_synthetic_trace(config, 5);
  std::mt19937_64 rng(5);
  std::vector<std::int64_t> ts;
  for (std::int64_t x = t.begin_time(); x < t.end_time(); x += 6 * kHour) ts.push_back(x);
  for (int trial = 0; trial < 5; ++trial) {
    Assignment a(t.vms().size());
    for (auto& s : a) {
      if (rng() % 3) s = rng() % t.servers().size();
    }
    for (OversubMode mode : {OversubMode::kNone, OversubMode::kCpuOnly, OversubMode::kCpuMem}) {
      const ResourceVector fill = make_resources(1, 4, 0.5, 16);
      const auto report = compute_stranding(t, a, fill, mode, ts);
      for (const auto& s : report.samples) {
        const ResourceVector total = s.allocated_pct + s.placeable_pct + s.stranded_pct;
        for (int r = 0; r < kNumResources; ++r) REQUIRE(total(r) == doctest::Approx(100.0));
        REQUIRE(((s.stranded_pct >= 0) && (s.stranded_pct <= 100 + 1e-9)).all());
        if (s.bottleneck) {
          const int b = index(*s.bottleneck);
          REQUIRE(s.stranded_pct(b) / 100 * t.servers()[s.server].capacity(b) < fill(b));
        }
      }
      for (const auto& c : report.clusters) {
        CHECK(c.bottleneck_share_pct.sum() + c.no_bottleneck_share_pct == doctest::Approx(100.0));
      }
    }
  }
}

TEST_CASE("flat series has no peaks") {
  const auto result = detect_peaks_valleys(testing::daily_windows({{40, 40, 40}, {40, 40, 40}}), 8);
  REQUIRE(result.days.size() == 2);
  for (const auto& d : result.days) {
    CHECK(d.none);
    CHECK(d.peaks.empty());
    CHECK(d.valleys.empty());
  }
}

TEST_CASE("peaks and valleys follow window maxima") {
  auto r = detect_peaks_valleys(testing::daily_windows({{30, 75, 55}}), 8);
  REQUIRE(r.days.size() == 1);
  CHECK(r.days[0].peaks == std::vector<int>{1});
  CHECK(r.days[0].valleys == std::vector<int>{0});
  r = detect_peaks_valleys(testing::daily_windows({{50, 50, 10}}), 8);
  CHECK(r.days[0].peaks == std::vector<int>{0, 1});
  CHECK(r.days[0].valleys == std::vector<int>{2});
  r = detect_peaks_valleys(testing::daily_windows({{50, 53, 51}}), 8);
  CHECK(r.days[0].none);
}

TEST_CASE("partial days are skipped and counted") {
  std::vector<double> v(288 * 2, 20.0);
  const auto r = detect_peaks_valleys(testing::single_series(v, kT0 + 6 * kHour), 8);
  CHECK(r.days.size() == 1);
  CHECK(r.skipped_partial_days == 2);
}

TEST_CASE("peak summary reports raw and normalized counts") {
  std::vector<PeakValleyResult> results = {
      detect_peaks_valleys(testing::daily_windows({{30, 75, 55}}), 8),
      detect_peaks_valleys(testing::daily_windows({{50, 50, 10}}), 8),
      detect_peaks_valleys(testing::daily_windows({{40, 40, 40}}), 8)};
  const auto s = summarize_peaks(results, 8);
  CHECK(s.vm_days == 3);
  CHECK(s.none_days == 1);
  CHECK(s.peak_count == std::vector<std::size_t>{1, 2, 0});
  CHECK(s.peak_pct[1] == doctest::Approx(100.0));
  CHECK(s.peak_pct[0] == doctest::Approx(50.0));
  CHECK(s.none_pct == doctest::Approx(100.0 / 3));
}

TEST_CASE("peak windows are invariant under increasing transforms") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> days(3, std::vector<double>(6));
    for (auto& d : days) {
      for (auto& x : d) x = std::round(u(rng));
    }
    auto transformed = days;
    for (auto& d : transformed) {
      for (auto& x : d) x = std::sqrt(x) * 7 + 1;
    }
    const auto a = detect_peaks_valleys(testing::daily_windows(days), 4, 0.0);
    const auto b = detect_peaks_valleys(testing::daily_windows(transformed), 4, 0.0);
    for (std::size_t d = 0; d < a.days.size(); ++d) {
      REQUIRE(a.days[d].peaks == b.days[d].peaks);
      REQUIRE(a.days[d].valleys == b.days[d].valleys);
    }
  }
}

TEST_CASE("day-over-day differences") {
  auto diffs = day_over_day_consistency(testing::daily_windows({{30, 75, 55}, {35, 70, 55}}), 8);
  REQUIRE(diffs.size() == 1);
  CHECK(diffs[0].window_diff == std::vector<double>{5, 5, 0});
  CHECK(diffs[0].peak_diff == 5);
  CHECK(diffs[0].valley_diff == 5);
  diffs = day_over_day_consistency(testing::daily_windows({{30, 75, 55}, {30, 75, 55}}), 8);
  CHECK(diffs[0].window_diff == std::vector<double>{0, 0, 0});
  CHECK(day_over_day_consistency(testing::daily_windows({{30, 75, 55}}), 8).empty());
}

TEST_CASE("low-jitter synthetic fleet is consistent from day to day") {
  GenConfig config = GenConfig::preset("quickstart");
  config.num_vms = 200;
  config.long_fraction = 1.0;
  config.long_min_days = 3;
  const TraceSet t = generate_synthetic_trace(config, 21);
  int with_pairs = 0, consistent = 0;
  for (std::size_t v = 0; v < t.vms().size(); ++v) {
    const auto diffs = day_over_day_consistency(t.series(v, Resource::kCpu), 6);
    if (diffs.empty()) continue;
    ++with_pairs;
    double mean = 0;
    for (const auto& d : diffs) mean += d.peak_diff;
    mean /= static_cast<double>(diffs.size());
    if (mean <= 20) ++consistent;
  }
  REQUIRE(with_pairs > 50);
  CHECK(consistent >= 0.8 * with_pairs);
}

TEST_CASE("window savings against the lifetime max") {
  auto r = window_savings(testing::daily_windows({{30, 75, 55}}), 8);
  CHECK(r.lifetime_max == 75);
  REQUIRE(r.windows.size() == 3);
  CHECK(r.windows[0].saving == 45);
  CHECK(r.windows[1].saving == 0);
  CHECK(r.windows[2].saving == 20);
  r = window_savings(testing::daily_windows({{40, 40, 40}, {40, 40, 40}}), 8);
  for (const auto& w : r.windows) CHECK(w.saving == 0);
  CHECK(window_savings(testing::single_series({}), 4).windows.empty());
}

TEST_CASE("daily savings match a brute-force oracle") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(288 * 4);
    for (auto& x : v) x = u(rng);
    const auto r = window_savings(testing::single_series(v), 24);
    const double life = *std::max_element(v.begin(), v.end());
    double oracle = 0;
    for (int d = 0; d < 4; ++d) oracle += life - *std::max_element(v.begin() + 288 * d, v.begin() + 288 * (d + 1));
    CHECK(r.mean_saving == doctest::Approx(oracle / 4));
    CHECK(r.mean_saving >= 0);
  }
}

TEST_CASE("finer windows never save less") {
  const int pairs[][2] = {{1, 2}, {2, 4}, {4, 8}, {8, 24}, {1, 24}, {2, 8}};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(288 * 3 + 37);
    for (auto& x : v) x = u(rng);
    const auto s = testing::single_series(v, kT0 + 300 * (trial % 5));
    for (const auto& p : pairs) {
      REQUIRE(window_savings(s, p[0]).mean_saving >= window_savings(s, p[1]).mean_saving - 1e-9);
    }
  }
}

TEST_CASE("distribution summary uses nearest rank") {
  const auto s = summarize({5, 1, 4, 2, 3});
  CHECK(s.count == 5);
  CHECK(s.min == 1);
  CHECK(s.p25 == 2);
  CHECK(s.median == 3);
  CHECK(s.p75 == 4);
  CHECK(s.max == 5);
  CHECK(s.mean == 3);
}

}  // namespace
}  // namespace oversub
