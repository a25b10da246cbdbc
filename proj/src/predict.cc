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

#include "oversub/predict.h"

#include <algorithm>
#include <cmath>

#include "oversub/errors.h"

namespace oversub {

double nearest_rank_percentile(std::span<const double> sorted, int percentile) {
  const auto n = static_cast<std::int64_t>(sorted.size());
  std::int64_t rank = (std::int64_t{percentile} * n + 99) / 100;
  rank = std::clamp<std::int64_t>(rank, 1, n);
  return sorted[static_cast<std::size_t>(rank - 1)];
}

int ceil_to_bucket(double pct) {
  const double b = std::ceil(pct / kBucketPct - kUnitEpsilon) * kBucketPct;
  return static_cast<int>(std::clamp(b, 0.0, 100.0));
}

void TimeWindowProfile::validate() const {
  if (window_hours <= 0 || windows() * window_hours != 24) {
    throw InvariantError("profile windows do not tile the day");
  }
  if (p_x.cols() != p_max.cols()) throw InvariantError("profile tables differ in width");
  for (int r = 0; r < kNumResources; ++r) {
    for (int w = 0; w < windows(); ++w) {
      const int hi = p_max(r, w), lo = p_x(r, w);
      if (lo > hi || lo < 0 || hi > 100 || lo % kBucketPct || hi % kBucketPct) {
        throw InvariantError("profile value outside 5% buckets or p_x > p_max");
      }
    }
  }
}

std::string_view group_level_name(GroupLevel level) {
  switch (level) {
    case GroupLevel::kSubscriptionConfig:
      return "subscription_config";
    case GroupLevel::kSubscription:
      return "subscription";
    case GroupLevel::kConfig:
      return "config";
  }
  return "?";
}

const GroupHistory* GroupModel::find(GroupLevel level, const VMRecord& vm) const {
  switch (level) {
    case GroupLevel::kSubscriptionConfig: {
      auto it = by_sub_config_.find({vm.subscription_id, vm.vm_config});
      return it == by_sub_config_.end() ? nullptr : &it->second;
    }
    case GroupLevel::kSubscription: {
      auto it = by_sub_.find(vm.subscription_id);
      return it == by_sub_.end() ? nullptr : &it->second;
    }
    case GroupLevel::kConfig: {
      auto it = by_config_.find(vm.vm_config);
      return it == by_config_.end() ? nullptr : &it->second;
    }
  }
  return nullptr;
}

std::optional<std::pair<GroupLevel, const GroupHistory*>> GroupModel::lookup(
    const VMRecord& vm) const {
  for (GroupLevel level :
       {GroupLevel::kSubscriptionConfig, GroupLevel::kSubscription, GroupLevel::kConfig}) {
    if (const GroupHistory* h = find(level, vm)) return std::make_pair(level, h);
  }
  return std::nullopt;
}

std::size_t GroupModel::group_count(GroupLevel level) const {
  switch (level) {
    case GroupLevel::kSubscriptionConfig:
      return by_sub_config_.size();
    case GroupLevel::kSubscription:
      return by_sub_.size();
    case GroupLevel::kConfig:
      return by_config_.size();
  }
  return 0;
}

namespace {

GroupHistory empty_history(int windows) {
  GroupHistory h;
  for (auto& per_window : h.window_values) per_window.resize(windows);
  return h;
}

void merge_into(GroupHistory& dst, const GroupHistory& vm_values) {
  ++dst.vm_count;
  for (int r = 0; r < kNumResources; ++r) {
    for (std::size_t w = 0; w < dst.window_values[r].size(); ++w) {
      auto& out = dst.window_values[r][w];
      const auto& in = vm_values.window_values[r][w];
      out.insert(out.end(), in.begin(), in.end());
    }
  }
}

// Drops sparse groups and groups missing any window; sorts the rest.
template <typename Map>
void finalize(Map& groups, int min_group_size) {
  for (auto it = groups.begin(); it != groups.end();) {
    GroupHistory& h = it->second;
    bool usable = h.vm_count >= min_group_size;
    for (auto& per_window : h.window_values) {
      for (auto& values : per_window) {
        usable = usable && !values.empty();
        std::sort(values.begin(), values.end());
      }
    }
    it = usable ? std::next(it) : groups.erase(it);
  }
}

}  // namespace

GroupModel train_group_model(const TraceSet& history, int window_hours,
                             int min_group_size, TrainingRange range) {
  check_window_hours(window_hours);
  if (min_group_size < 1) throw ConfigError("min_group_size must be >= 1");
  if (history.empty()) throw DataError("cannot train on an empty history");
  GroupModel model;
  model.window_hours_ = window_hours;
  model.min_group_size_ = min_group_size;
  model.range_ = range;
  const int windows = 24 / window_hours;
  const std::int64_t window_seconds = window_hours * kSecondsPerHour;

  for (std::size_t v = 0; v < history.vms().size(); ++v) {
    const VMRecord& vm = history.vms()[v];
    if (vm.start >= range.end || vm.end <= range.begin) continue;
    GroupHistory mine = empty_history(windows);
    bool any = false;
    for (Resource r : kAllResources) {
      for (const WindowMax& w : window_maxima(history.series(v, r), window_hours)) {
        const std::int64_t begin = w.day * kSecondsPerDay + w.window * window_seconds;
        if (!w.complete || begin < range.begin || begin + window_seconds > range.end) continue;
        mine.window_values[index(r)][w.window].push_back(w.max);
        any = true;
      }
    }
    if (!any) continue;
    auto add = [&](auto& map, auto key) {
      auto it = map.find(key);
      if (it == map.end()) it = map.emplace(key, empty_history(windows)).first;
      merge_into(it->second, mine);
    };
    add(model.by_sub_config_, std::make_pair(vm.subscription_id, vm.vm_config));
    add(model.by_sub_, vm.subscription_id);
    add(model.by_config_, vm.vm_config);
  }
  finalize(model.by_sub_config_, min_group_size);
  finalize(model.by_sub_, min_group_size);
  finalize(model.by_config_, min_group_size);
  return model;
}

std::optional<TimeWindowProfile> predict_profile(const GroupModel& model, const VMRecord& vm,
                                                 int percentile) {
  if (percentile < 50 || percentile > kMaxPercentile) {
    throw ConfigError("percentile must be in [50,99], got " + std::to_string(percentile));
  }
  auto found = model.lookup(vm);
  if (!found) return std::nullopt;
  const GroupHistory& h = *found->second;
  TimeWindowProfile p;
  p.window_hours = model.window_hours();
  p.percentile = percentile;
  const int windows = model.windows();
  p.p_max.resize(kNumResources, windows);
  p.p_x.resize(kNumResources, windows);
  for (int r = 0; r < kNumResources; ++r) {
    for (int w = 0; w < windows; ++w) {
      const auto& values = h.window_values[r][w];
      p.p_max(r, w) = ceil_to_bucket(nearest_rank_percentile(values, kMaxPercentile));
      p.p_x(r, w) = ceil_to_bucket(nearest_rank_percentile(values, percentile));
    }
  }
  return p;
}

}  // namespace oversub
