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

#ifndef OVERSUB_PREDICT_H_
#define OVERSUB_PREDICT_H_

#include <array>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oversub/resources.h"
#include "oversub/trace.h"

namespace oversub {

inline constexpr int kBucketPct = 5;
inline constexpr int kMaxPercentile = 99;  // used for the per-window maximum

/// Nearest-rank percentile of an ascending sample: the value at rank
/// ceil(p * n / 100). Empty samples are a precondition violation.
double nearest_rank_percentile(std::span<const double> sorted, int percentile);

/// Rounds a utilization percentage up to its 5% bucket, clamped to [0,100].
int ceil_to_bucket(double pct);

/// Per-resource, per-window predicted utilization in 5% buckets.
struct TimeWindowProfile {
  int window_hours = 4;
  int percentile = 95;
  WindowTable<int> p_max;  // bucketed high quantile per window
  WindowTable<int> p_x;    // bucketed percentile_x per window

  int windows() const { return static_cast<int>(p_max.cols()); }
  /// Throws InvariantError unless p_x <= p_max, values are bucket multiples
  /// in [0,100], and windows * window_hours == 24.
  void validate() const;
};

/// Historical window maxima of a VM group, ascending per resource x window.
struct GroupHistory {
  int vm_count = 0;
  std::array<std::vector<std::vector<double>>, kNumResources> window_values;
};

enum class GroupLevel { kSubscriptionConfig, kSubscription, kConfig };

std::string_view group_level_name(GroupLevel level);

/// Training interval; only complete window instances inside it are used.
struct TrainingRange {
  std::int64_t begin = std::numeric_limits<std::int64_t>::min();
  std::int64_t end = std::numeric_limits<std::int64_t>::max();
};

/// Group-history utilization model. Immutable after training.
class GroupModel {
 public:
  int window_hours() const { return window_hours_; }
  int windows() const { return 24 / window_hours_; }
  int min_group_size() const { return min_group_size_; }
  const TrainingRange& range() const { return range_; }

  /// Group at one level of the fallback chain, if it met min_group_size.
  const GroupHistory* find(GroupLevel level, const VMRecord& vm) const;
  /// First usable group along (subscription, config) -> subscription -> config.
  std::optional<std::pair<GroupLevel, const GroupHistory*>> lookup(const VMRecord& vm) const;
  std::size_t group_count(GroupLevel level) const;

 private:
  friend GroupModel train_group_model(const TraceSet&, int, int, TrainingRange);

  int window_hours_ = 4;
  int min_group_size_ = 5;
  TrainingRange range_;
  std::map<std::pair<std::string, std::string>, GroupHistory> by_sub_config_;
  std::map<std::string, GroupHistory> by_sub_;
  std::map<std::string, GroupHistory> by_config_;
};

GroupModel train_group_model(const TraceSet& history, int window_hours,
                             int min_group_size = 5, TrainingRange range = {});

/// Bucketed per-window Q99 (p_max) and Q(percentile) (p_x) of the VM's group
/// history; nullopt when no group along the fallback chain has enough data.
/// Throws ConfigError unless 50 <= percentile <= 99.
std::optional<TimeWindowProfile> predict_profile(const GroupModel& model,
                                                 const VMRecord& vm, int percentile);

/// Scheduler-facing predictor interface. The VMRecord carries weekday and
/// offering for predictors that use them; the group predictor does not.
class UtilizationPredictor {
 public:
  virtual ~UtilizationPredictor() = default;
  virtual int window_hours() const = 0;
  virtual std::optional<TimeWindowProfile> predict(const VMRecord& vm,
                                                   int percentile) const = 0;
  /// Grouping level that backs predictions for the VM, when applicable.
  virtual std::optional<GroupLevel> group_level(const VMRecord&) const { return std::nullopt; }
};

class GroupPredictor final : public UtilizationPredictor {
 public:
  explicit GroupPredictor(const GroupModel& model) : model_(model) {}
  int window_hours() const override { return model_.window_hours(); }
  std::optional<TimeWindowProfile> predict(const VMRecord& vm,
                                           int percentile) const override {
    return predict_profile(model_, vm, percentile);
  }
  std::optional<GroupLevel> group_level(const VMRecord& vm) const override {
    auto found = model_.lookup(vm);
    if (!found) return std::nullopt;
    return found->first;
  }

 private:
  const GroupModel& model_;
};

}  // namespace oversub

#endif  // OVERSUB_PREDICT_H_
