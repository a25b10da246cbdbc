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


#include "oversub/runtime_predictor.h"

#include <algorithm>
#include <cmath>

#include "oversub/errors.h"
#include "oversub/predict.h"
#include "oversub/trace.h"

namespace oversub {

namespace {

double clamp_pct(double v) { return std::clamp(v, 0.0, 100.0); }

}  // namespace

EwmaState ewma_update(EwmaState state, double observation) {
  const double obs = clamp_pct(observation);
  state.estimate = state.primed ? state.alpha * obs + (1.0 - state.alpha) * state.estimate : obs;
  state.primed = true;
  return state;
}

double ewma_predict(const EwmaState& state) { return state.estimate; }

double extrapolate_next(const std::vector<double>& ys) {
  const auto n = static_cast<double>(ys.size());
  if (ys.empty()) return 0.0;
  if (ys.size() == 1) return ys.front();
  const double x_mean = (n - 1) / 2.0;
  double y_mean = 0.0;
  for (double y : ys) y_mean += y;
  y_mean /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double dx = static_cast<double>(i) - x_mean;
    sxy += dx * (ys[i] - y_mean);
    sxx += dx * dx;
  }
  return y_mean + sxy / sxx * (n - x_mean);
}

HorizonPredictor::HorizonPredictor(HorizonConfig config) : config_(config) {
  check_window_hours(config_.window_hours);
  if (config_.history_days < 1) throw ConfigError("history_days must be >= 1");
  if (config_.quantile < 1 || config_.quantile > 100) {
    throw ConfigError("horizon quantile must be in [1,100]");
  }
  if (config_.trend_points < 2) throw ConfigError("trend_points must be >= 2");
  slots_.resize(24 / config_.window_hours);
}

void HorizonPredictor::observe(std::int64_t t, double max_pct, double avg_pct) {
  max_pct = clamp_pct(max_pct);
  if (!first_) first_ = t;
  last_end_ = std::max(last_end_, t + kSampleSeconds);

  auto& ring = slots_[window_of(t, config_.window_hours)];
  const std::int64_t day = day_of(t);
  if (!ring.empty() && ring.back().day == day) {
    ring.back().max = std::max(ring.back().max, max_pct);
  } else {
    ring.push_back({day, max_pct});
  }
  while (!ring.empty() && ring.front().day <= day - config_.history_days) ring.pop_front();

  recent_.push_back({max_pct, clamp_pct(avg_pct)});
  if (recent_.size() > static_cast<std::size_t>(config_.trend_points)) recent_.pop_front();
}

bool HorizonPredictor::ready() const {
  return first_ && last_end_ - *first_ >= config_.warmup_seconds;
}

double HorizonPredictor::seasonal(std::int64_t now) const {
  const auto& ring = slots_[window_of(now, config_.window_hours)];
  if (ring.empty()) return 0.0;
  std::vector<double> values;
  values.reserve(ring.size());
  for (const DayMax& d : ring) values.push_back(d.max);
  std::sort(values.begin(), values.end());
  return nearest_rank_percentile(values, config_.quantile);
}

double HorizonPredictor::trend() const {
  if (recent_.size() < static_cast<std::size_t>(config_.trend_points)) {
    return recent_.empty() ? 0.0 : recent_.back().max;
  }
  std::vector<double> ys;
  ys.reserve(recent_.size());
  for (const Sample& s : recent_) ys.push_back(s.max);
  return extrapolate_next(ys);
}

std::optional<double> HorizonPredictor::predict(std::int64_t now) const {
  if (!ready()) return std::nullopt;
  return clamp_pct(std::max(seasonal(now), trend()));
}

}  // namespace oversub
