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


#ifndef OVERSUB_RUNTIME_PREDICTOR_H_
#define OVERSUB_RUNTIME_PREDICTOR_H_

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

namespace oversub {

inline constexpr double kEwmaAlpha = 0.5;

/// Short-horizon utilization estimate, percent.
struct EwmaState {
  double alpha = kEwmaAlpha;
  double estimate = 0.0;
  bool primed = false;  // the first observation seeds the estimate
};

/// estimate' = alpha * obs + (1 - alpha) * estimate. Observations are
/// clamped to [0,100].
EwmaState ewma_update(EwmaState state, double observation);
double ewma_predict(const EwmaState& state);

struct HorizonConfig {
  int window_hours = 4;    // seasonal slot length
  int history_days = 7;    // per-slot ring length in days
  int quantile = 100;      // nearest-rank quantile over the ring
  int trend_points = 5;    // recent 5-minute samples used for extrapolation
  std::int64_t warmup_seconds = 86400;
};

/// Next-5-minute forecast: the larger of the seasonal slot quantile and a
/// least-squares extrapolation of the most recent maxima, clamped to [0,100].
class HorizonPredictor {
 public:
  explicit HorizonPredictor(HorizonConfig config = {});

  /// Records the 5-minute sample starting at t. Samples must arrive in
  /// nondecreasing time order.
  void observe(std::int64_t t, double max_pct, double avg_pct);
  bool ready() const;
  /// Forecast for the interval starting at now; nullopt before warm-up.
  std::optional<double> predict(std::int64_t now) const;

  const HorizonConfig& config() const { return config_; }

 private:
  struct DayMax {
    std::int64_t day;
    double max;
  };
  struct Sample {
    double max;
    double avg;
  };

  double seasonal(std::int64_t now) const;
  double trend() const;

  HorizonConfig config_;
  std::vector<std::deque<DayMax>> slots_;
  std::deque<Sample> recent_;
  std::optional<std::int64_t> first_;
  std::int64_t last_end_ = 0;
};

/// Least-squares line through (0, y0) ... (n-1, y_{n-1}) evaluated at n.
double extrapolate_next(const std::vector<double>& ys);

}  // namespace oversub

#endif  // OVERSUB_RUNTIME_PREDICTOR_H_
