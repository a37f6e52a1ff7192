// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "tolebi/core/errors.hpp"

namespace tolebi::eval {

/// Errors are actual minus commanded, so undershoot gives a negative MBE.
struct TrackingMetrics {
  double rmse = 0.0;
  double mbe = 0.0;
};

inline TrackingMetrics velocity_tracking_metrics(const std::vector<double>& actual, const std::vector<double>& commanded) {
  check_dim("velocity trace", static_cast<long>(actual.size()), static_cast<long>(commanded.size()));
  if (actual.empty()) throw EmptyTrace();
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - commanded[i];
    sum += e;
    sq += e * e;
  }
  const double n = static_cast<double>(actual.size());
  return {std::sqrt(sq / n), sum / n};
}

/// Accumulates (actual, commanded) pairs for one axis.
struct TrackingTrace {
  std::vector<double> actual, commanded;
  void add(double a, double c) {
    actual.push_back(a);
    commanded.push_back(c);
  }
  void append(const TrackingTrace& o) {
    actual.insert(actual.end(), o.actual.begin(), o.actual.end());
    commanded.insert(commanded.end(), o.commanded.begin(), o.commanded.end());
  }
  bool empty() const { return actual.empty(); }
  TrackingMetrics metrics() const { return velocity_tracking_metrics(actual, commanded); }
};

}  // namespace tolebi::eval
