// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "tolebi/core/errors.hpp"

namespace tolebi::sim {

/// Piecewise-flat ground. The first segment also extends to -inf.
struct Terrain {
  struct Segment {
    double x_start = 0.0;
    double height = 0.0;
  };
  std::vector<Segment> segments{{0.0, 0.0}};
  double friction = 1.0;

  double height_at(double x) const {
    double h = segments.front().height;
    for (const auto& s : segments) {
      if (s.x_start <= x)
        h = s.height;
      else
        break;
    }
    return h;
  }

  void validate() const {
    if (segments.empty()) throw ConfigError("terrain: at least one segment required");
    for (std::size_t i = 1; i < segments.size(); ++i)
      if (!(segments[i].x_start > segments[i - 1].x_start))
        throw ConfigError("terrain: segments must be sorted by x_start");
    if (!(friction >= 0.0)) throw ConfigError("terrain: friction must be >= 0");
  }

  static Terrain flat(double friction = 1.0) { return Terrain{{{0.0, 0.0}}, friction}; }

  /// Descending staircase starting at x0.
  static Terrain stairs_down(double x0, double step_length, double step_height, int steps, double friction = 1.0) {
    Terrain t;
    t.friction = friction;
    for (int i = 0; i < steps; ++i) t.segments.push_back({x0 + i * step_length, -(i + 1) * step_height});
    return t;
  }
};

}  // namespace tolebi::sim
