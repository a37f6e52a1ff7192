// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include <Eigen/Core>

#include "tolebi/core/errors.hpp"

namespace tolebi::train {

struct AdvantageResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// GAE over one environment's time-ordered steps. `done[t]` ends the episode
/// after step t; `terminal[t]` says whether that end was a fall (no
/// bootstrap) rather than a timeout. `next_value[t]` is V of the state after
/// step t, which for a timeout is the final pre-reset state.
inline AdvantageResult gae_and_returns(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                                       const Eigen::VectorXd& next_values, const Eigen::Array<bool, -1, 1>& done,
                                       const Eigen::Array<bool, -1, 1>& terminal, double gamma, double lambda) {
  const long T = rewards.size();
  check_dim("gae values", T, values.size());
  check_dim("gae next values", T, next_values.size());
  check_dim("gae done flags", T, done.size());
  check_dim("gae terminal flags", T, terminal.size());
  AdvantageResult out{Eigen::VectorXd::Zero(T), Eigen::VectorXd::Zero(T)};
  double running = 0.0;
  for (long t = T - 1; t >= 0; --t) {
    const double bootstrap = terminal[t] ? 0.0 : next_values[t];
    const double delta = rewards[t] + gamma * bootstrap - values[t];
    if (done[t]) running = 0.0;
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
  }
  out.returns = out.advantages + values;
  return out;
}

/// Zero mean, unit variance; a constant vector maps to zeros.
inline Eigen::VectorXd normalize_advantages(const Eigen::VectorXd& a) {
  if (a.size() == 0) return a;
  const double mean = a.mean();
  const double var = (a.array() - mean).square().mean();
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12)) return Eigen::VectorXd::Zero(a.size());
  return ((a.array() - mean) / (sd + 1e-8)).matrix();
}

}  // namespace tolebi::train
