// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "tolebi/core/errors.hpp"
#include "tolebi/core/rng.hpp"

namespace tolebi::nn {

/// Diagonal Gaussian with a fixed standard deviation per dimension.
class GaussianHead {
 public:
  GaussianHead() = default;
  explicit GaussianHead(Eigen::VectorXd sigma) : sigma_(std::move(sigma)) {
    if (sigma_.size() == 0 || !(sigma_.array() > 0.0).all() || !sigma_.allFinite())
      throw ConfigError("policy sigma must be finite and > 0 in every dimension");
    log_norm_ = -(sigma_.array().log() + 0.5 * std::log(2.0 * std::numbers::pi)).sum();
  }

  const Eigen::VectorXd& sigma() const { return sigma_; }
  long size() const { return sigma_.size(); }

  Eigen::VectorXd sample(const Eigen::VectorXd& mean, RngStream& rng) const {
    check_dim("gaussian mean", size(), mean.size());
    Eigen::VectorXd a(size());
    for (long d = 0; d < size(); ++d) a[d] = mean[d] + sigma_[d] * rng.normal();
    return a;
  }

  double log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& action) const {
    check_dim("gaussian action", size(), action.size());
    return log_norm_ - 0.5 * ((action - mean).array() / sigma_.array()).square().sum();
  }

  /// Columns are samples.
  Eigen::VectorXd log_prob_batch(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& action) const {
    const Eigen::ArrayXXd u = (action - mean).array().colwise() / sigma_.array();
    return (log_norm_ - 0.5 * u.square().colwise().sum()).transpose().matrix();
  }

  /// d log p / d mean, columns are samples.
  Eigen::MatrixXd grad_mean_batch(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& action) const {
    return ((action - mean).array().colwise() / sigma_.array().square()).matrix();
  }

  double entropy() const { return (sigma_.array().log() + 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e)).sum(); }

 private:
  Eigen::VectorXd sigma_;
  double log_norm_ = 0.0;
};

}  // namespace tolebi::nn
