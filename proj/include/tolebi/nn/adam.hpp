// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/errors.hpp"

namespace tolebi::nn {

/// lr(s) = start + (end - start) * min(s / total, 1).
struct LinearDecay {
  double start = 1e-5;
  double end = 3e-6;
  long total_steps = 1;

  double operator()(long step) const {
    if (total_steps <= 0) return end;
    const double f = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
    return start + (end - start) * f;
  }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(long n, AdamConfig cfg = {}) : cfg_(cfg), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

  long steps() const { return t_; }

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    check_dim("adam params", m_.size(), params.size());
    check_dim("adam grad", m_.size(), grad.size());
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
  }

  void save(BinaryWriter& w) const {
    w.put_i64(t_);
    w.put_vector(m_);
    w.put_vector(v_);
  }
  void load(BinaryReader& r) {
    t_ = r.get_i64();
    m_ = r.get_vector();
    v_ = r.get_vector();
  }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

/// Rescales g so its norm is at most max_norm; returns the original norm.
inline double clip_grad_norm(Eigen::VectorXd& g, double max_norm) {
  const double n = g.norm();
  if (max_norm > 0.0 && n > max_norm) g *= max_norm / n;
  return n;
}

}  // namespace tolebi::nn
