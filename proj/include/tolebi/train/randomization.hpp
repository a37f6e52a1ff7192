// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/errors.hpp"
#include "tolebi/core/rng.hpp"
#include "tolebi/sim/robot_model.hpp"
#include "tolebi/train/config.hpp"

namespace tolebi::train {

/// Per-episode physical perturbation, one scale per link or joint.
struct RandomizationDraw {
  Eigen::VectorXd mass, inertia, com;  // base first, then the legs in joint order
  Eigen::VectorXd friction, damping, motor;
  double delay = 0.0;  // s

  static RandomizationDraw identity(const sim::RobotModel& m) {
    const int L = 1 + m.joint_count(), J = m.joint_count();
    return {Eigen::VectorXd::Ones(L), Eigen::VectorXd::Ones(L), Eigen::VectorXd::Ones(L),
            Eigen::VectorXd::Ones(J), Eigen::VectorXd::Ones(J), Eigen::VectorXd::Ones(J), 0.0};
  }

  void save(BinaryWriter& w) const {
    for (const auto* v : {&mass, &inertia, &com, &friction, &damping, &motor}) w.put_vector(*v);
    w.put_f64(delay);
  }
  void load(BinaryReader& r) {
    for (auto* v : {&mass, &inertia, &com, &friction, &damping, &motor}) *v = r.get_vector();
    delay = r.get_f64();
  }
};

inline double draw(RngStream& rng, const std::array<double, 2>& range) { return rng.uniform(range[0], range[1]); }

inline RandomizationDraw sample_randomization(const sim::RobotModel& m, const RandomizationConfig& cfg,
                                              RngStream& rng) {
  RandomizationDraw d = RandomizationDraw::identity(m);
  if (!cfg.enabled) return d;
  for (long i = 0; i < d.mass.size(); ++i) {
    d.mass[i] = draw(rng, cfg.link_mass);
    d.inertia[i] = draw(rng, cfg.link_inertia);
    d.com[i] = draw(rng, cfg.link_com);
  }
  for (long j = 0; j < d.friction.size(); ++j) {
    d.friction[j] = draw(rng, cfg.joint_friction);
    d.damping[j] = draw(rng, cfg.joint_damping);
    d.motor[j] = draw(rng, cfg.motor_constant);
  }
  d.delay = 1e-3 * draw(rng, cfg.delay_ms);
  return d;
}

/// Scales the base model's link and joint parameters by the draw.
inline sim::RobotModel apply_randomization(const sim::RobotModel& base, const RandomizationDraw& d) {
  check_dim("randomization links", 1 + base.joint_count(), d.mass.size());
  sim::RobotModel m = base;
  auto scale = [&](sim::Link& l, long i) {
    l.mass *= d.mass[i];
    l.inertia *= d.inertia[i];
    l.com *= d.com[i];
  };
  scale(m.base, 0);
  const int n = m.links_per_leg();
  for (int s = 0; s < 2; ++s)
    for (int k = 0; k < n; ++k) scale(m.legs[s][k], 1 + s * n + k);
  m.joint_friction = m.joint_friction.cwiseProduct(d.friction);
  m.joint_damping = m.joint_damping.cwiseProduct(d.damping);
  m.motor_constant = m.motor_constant.cwiseProduct(d.motor);
  return m;
}

/// Actuation delay at simulation-step resolution. A delay of d seconds
/// holds each command for d / dt substeps; the fractional part blends the
/// two neighbouring commands.
class DelayLine {
 public:
  DelayLine() = default;
  DelayLine(int joints, double delay, double dt) {
    if (!(dt > 0.0) || !(delay >= 0.0)) throw ConfigError("delay line needs dt > 0 and delay >= 0");
    const double steps = delay / dt;
    whole_ = static_cast<int>(std::floor(steps));
    frac_ = steps - whole_;
    buf_.assign(whole_ + 2, Eigen::VectorXd::Zero(joints));
  }

  /// Pushes the current command and returns what the actuator applies now.
  Eigen::VectorXd push(const Eigen::VectorXd& command) {
    head_ = (head_ + 1) % static_cast<int>(buf_.size());
    buf_[head_] = command;
    return (1.0 - frac_) * at(whole_) + frac_ * at(whole_ + 1);
  }

  void save(BinaryWriter& w) const {
    w.put_i64(whole_);
    w.put_f64(frac_);
    w.put_i64(head_);
    w.put_u64(buf_.size());
    for (const auto& v : buf_) w.put_vector(v);
  }
  void load(BinaryReader& r) {
    whole_ = static_cast<int>(r.get_i64());
    frac_ = r.get_f64();
    head_ = static_cast<int>(r.get_i64());
    buf_.resize(r.get_u64());
    for (auto& v : buf_) v = r.get_vector();
  }

 private:
  const Eigen::VectorXd& at(int age) const {
    const int n = static_cast<int>(buf_.size());
    return buf_[(head_ - age + n) % n];
  }
  int whole_ = 0;
  double frac_ = 0.0;
  int head_ = 0;
  std::vector<Eigen::VectorXd> buf_{Eigen::VectorXd()};
};

/// Horizontal pushes at random intervals with random magnitude, sign and
/// duration. Inactive schedules never push.
class PushSchedule {
 public:
  PushSchedule() = default;
  PushSchedule(const RandomizationConfig& cfg, bool active, RngStream& rng) : cfg_(cfg), active_(active) {
    if (active_) next_ = draw(rng, cfg_.push_interval);
  }

  bool active() const { return active_; }

  /// Force at time t; draws the next push when the previous one is over.
  double force(double t, RngStream& rng) {
    if (!active_) return 0.0;
    if (t >= next_ && t >= end_) {
      start_ = next_;
      end_ = start_ + draw(rng, cfg_.push_duration);
      magnitude_ = rng.sign() * cfg_.push_scale * draw(rng, cfg_.push_force);
      next_ = end_ + draw(rng, cfg_.push_interval);
    }
    return t >= start_ && t < end_ ? magnitude_ : 0.0;
  }

  void save(BinaryWriter& w) const {
    w.put_bool(active_);
    for (double v : {next_, start_, end_, magnitude_}) w.put_f64(v);
  }
  void load(BinaryReader& r) {
    active_ = r.get_bool();
    next_ = r.get_f64();
    start_ = r.get_f64();
    end_ = r.get_f64();
    magnitude_ = r.get_f64();
  }

 private:
  RandomizationConfig cfg_;
  bool active_ = false;
  double next_ = 0.0, start_ = -1.0, end_ = -1.0, magnitude_ = 0.0;
};

}  // namespace tolebi::train
