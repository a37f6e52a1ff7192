// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "tolebi/core/errors.hpp"
#include "tolebi/gait/gait.hpp"

namespace tolebi::reward {

enum Term : int {
  kLinearVelocity = 0,
  kAngularVelocity,
  kFootContact,
  kOrientation,
  kJointTorque,
  kJointVelocity,
  kJointAcceleration,
  kFeetContactForce,
  kTorqueDifference,
  kContactForceDifference,
  kTrajectoryMimic,
  kContactForceTracking,
  kTermination,
  kTermCount
};

inline constexpr std::array<const char*, kTermCount> kTermNames{
    "linear_velocity",  "angular_velocity",   "foot_contact",       "orientation",
    "joint_torque",     "joint_velocity",     "joint_acceleration", "feet_contact_force",
    "torque_difference", "contact_force_difference", "trajectory_mimic", "contact_force_tracking",
    "termination"};

inline int term_index(const std::string& name) {
  for (int i = 0; i < kTermCount; ++i)
    if (name == kTermNames[i]) return i;
  throw ConfigError("unknown reward term: " + name);
}

struct RewardWeights {
  std::array<double, kTermCount> w{};

  double operator[](int i) const { return w[i]; }
  double& operator[](int i) { return w[i]; }

  static RewardWeights nominal() {
    RewardWeights r;
    r.w = {0.4, 0.2, 0.2, 0.3, 0.05, 0.05, 0.05, 0.1, 0.7, 0.2, 0.35, 0.0, 0.0};
    return r;
  }
  static RewardWeights fault() {
    RewardWeights r = nominal();
    r.w[kContactForceTracking] = 0.3;
    r.w[kTermination] = -100.0;
    return r;
  }
};

struct RewardBreakdown {
  std::array<double, kTermCount> raw{};
  std::array<double, kTermCount> weighted{};
  double task = 0.0;
  double regulation = 0.0;
  double fall = 0.0;
  double total = 0.0;
};

/// exp(-x), kept strictly positive.
inline double exp_term(double x) { return std::max(std::exp(-x), DBL_MIN); }

inline gait::ContactPattern contact_pattern(double fz_left, double fz_right, double weight, double fraction = 0.05) {
  return {fz_left > fraction * weight, fz_right > fraction * weight};
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// Backward difference of joint velocity.
inline Eigen::VectorXd joint_acceleration(const Eigen::VectorXd& qd, const Eigen::VectorXd& qd_prev, double dt) {
  check_dim("joint_acceleration", qd.size(), qd_prev.size());
  if (!(dt > 0.0)) throw ConfigError("joint_acceleration: dt must be > 0");
  return (qd - qd_prev) / dt;
}

/// Everything one step of reward evaluation looks at. Previous-step torques
/// and forces are zero at episode start.
struct RewardInputs {
  Eigen::Vector2d v_cmd = Eigen::Vector2d::Zero();
  Eigen::Vector2d v_base = Eigen::Vector2d::Zero();
  double w_cmd = 0.0;
  double w_base = 0.0;
  gait::ContactPattern contact;
  gait::SupportPhase scheduled = gait::SupportPhase::DSP;

  double roll = 0.0;
  double pitch = 0.0;
  Eigen::VectorXd tau, tau_prev;
  Eigen::VectorXd qd, qdd;
  std::array<double, 2> fz{0.0, 0.0};
  std::array<double, 2> fz_prev{0.0, 0.0};
  double weight = 1.0;  // robot weight W, N

  Eigen::VectorXd q, q_ref;
  std::array<double, 2> fz_ref{0.0, 0.0};
  bool terminated = false;
};

struct TaskTerms {
  double linear_velocity, angular_velocity, foot_contact;
};

inline TaskTerms task_rewards(const Eigen::Vector2d& v_cmd, const Eigen::Vector2d& v_base, double w_cmd,
                              double w_base, const gait::ContactPattern& contact, gait::SupportPhase scheduled) {
  constexpr double lin = 0.45 * 0.45, ang = 0.35 * 0.35;
  const double dw = w_cmd - w_base;
  return {exp_term((v_cmd - v_base).squaredNorm() / lin), exp_term(dw * dw / ang),
          gait::matches(contact, scheduled) ? 1.0 : 0.0};
}

struct RegulationTerms {
  double orientation, joint_torque, joint_velocity, joint_acceleration, feet_contact_force, torque_difference,
      contact_force_difference;
};

inline RegulationTerms regulation_rewards(const RewardInputs& in) {
  check_dim("reward tau_prev", in.tau.size(), in.tau_prev.size());
  check_dim("reward qdd", in.qd.size(), in.qdd.size());
  double excess = 0.0, delta = 0.0;
  for (int i = 0; i < 2; ++i) {
    excess += relu(in.fz[i] - 1.4 * in.weight);
    delta += std::abs(in.fz[i] - in.fz_prev[i]);
  }
  return {exp_term(500.0 * (in.roll * in.roll + in.pitch * in.pitch)),
          exp_term(in.tau.norm() / 100.0),
          exp_term(in.qd.norm() / 100.0),
          exp_term(in.qdd.norm() / 0.05),
          exp_term(excess / 140.0),
          exp_term((in.tau - in.tau_prev).norm() / (1.2 * 1.2)),
          exp_term(delta / 100.0)};
}

struct FallibilityTerms {
  double trajectory_mimic, contact_force_tracking, termination;
};

inline FallibilityTerms fallibility_rewards(const Eigen::VectorXd& q, const Eigen::VectorXd& q_ref,
                                            const std::array<double, 2>& fz, const std::array<double, 2>& fz_ref,
                                            bool terminated) {
  check_dim("reward q_ref", q.size(), q_ref.size());
  const double force_error = std::abs(fz_ref[0] - fz[0]) + std::abs(fz_ref[1] - fz[1]);
  return {exp_term((q_ref - q).squaredNorm() / 0.5), exp_term(force_error / 10.0), terminated ? 1.0 : 0.0};
}

inline RewardBreakdown total_reward(const RewardInputs& in, const RewardWeights& weights) {
  RewardBreakdown b;
  const TaskTerms t = task_rewards(in.v_cmd, in.v_base, in.w_cmd, in.w_base, in.contact, in.scheduled);
  const RegulationTerms r = regulation_rewards(in);
  const FallibilityTerms f = fallibility_rewards(in.q, in.q_ref, in.fz, in.fz_ref, in.terminated);
  b.raw = {t.linear_velocity,         t.angular_velocity,   t.foot_contact,          r.orientation,
           r.joint_torque,            r.joint_velocity,     r.joint_acceleration,    r.feet_contact_force,
           r.torque_difference,       r.contact_force_difference, f.trajectory_mimic, f.contact_force_tracking,
           f.termination};
  for (int i = 0; i < kTermCount; ++i) {
    // A zero weight switches the term off even when its value is not finite.
    b.weighted[i] = weights[i] == 0.0 ? 0.0 : weights[i] * b.raw[i];
    if (i <= kFootContact)
      b.task += b.weighted[i];
    else if (i <= kContactForceDifference)
      b.regulation += b.weighted[i];
    else
      b.fall += b.weighted[i];
  }
  b.total = b.task + b.regulation + b.fall;
  return b;
}

}  // namespace tolebi::reward
