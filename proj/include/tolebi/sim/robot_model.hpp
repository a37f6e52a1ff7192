// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/errors.hpp"

namespace tolebi::sim {

using Vec2 = Eigen::Vector2d;

/// Rigid planar link. The proximal joint sits at the frame origin; with a
/// zero joint angle the frame is aligned with the world (x forward, z up).
struct Link {
  std::string name;
  double mass = 0.0;     // kg
  double inertia = 0.0;  // kg m^2 about the COM
  Vec2 com = Vec2::Zero();
  Vec2 distal = Vec2::Zero();  // next joint, link frame
};

/// Penalty contact parameters, per contact point.
struct ContactParams {
  double normal_stiffness = 2.0e4;      // N/m
  double normal_damping = 150.0;        // N s/m
  double tangential_stiffness = 1.0e4;  // N/m
  double tangential_damping = 100.0;    // N s/m
};

/// Sagittal-plane biped: a trunk with two identical-topology legs hanging off
/// the hip axis. Joint vectors are ordered [left leg proximal..distal, right
/// leg proximal..distal], so J = 2 * links per leg.
struct RobotModel {
  Link base;
  std::array<std::vector<Link>, 2> legs;  // 0 = left, 1 = right
  Vec2 heel = Vec2(-0.10, -0.06);          // contact points, last leg link frame
  Vec2 toe = Vec2(0.10, -0.06);

  Eigen::VectorXd torque_limit;    // N m
  Eigen::VectorXd kp;              // N m / rad, joint-lock hold gains
  Eigen::VectorXd kd;              // N m s / rad
  Eigen::VectorXd joint_damping;   // N m s / rad, passive
  Eigen::VectorXd joint_friction;  // N m, passive Coulomb (smoothed)
  Eigen::VectorXd motor_constant;  // dimensionless command scale
  Eigen::VectorXd nominal_pose;    // rad
  double gravity = 9.81;
  ContactParams contact;

  int links_per_leg() const { return static_cast<int>(legs[0].size()); }
  int joint_count() const { return 2 * links_per_leg(); }
  int dof() const { return 3 + joint_count(); }

  double total_mass() const {
    double m = base.mass;
    for (const auto& leg : legs)
      for (const auto& l : leg) m += l.mass;
    return m;
  }
  /// Total weight W in newtons.
  double weight() const { return total_mass() * gravity; }

  std::vector<std::string> joint_names() const {
    std::vector<std::string> names;
    for (int s = 0; s < 2; ++s)
      for (const auto& l : legs[s]) names.push_back((s == 0 ? "l_" : "r_") + l.name);
    return names;
  }

  void validate() const {
    auto positive = [](double v, const std::string& what) {
      if (!(v > 0.0)) throw ConfigError("robot: " + what + " must be strictly positive");
    };
    if (legs[0].empty() || legs[0].size() != legs[1].size())
      throw ConfigError("robot: legs must be non-empty and symmetric");
    positive(base.mass, "base.mass");
    positive(base.inertia, "base.inertia");
    positive(gravity, "gravity");
    for (const auto& leg : legs)
      for (const auto& l : leg) {
        positive(l.mass, l.name + ".mass");
        positive(l.inertia, l.name + ".inertia");
      }
    for (int k = 0; k + 1 < links_per_leg(); ++k) positive(legs[0][k].distal.norm(), legs[0][k].name + ".length");
    const long J = joint_count();
    for (auto* v : {&torque_limit, &kp, &kd, &joint_damping, &joint_friction, &motor_constant, &nominal_pose})
      check_dim("robot joint vector", J, v->size());
    for (long j = 0; j < J; ++j) positive(torque_limit[j], "torque_limit");
    if ((kp.array() < 0).any() || (kd.array() < 0).any() || (joint_damping.array() < 0).any() ||
        (joint_friction.array() < 0).any())
      throw ConfigError("robot: gains, damping and friction must be non-negative");
    positive(contact.normal_stiffness, "contact.normal_stiffness");
  }

  /// Desk-scale default: 17 kg, 0.8 m legs, hip/knee/ankle pitch per leg.
  static RobotModel planar_biped() {
    RobotModel m;
    m.base = {"trunk", 8.0, 0.25, Vec2(0.0, 0.20), Vec2::Zero()};
    for (auto& leg : m.legs) {
      leg = {
          {"hip_pitch", 2.0, 0.03, Vec2(0.0, -0.18), Vec2(0.0, -0.40)},
          {"knee_pitch", 1.5, 0.02, Vec2(0.0, -0.18), Vec2(0.0, -0.40)},
          {"ankle_pitch", 1.0, 0.01, Vec2(0.0, -0.03), Vec2::Zero()},
      };
    }
    auto per_leg = [](double hip, double knee, double ankle) {
      Eigen::VectorXd v(6);
      v << hip, knee, ankle, hip, knee, ankle;
      return v;
    };
    m.torque_limit = per_leg(80.0, 80.0, 40.0);
    m.kp = per_leg(200.0, 200.0, 60.0);
    m.kd = per_leg(5.0, 5.0, 1.5);
    m.joint_damping = per_leg(0.2, 0.2, 0.1);
    m.joint_friction = per_leg(0.1, 0.1, 0.05);
    m.motor_constant = Eigen::VectorXd::Ones(6);
    m.nominal_pose = per_leg(0.3, -0.6, 0.3);
    return m;
  }
};

}  // namespace tolebi::sim
