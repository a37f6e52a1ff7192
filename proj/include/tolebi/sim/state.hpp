// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>

#include <Eigen/Core>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/sim/robot_model.hpp"

namespace tolebi::sim {

/// Contact points in a fixed order.
enum ContactPoint : int { kLeftHeel = 0, kLeftToe = 1, kRightHeel = 2, kRightToe = 3 };
inline constexpr int kContactPoints = 4;

/// Tangential stick anchor of one contact point.
struct ContactAnchor {
  bool active = false;
  double x = 0.0;
};

struct SimState {
  Vec2 base_pos = Vec2::Zero();  // hip axis, m
  double pitch = 0.0;            // rad, counter-clockwise in the x-z plane
  Vec2 base_vel = Vec2::Zero();
  double pitch_rate = 0.0;
  Eigen::VectorXd q;   // rad
  Eigen::VectorXd qd;  // rad/s
  double fz_left = 0.0;
  double fz_right = 0.0;
  double time = 0.0;
  std::array<ContactAnchor, kContactPoints> anchors{};

  static SimState zeros(int joints) {
    SimState s;
    s.q = Eigen::VectorXd::Zero(joints);
    s.qd = Eigen::VectorXd::Zero(joints);
    return s;
  }

  /// Generalized coordinates [x, z, pitch, q...].
  Eigen::VectorXd coordinates() const {
    Eigen::VectorXd g(3 + q.size());
    g << base_pos, pitch, q;
    return g;
  }
  Eigen::VectorXd velocities() const {
    Eigen::VectorXd g(3 + qd.size());
    g << base_vel, pitch_rate, qd;
    return g;
  }

  bool finite() const {
    return base_pos.allFinite() && std::isfinite(pitch) && base_vel.allFinite() && std::isfinite(pitch_rate) &&
           q.allFinite() && qd.allFinite() && std::isfinite(fz_left) && std::isfinite(fz_right);
  }

  void save(BinaryWriter& w) const {
    w.put_f64(base_pos.x());
    w.put_f64(base_pos.y());
    w.put_f64(pitch);
    w.put_f64(base_vel.x());
    w.put_f64(base_vel.y());
    w.put_f64(pitch_rate);
    w.put_vector(q);
    w.put_vector(qd);
    w.put_f64(fz_left);
    w.put_f64(fz_right);
    w.put_f64(time);
    for (const auto& a : anchors) {
      w.put_bool(a.active);
      w.put_f64(a.x);
    }
  }
  void load(BinaryReader& r) {
    base_pos.x() = r.get_f64();
    base_pos.y() = r.get_f64();
    pitch = r.get_f64();
    base_vel.x() = r.get_f64();
    base_vel.y() = r.get_f64();
    pitch_rate = r.get_f64();
    q = r.get_vector();
    qd = r.get_vector();
    fz_left = r.get_f64();
    fz_right = r.get_f64();
    time = r.get_f64();
    for (auto& a : anchors) {
      a.active = r.get_bool();
      a.x = r.get_f64();
    }
  }
};

}  // namespace tolebi::sim
