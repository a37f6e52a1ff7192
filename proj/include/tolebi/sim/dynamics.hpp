// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tolebi/core/errors.hpp"
#include "tolebi/sim/robot_model.hpp"
#include "tolebi/sim/state.hpp"
#include "tolebi/sim/terrain.hpp"

namespace tolebi::sim {

inline Vec2 rotate(double angle, const Vec2& v) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

/// d/dtheta of rotate(theta, v), expressed on the rotated vector.
inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

using PointJacobian = Eigen::Matrix<double, 2, Eigen::Dynamic>;

/// Joint frames of both legs for one state. Joint k of a leg is the proximal
/// joint of link k; origin[s][0] is the hip axis (= base position).
class Frames {
 public:
  Frames(const SimState& s, const RobotModel& m) : model_(&m), n_(m.links_per_leg()) {
    base_pos_ = s.base_pos;
    pitch_ = s.pitch;
    pitch_rate_ = s.pitch_rate;
    for (int side = 0; side < 2; ++side) {
      auto& org = origin_[side];
      auto& ang = angle_[side];
      auto& w = omega_[side];
      auto& acc = bias_[side];
      org.resize(n_ + 1);
      ang.resize(n_);
      w.resize(n_);
      acc.resize(n_ + 1);
      org[0] = s.base_pos;
      acc[0] = Vec2::Zero();
      double theta = s.pitch, rate = s.pitch_rate;
      for (int k = 0; k < n_; ++k) {
        theta += s.q[side * n_ + k];
        rate += s.qd[side * n_ + k];
        ang[k] = theta;
        w[k] = rate;
        const Vec2 d = rotate(theta, m.legs[side][k].distal);
        org[k + 1] = org[k] + d;
        acc[k + 1] = acc[k] - rate * rate * d;
      }
    }
  }

  int dof() const { return 3 + 2 * n_; }

  /// World position of a point given in the frame of link k on a leg.
  Vec2 position(int side, int k, const Vec2& local) const {
    return origin_[side][k] + rotate(angle_[side][k], local);
  }

  PointJacobian jacobian(int side, int k, const Vec2& local) const {
    const Vec2 p = position(side, k, local);
    PointJacobian jac = PointJacobian::Zero(2, dof());
    jac(0, 0) = 1.0;
    jac(1, 1) = 1.0;
    jac.col(2) = perp(p - base_pos_);
    for (int i = 0; i <= k; ++i) jac.col(3 + side * n_ + i) = perp(p - origin_[side][i]);
    return jac;
  }

  /// Acceleration of the point when all generalized accelerations are zero.
  Vec2 bias(int side, int k, const Vec2& local) const {
    const double w = omega_[side][k];
    return bias_[side][k] - w * w * rotate(angle_[side][k], local);
  }

  Vec2 base_point(const Vec2& local) const { return base_pos_ + rotate(pitch_, local); }
  PointJacobian base_jacobian(const Vec2& local) const {
    PointJacobian jac = PointJacobian::Zero(2, dof());
    jac(0, 0) = 1.0;
    jac(1, 1) = 1.0;
    jac.col(2) = perp(rotate(pitch_, local));
    return jac;
  }
  Vec2 base_bias(const Vec2& local) const { return -pitch_rate_ * pitch_rate_ * rotate(pitch_, local); }

  double link_angle(int side, int k) const { return angle_[side][k]; }
  const Vec2& joint_origin(int side, int k) const { return origin_[side][k]; }

  /// Contact point i (heel/toe of either foot) in world coordinates.
  Vec2 contact_point(int i) const { return position(i / 2, n_ - 1, i % 2 == 0 ? model_->heel : model_->toe); }
  PointJacobian contact_jacobian(int i) const {
    return jacobian(i / 2, n_ - 1, i % 2 == 0 ? model_->heel : model_->toe);
  }

 private:
  const RobotModel* model_;
  int n_;
  Vec2 base_pos_;
  double pitch_ = 0.0, pitch_rate_ = 0.0;
  std::array<std::vector<Vec2>, 2> origin_, bias_;
  std::array<std::vector<double>, 2> angle_, omega_;
};

/// Joint-space mass matrix M and velocity-product plus gravity terms h, such
/// that M * accel + h = generalized forces.
struct MassMatrix {
  Eigen::MatrixXd mass;
  Eigen::VectorXd bias;
};

inline MassMatrix mass_matrix(const RobotModel& m, const Frames& f) {
  const int n = f.dof();
  const int links = m.links_per_leg();
  MassMatrix out{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  const Vec2 g_up(0.0, m.gravity);

  auto add_body = [&](const PointJacobian& jac, const Vec2& bias, double mass) {
    out.mass.noalias() += mass * jac.transpose() * jac;
    out.bias.noalias() += mass * jac.transpose() * (bias + g_up);
  };

  add_body(f.base_jacobian(m.base.com), f.base_bias(m.base.com), m.base.mass);
  out.mass(2, 2) += m.base.inertia;
  for (int side = 0; side < 2; ++side) {
    for (int k = 0; k < links; ++k) {
      const Link& l = m.legs[side][k];
      add_body(f.jacobian(side, k, l.com), f.bias(side, k, l.com), l.mass);
      // Planar angular velocity of link k = pitch rate + joints 0..k of this leg.
      std::array<int, 16> idx{};
      int cnt = 0;
      idx[cnt++] = 2;
      for (int i = 0; i <= k; ++i) idx[cnt++] = 3 + side * links + i;
      for (int a = 0; a < cnt; ++a)
        for (int b = 0; b < cnt; ++b) out.mass(idx[a], idx[b]) += l.inertia;
    }
  }
  return out;
}

/// Per-point forces plus the per-foot totals reported in SimState.
struct ContactResult {
  std::array<Vec2, kContactPoints> force{};  // (tangential x, normal z)
  std::array<ContactAnchor, kContactPoints> anchors{};
  double fz_left = 0.0, fz_right = 0.0;
  double ft_left = 0.0, ft_right = 0.0;
};

/// Normal force of a penetrating point: k_n p + c_n dp/dt, clamped at zero.
inline double penalty_normal_force(const ContactParams& c, double penetration, double penetration_rate) {
  if (penetration <= 0.0) return 0.0;
  return std::max(0.0, c.normal_stiffness * penetration + c.normal_damping * penetration_rate);
}

/// Tangential spring-damper toward the stick anchor, Coulomb-clamped to mu*Fz.
/// Returns the force; slides the anchor when the clamp is active.
inline double coulomb_tangential_force(const ContactParams& c, double mu, double normal, double x, double vx,
                                       ContactAnchor& anchor) {
  const double demand = -c.tangential_stiffness * (x - anchor.x) - c.tangential_damping * vx;
  const double limit = mu * normal;
  if (std::abs(demand) <= limit) return demand;
  const double f = std::copysign(limit, demand);
  anchor.x = x + (f + c.tangential_damping * vx) / c.tangential_stiffness;
  return f;
}

inline ContactResult contact_forces(const SimState& s, const RobotModel& m, const Terrain& terrain,
                                    const Frames& frames) {
  ContactResult out;
  const Eigen::VectorXd v = s.velocities();
  for (int i = 0; i < kContactPoints; ++i) {
    const Vec2 p = frames.contact_point(i);
    const Vec2 vel = frames.contact_jacobian(i) * v;
    const double pen = terrain.height_at(p.x()) - p.y();
    ContactAnchor anchor = s.anchors[i];
    Vec2 f = Vec2::Zero();
    if (pen > 0.0) {
      if (!anchor.active) anchor = {true, p.x()};
      f.y() = penalty_normal_force(m.contact, pen, -vel.y());
      f.x() = coulomb_tangential_force(m.contact, terrain.friction, f.y(), p.x(), vel.x(), anchor);
    } else {
      anchor = {};
    }
    out.force[i] = f;
    out.anchors[i] = anchor;
  }
  out.fz_left = out.force[kLeftHeel].y() + out.force[kLeftToe].y();
  out.fz_right = out.force[kRightHeel].y() + out.force[kRightToe].y();
  out.ft_left = out.force[kLeftHeel].x() + out.force[kLeftToe].x();
  out.ft_right = out.force[kRightHeel].x() + out.force[kRightToe].x();
  return out;
}

inline ContactResult contact_forces(const SimState& s, const RobotModel& m, const Terrain& terrain) {
  return contact_forces(s, m, terrain, Frames(s, m));
}

/// Motor-constant scaling followed by the symmetric torque-limit clamp.
inline Eigen::VectorXd clamp_torques(const Eigen::VectorXd& torques, const RobotModel& m) {
  check_dim("torque vector", m.joint_count(), torques.size());
  return (m.motor_constant.array() * torques.array()).max(-m.torque_limit.array()).min(m.torque_limit.array());
}

struct StepOptions {
  Vec2 push_force = Vec2::Zero();  // applied at the trunk COM, N
  double divergence_bound = 1.0e4;
  double friction_velocity = 0.2;  // rad/s, tanh smoothing of joint friction
  bool fixed_base = false;         // base held in place (test-rig mode)
};

inline void check_bounded(const SimState& s, double bound) {
  auto bad = [bound](double x) { return !std::isfinite(x) || std::abs(x) > bound; };
  bool diverged = bad(s.base_pos.x()) || bad(s.base_pos.y()) || bad(s.pitch) || bad(s.base_vel.x()) ||
                  bad(s.base_vel.y()) || bad(s.pitch_rate) || !std::isfinite(s.fz_left) || !std::isfinite(s.fz_right);
  for (Eigen::Index j = 0; j < s.q.size(); ++j) diverged = diverged || bad(s.q[j]) || bad(s.qd[j]);
  if (diverged) throw NumericalDivergence("simulation state diverged at t=" + std::to_string(s.time));
}

/// One semi-implicit Euler step of the floating-base planar dynamics.
inline SimState step(const SimState& s, const Eigen::VectorXd& torques, const RobotModel& m, const Terrain& terrain,
                     double dt, const StepOptions& opt = {}) {
  if (!(dt > 0.0)) throw ConfigError("sim.dt must be > 0");
  const int J = m.joint_count();
  check_dim("sim state q", J, s.q.size());
  check_dim("sim state qd", J, s.qd.size());
  if (!s.finite()) throw NumericalDivergence("non-finite simulation state at t=" + std::to_string(s.time));

  const Frames frames(s, m);
  const MassMatrix mm = mass_matrix(m, frames);
  const ContactResult contact = contact_forces(s, m, terrain, frames);

  Eigen::VectorXd force = Eigen::VectorXd::Zero(frames.dof());
  force.tail(J) = clamp_torques(torques, m).array() - m.joint_damping.array() * s.qd.array() -
                  m.joint_friction.array() * (s.qd.array() / opt.friction_velocity).tanh();
  for (int i = 0; i < kContactPoints; ++i)
    if (contact.force[i].squaredNorm() > 0.0) force.noalias() += frames.contact_jacobian(i).transpose() * contact.force[i];
  if (opt.push_force.squaredNorm() > 0.0)
    force.noalias() += frames.base_jacobian(m.base.com).transpose() * opt.push_force;

  Eigen::VectorXd accel = Eigen::VectorXd::Zero(frames.dof());
  if (opt.fixed_base)
    accel.tail(J) = mm.mass.bottomRightCorner(J, J).ldlt().solve((force - mm.bias).tail(J));
  else
    accel = mm.mass.ldlt().solve(force - mm.bias);

  SimState next = s;
  next.base_vel += dt * accel.head<2>();
  next.pitch_rate += dt * accel[2];
  next.qd += dt * accel.tail(J);
  next.base_pos += dt * next.base_vel;
  next.pitch += dt * next.pitch_rate;
  next.q += dt * next.qd;
  next.time = s.time + dt;
  next.anchors = contact.anchors;

  const ContactResult after = contact_forces(next, m, terrain);
  next.fz_left = after.fz_left;
  next.fz_right = after.fz_right;
  check_bounded(next, opt.divergence_bound);
  return next;
}

/// Kinetic plus gravitational potential energy, J.
inline double mechanical_energy(const SimState& s, const RobotModel& m) {
  const Frames f(s, m);
  const Eigen::VectorXd v = s.velocities();
  const MassMatrix mm = mass_matrix(m, f);
  double pe = m.base.mass * m.gravity * f.base_point(m.base.com).y();
  for (int side = 0; side < 2; ++side)
    for (int k = 0; k < m.links_per_leg(); ++k)
      pe += m.legs[side][k].mass * m.gravity * f.position(side, k, m.legs[side][k].com).y();
  return 0.5 * v.dot(mm.mass * v) + pe;
}

inline Vec2 linear_momentum(const SimState& s, const RobotModel& m) {
  const Frames f(s, m);
  const Eigen::VectorXd v = s.velocities();
  Vec2 p = m.base.mass * (f.base_jacobian(m.base.com) * v);
  for (int side = 0; side < 2; ++side)
    for (int k = 0; k < m.links_per_leg(); ++k)
      p += m.legs[side][k].mass * (f.jacobian(side, k, m.legs[side][k].com) * v);
  return p;
}

/// Ankle (last joint) world x of each foot.
inline std::array<double, 2> foot_x(const SimState& s, const RobotModel& m) {
  const Frames f(s, m);
  const int last = m.links_per_leg() - 1;
  return {f.joint_origin(0, last).x(), f.joint_origin(1, last).x()};
}

/// Robot placed with the given pose so that its lowest contact point sinks
/// by the static penetration for its weight (or by `penetration` if >= 0).
inline SimState standing_state(const RobotModel& m, const Terrain& terrain, const Eigen::VectorXd& pose,
                               double x = 0.0, double penetration = -1.0) {
  SimState s = SimState::zeros(m.joint_count());
  s.q = pose;
  s.base_pos = Vec2(x, 0.0);
  const Frames f(s, m);
  std::array<double, kContactPoints> clearance{};
  for (int i = 0; i < kContactPoints; ++i) {
    const Vec2 p = f.contact_point(i);
    clearance[i] = p.y() - terrain.height_at(p.x());
  }
  const double lowest = *std::min_element(clearance.begin(), clearance.end());
  if (penetration < 0.0) {
    int touching = 0;
    for (double c : clearance) touching += (c - lowest < 1e-9) ? 1 : 0;
    penetration = m.weight() / (touching * m.contact.normal_stiffness);
  }
  s.base_pos.y() = -lowest - penetration;
  const ContactResult c = contact_forces(s, m, terrain);
  s.anchors = c.anchors;
  s.fz_left = c.fz_left;
  s.fz_right = c.fz_right;
  return s;
}

/// Hip height above flat ground for the nominal pose at zero penetration.
inline double nominal_height(const RobotModel& m) {
  return standing_state(m, Terrain::flat(), m.nominal_pose, 0.0, 0.0).base_pos.y();
}

struct TerminationConfig {
  double height_fraction = 0.6;      // of nominal standing height
  double pitch_limit = 0.8;          // rad, strict
  double max_foot_separation = 0.7;  // m, planar stand-in for leg self-collision
};

enum class TerminationFlag { Running, Terminated };

inline TerminationFlag check_termination(const SimState& s, const RobotModel& m, const Terrain& terrain,
                                         const TerminationConfig& cfg, double standing_height) {
  const double height = s.base_pos.y() - terrain.height_at(s.base_pos.x());
  if (height < cfg.height_fraction * standing_height) return TerminationFlag::Terminated;
  if (std::abs(s.pitch) > cfg.pitch_limit) return TerminationFlag::Terminated;
  const auto fx = foot_x(s, m);
  if (std::abs(fx[0] - fx[1]) > cfg.max_foot_separation) return TerminationFlag::Terminated;
  return TerminationFlag::Running;
}

inline TerminationFlag check_termination(const SimState& s, const RobotModel& m, const Terrain& terrain = {},
                                         const TerminationConfig& cfg = {}) {
  return check_termination(s, m, terrain, cfg, nominal_height(m));
}

}  // namespace tolebi::sim
