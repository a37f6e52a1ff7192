// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "tolebi/core/rng.hpp"
#include "tolebi/sim/dynamics.hpp"

using namespace tolebi;
using namespace tolebi::sim;

namespace {

constexpr double kDt = 0.002;

SimState suspended(const RobotModel& m, double height) {
  SimState s = SimState::zeros(m.joint_count());
  s.q = m.nominal_pose;
  s.base_pos = Vec2(0.0, height);
  return s;
}

}  // namespace

TEST(BipedSim, StandsStillWithZeroTorque) {
  const RobotModel m = RobotModel::planar_biped();
  const Terrain flat = Terrain::flat();
  SimState s = standing_state(m, flat, Eigen::VectorXd::Zero(6));
  const double z0 = s.base_pos.y();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  for (int i = 0; i < 500; ++i) s = step(s, zero, m, flat, kDt);
  EXPECT_NEAR(s.base_pos.y(), z0, 1e-3);
  EXPECT_NEAR(s.time, 1.0, 1e-9);
}

TEST(BipedSim, FreeFallMatchesClosedForm) {
  const RobotModel m = RobotModel::planar_biped();
  SimState s = suspended(m, 20.0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  for (int i = 1; i <= 400; ++i) {
    s = step(s, zero, m, Terrain::flat(), kDt);
    ASSERT_NEAR(s.base_vel.y(), -m.gravity * i * kDt, 1e-9);
  }
  EXPECT_NEAR(s.base_vel.x(), 0.0, 1e-12);
  EXPECT_EQ(s.fz_left, 0.0);
  EXPECT_EQ(s.fz_right, 0.0);
}

TEST(BipedSim, StandingContactForceBalancesWeight) {
  const RobotModel m = RobotModel::planar_biped();
  const Terrain flat = Terrain::flat();
  SimState s = standing_state(m, flat, Eigen::VectorXd::Zero(6));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  double total = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    s = step(s, zero, m, flat, kDt);
    total += s.fz_left + s.fz_right;
  }
  EXPECT_NEAR(total / n, m.weight(), 0.05 * m.weight());
  EXPECT_LT(m.weight() / m.contact.normal_stiffness, 0.01);  // single-point static penetration < 1 cm
}

TEST(BipedSim, WeightEqualsMassTimesGravity) {
  const RobotModel m = RobotModel::planar_biped();
  EXPECT_DOUBLE_EQ(m.weight(), m.total_mass() * m.gravity);
  EXPECT_EQ(m.joint_count() % 2, 0);
  EXPECT_NO_THROW(m.validate());
  RobotModel bad = m;
  bad.legs[0][1].mass = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(BipedContact, FootAboveGroundHasNoForce) {
  const RobotModel m = RobotModel::planar_biped();
  const ContactResult c = contact_forces(suspended(m, 2.0), m, Terrain::flat());
  EXPECT_EQ(c.fz_left, 0.0);
  EXPECT_EQ(c.fz_right, 0.0);
  EXPECT_EQ(c.ft_left, 0.0);
}

TEST(BipedContact, PenaltyNormalForce) {
  const RobotModel m = RobotModel::planar_biped();
  const double p = 0.004;
  // Straight legs, flat feet: all four points sink by exactly p.
  const SimState s = standing_state(m, Terrain::flat(), Eigen::VectorXd::Zero(6), 0.0, p);
  const ContactResult c = contact_forces(s, m, Terrain::flat());
  for (int i = 0; i < kContactPoints; ++i) EXPECT_NEAR(c.force[i].y(), m.contact.normal_stiffness * p, 1e-9);
  EXPECT_NEAR(penalty_normal_force(m.contact, p, 0.0), m.contact.normal_stiffness * p, 1e-12);
  EXPECT_EQ(penalty_normal_force(m.contact, p, -10.0), 0.0);  // clamped, never pulls
}

TEST(BipedContact, CoulombClampOnLargeTangentialDemand) {
  const ContactParams c;
  const double mu = 0.8, fz = 120.0;
  // Anchor displaced so that the spring demand is 10 mu Fz.
  ContactAnchor anchor{true, 0.0};
  const double x = -10.0 * mu * fz / c.tangential_stiffness;
  const double ft = coulomb_tangential_force(c, mu, fz, x, 0.0, anchor);
  EXPECT_NEAR(ft, mu * fz, 1e-9);
  // Anchor slides so that the spring now sits exactly on the friction cone.
  EXPECT_NEAR(-c.tangential_stiffness * (x - anchor.x), mu * fz, 1e-9);
  // Small demand passes through unclamped.
  ContactAnchor a2{true, 0.0};
  EXPECT_NEAR(coulomb_tangential_force(c, mu, fz, -1e-4, 0.0, a2), c.tangential_stiffness * 1e-4, 1e-9);
}

TEST(BipedTermination, Thresholds) {
  const RobotModel m = RobotModel::planar_biped();
  const TerminationConfig cfg;
  const SimState nominal = standing_state(m, Terrain::flat(), m.nominal_pose);
  EXPECT_EQ(check_termination(nominal, m), TerminationFlag::Running);

  SimState low = nominal;
  low.base_pos.y() = 0.2 * nominal_height(m);
  EXPECT_EQ(check_termination(low, m), TerminationFlag::Terminated);

  SimState tilted = nominal;
  tilted.pitch = cfg.pitch_limit;
  EXPECT_EQ(check_termination(tilted, m), TerminationFlag::Running);
  tilted.pitch = std::nextafter(cfg.pitch_limit, 10.0);
  EXPECT_EQ(check_termination(tilted, m), TerminationFlag::Terminated);
  tilted.pitch = -std::nextafter(cfg.pitch_limit, 10.0);
  EXPECT_EQ(check_termination(tilted, m), TerminationFlag::Terminated);

  SimState split = nominal;
  split.q[0] = 0.9;   // left hip far forward
  split.q[3] = -0.9;  // right hip far back
  EXPECT_EQ(check_termination(split, m), TerminationFlag::Terminated);
}

TEST(BipedSim, DeterministicBitIdentical) {
  const RobotModel m = RobotModel::planar_biped();
  RngStream rng(7, 0);
  SimState a = standing_state(m, Terrain::flat(), m.nominal_pose);
  SimState b = a;
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd tau(6);
    for (int j = 0; j < 6; ++j) tau[j] = rng.uniform(-30, 30);
    a = step(a, tau, m, Terrain::flat(), kDt);
    b = step(b, tau, m, Terrain::flat(), kDt);
    ASSERT_EQ(a.coordinates(), b.coordinates());
    ASSERT_EQ(a.velocities(), b.velocities());
    ASSERT_EQ(a.fz_left, b.fz_left);
  }
}

TEST(BipedSim, EnergyDriftBelowOnePercent) {
  RobotModel m = RobotModel::planar_biped();
  m.joint_damping.setZero();
  m.joint_friction.setZero();
  SimState s = suspended(m, 8.0);
  s.qd << 1.0, -2.0, 3.0, -1.5, 2.5, -0.5;
  s.pitch_rate = 0.3;
  s.base_vel = Vec2(0.5, 1.0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  const double e0 = mechanical_energy(s, m);
  for (int i = 0; i < 500; ++i) {
    s = step(s, zero, m, Terrain::flat(), kDt);
    ASSERT_EQ(s.fz_left + s.fz_right, 0.0);
  }
  EXPECT_LT(std::abs(mechanical_energy(s, m) - e0), 0.01 * std::abs(e0));
}

TEST(BipedSim, ContactForcesNeverNegativeUnderFuzz) {
  const RobotModel m = RobotModel::planar_biped();
  const Terrain t = Terrain::stairs_down(0.3, 0.3, 0.05, 3);
  RngStream rng(11, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd pose = m.nominal_pose;
    for (int j = 0; j < 6; ++j) pose[j] += rng.uniform(-0.3, 0.3);
    SimState s = standing_state(m, t, pose, rng.uniform(-0.2, 0.5));
    s.base_vel = Vec2(rng.uniform(-1, 1), rng.uniform(-1, 0.5));
    for (int i = 0; i < 150; ++i) {
      Eigen::VectorXd tau(6);
      for (int j = 0; j < 6; ++j) tau[j] = rng.uniform(-200, 200);
      s = step(s, tau, m, t, kDt);
      ASSERT_GE(s.fz_left, 0.0);
      ASSERT_GE(s.fz_right, 0.0);
      const ContactResult c = contact_forces(s, m, t);
      for (const auto& f : c.force) {
        ASSERT_GE(f.y(), 0.0);
        ASSERT_LE(std::abs(f.x()), t.friction * f.y() + 1e-9);
      }
    }
  }
}

TEST(BipedSim, TorqueClampRespectsLimits) {
  RobotModel m = RobotModel::planar_biped();
  m.motor_constant.setConstant(1.1);
  RngStream rng(3, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd tau(6);
    for (int j = 0; j < 6; ++j) tau[j] = rng.uniform(-1e3, 1e3);
    const Eigen::VectorXd applied = clamp_torques(tau, m);
    for (int j = 0; j < 6; ++j) ASSERT_LE(std::abs(applied[j]), m.torque_limit[j]);
  }
}

TEST(BipedSim, ErrorsOnBadInput) {
  const RobotModel m = RobotModel::planar_biped();
  SimState s = suspended(m, 2.0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  EXPECT_THROW(step(s, zero, m, Terrain::flat(), 0.0), ConfigError);
  EXPECT_THROW(step(s, Eigen::VectorXd::Zero(5), m, Terrain::flat(), kDt), DimensionMismatch);
  s.qd[2] = std::nan("");
  EXPECT_THROW(step(s, zero, m, Terrain::flat(), kDt), NumericalDivergence);
  SimState fast = suspended(m, 2.0);
  fast.qd[0] = 2e4;
  EXPECT_THROW(step(fast, zero, m, Terrain::flat(), kDt), NumericalDivergence);
}

TEST(BipedKinematics, JacobianMatchesFiniteDifferences) {
  const RobotModel m = RobotModel::planar_biped();
  SimState s = suspended(m, 1.0);
  s.pitch = 0.2;
  s.q << 0.4, -0.7, 0.2, -0.3, -0.2, 0.1;
  const Frames f(s, m);
  const double eps = 1e-6;
  for (int i = 0; i < kContactPoints; ++i) {
    const PointJacobian jac = f.contact_jacobian(i);
    for (int c = 0; c < f.dof(); ++c) {
      Eigen::VectorXd g = s.coordinates();
      SimState plus = s, minus = s;
      auto set = [&](SimState& t, double d) {
        Eigen::VectorXd gg = g;
        gg[c] += d;
        t.base_pos = gg.head<2>();
        t.pitch = gg[2];
        t.q = gg.tail(6);
      };
      set(plus, eps);
      set(minus, -eps);
      const Vec2 fd = (Frames(plus, m).contact_point(i) - Frames(minus, m).contact_point(i)) / (2 * eps);
      EXPECT_NEAR(jac(0, c), fd.x(), 1e-8);
      EXPECT_NEAR(jac(1, c), fd.y(), 1e-8);
    }
  }
}

TEST(BipedKinematics, MassMatrixSymmetricPositiveDefinite) {
  const RobotModel m = RobotModel::planar_biped();
  SimState s = suspended(m, 1.0);
  s.q << 0.4, -0.7, 0.2, -0.3, -0.2, 0.1;
  const MassMatrix mm = mass_matrix(m, Frames(s, m));
  EXPECT_LT((mm.mass - mm.mass.transpose()).norm(), 1e-12);
  EXPECT_GT(mm.mass.ldlt().vectorD().minCoeff(), 0.0);
  EXPECT_NEAR(mm.mass(0, 0), m.total_mass(), 1e-12);
  // Gravity-only generalized force on the vertical coordinate is the weight.
  EXPECT_NEAR(mm.bias[1], m.weight(), 1e-9);
}

TEST(BipedSim, PushImpulseChangesMomentum) {
  // Impulse-momentum: a 150 N push for 0.4 s on the airborne robot. Semi-implicit
  // Euler is first order, so the residual must also halve with dt.
  const RobotModel m = RobotModel::planar_biped();
  auto residual = [&](double dt) {
    SimState s = suspended(m, 30.0);
    const Vec2 p0 = linear_momentum(s, m);
    StepOptions opt;
    opt.push_force = Vec2(150.0, 0.0);
    const int n = static_cast<int>(std::lround(0.4 / dt));
    for (int i = 0; i < n; ++i) s = step(s, Eigen::VectorXd::Zero(6), m, Terrain::flat(), dt, opt);
    return Vec2(linear_momentum(s, m) - p0 - Vec2(150.0 * 0.4, -m.weight() * 0.4));
  };
  const Vec2 coarse = residual(kDt);
  EXPECT_LT(std::abs(coarse.x()), 5e-3 * 60.0);
  EXPECT_LT(std::abs(coarse.y()), 5e-3 * m.weight() * 0.4);
  const Vec2 fine = residual(kDt / 2);
  EXPECT_NEAR(coarse.x() / fine.x(), 2.0, 0.1);
}

TEST(BipedSim, FixedBaseHoldsTrunkWhileLegsSwing) {
  const RobotModel m = RobotModel::planar_biped();
  const Terrain flat = Terrain::flat();
  SimState s = suspended(m, 5.0);
  StepOptions opt;
  opt.fixed_base = true;
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(m.joint_count());
  tau[0] = 20.0;
  for (int i = 0; i < 250; ++i) s = step(s, tau, m, flat, kDt, opt);
  EXPECT_EQ(s.base_pos.x(), 0.0);
  EXPECT_EQ(s.base_pos.y(), 5.0);
  EXPECT_EQ(s.pitch, 0.0);
  EXPECT_EQ(s.base_vel.norm(), 0.0);
  EXPECT_GT(std::abs(s.q[0] - m.nominal_pose[0]), 0.05);
}
