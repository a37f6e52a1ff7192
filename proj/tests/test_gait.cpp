// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "tolebi/gait/gait.hpp"

using namespace tolebi;
using namespace tolebi::gait;

namespace {

double advance(double phi, double dt_over_t, double a) {
  return advance_phase({phi, 1.0}, dt_over_t, a).phase;
}

GaitReference default_reference(double weight = 166.77) { return {GaitSchedule{}, ReferenceParams{}, weight}; }

}  // namespace

TEST(Phase, IdentityAndWrap) {
  EXPECT_EQ(advance_phase({0.5, 1.0}, 1e-300, 0.0).phase, 0.5);
  EXPECT_NEAR(advance(0.98, 0.04, 0.0), 0.02, 1e-12);
  EXPECT_NEAR(advance(0.1, 0.004, -0.004), 0.1, 1e-15);
}

TEST(Phase, ModulationIsClamped) {
  EXPECT_NEAR(advance(0.2, 0.01, 0.5), 0.26, 1e-12);
  EXPECT_NEAR(advance(0.2, 0.01, -0.5), 0.16, 1e-12);
  EXPECT_NEAR(advance_phase({0.2, 1.0}, 0.01, 0.5, 0.1).phase, 0.31, 1e-12);
}

TEST(Phase, StaysInUnitInterval) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0), a(-0.2, 0.2), dt(1e-6, 0.05);
  for (int i = 0; i < 100000; ++i) {
    const double p = advance(u(gen), dt(gen), a(gen));
    ASSERT_GE(p, 0.0);
    ASSERT_LT(p, 1.0);
  }
  // Tiny negative result would round to 1.0 after the modulo.
  EXPECT_EQ(advance_phase({0.0, 1.0}, 1e-18, -1e-17).phase, 0.0);
}

TEST(Phase, CompositionAdvancesLinearly) {
  PhaseState ps{0.3, 0.8};
  const double dt = 0.02;
  const int n = 137;
  for (int i = 0; i < n; ++i) ps = advance_phase(ps, dt, 0.0);
  const double expect = std::fmod(0.3 + n * dt / 0.8, 1.0);
  EXPECT_NEAR(ps.phase, expect, 1e-12);
}

TEST(Phase, Errors) {
  EXPECT_THROW(advance_phase({0.1, 1.0}, 0.0, 0.0), ConfigError);
  EXPECT_THROW(advance_phase({0.1, 0.0}, 0.01, 0.0), ConfigError);
}

TEST(Phase, Encoding) {
  for (double p = 0.0; p < 1.0; p += 0.013) {
    const Eigen::Vector2d e = phase_encoding(p);
    EXPECT_NEAR(e.squaredNorm(), 1.0, 1e-15);
  }
  EXPECT_NEAR(phase_encoding(0.25)[0], 1.0, 1e-15);
}

TEST(Schedule, DefaultLookup) {
  const GaitSchedule s;
  EXPECT_EQ(support_phase(0.05, s), SupportPhase::DSP);
  EXPECT_EQ(support_phase(0.25, s), SupportPhase::RSSP);
  EXPECT_EQ(support_phase(0.55, s), SupportPhase::DSP);
  EXPECT_EQ(support_phase(0.8, s), SupportPhase::LSSP);
}

TEST(Schedule, BoundaryBelongsToStartingInterval) {
  const GaitSchedule s;
  EXPECT_EQ(support_phase(0.0, s), SupportPhase::DSP);
  EXPECT_EQ(support_phase(0.1, s), SupportPhase::RSSP);
  EXPECT_EQ(support_phase(std::nextafter(0.1, 0.0), s), SupportPhase::DSP);
  EXPECT_EQ(support_phase(0.5, s), SupportPhase::DSP);
  EXPECT_EQ(support_phase(0.6, s), SupportPhase::LSSP);
  EXPECT_EQ(support_phase(std::nextafter(1.0, 0.0), s), SupportPhase::LSSP);
}

TEST(Schedule, Validation) {
  GaitSchedule s;
  s.intervals = {{0.0, SupportPhase::DSP}, {0.5, SupportPhase::RSSP}};
  EXPECT_THROW(s.validate(), ConfigError);
  s.intervals = {{0.0, SupportPhase::DSP}, {0.5, SupportPhase::RSSP}, {0.4, SupportPhase::LSSP}};
  EXPECT_THROW(s.validate(), ConfigError);
  s.intervals = {{0.1, SupportPhase::DSP}, {0.5, SupportPhase::RSSP}, {0.7, SupportPhase::LSSP}};
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_NO_THROW(GaitSchedule{}.validate());
}

TEST(Schedule, ContactMatching) {
  EXPECT_TRUE(matches({true, true}, SupportPhase::DSP));
  EXPECT_FALSE(matches({true, false}, SupportPhase::DSP));
  EXPECT_TRUE(matches({false, true}, SupportPhase::RSSP));
  EXPECT_FALSE(matches({true, true}, SupportPhase::RSSP));
  EXPECT_TRUE(matches({true, false}, SupportPhase::LSSP));
  EXPECT_FALSE(matches({false, false}, SupportPhase::LSSP));
}

TEST(Reference, Periodic) {
  const auto ref = default_reference();
  for (double p = 0.0; p < 1.0; p += 0.037) {
    const auto a = ref.reference_at(p), b = ref.reference_at(p + 1.0);
    EXPECT_NEAR((a.q - b.q).norm(), 0.0, 1e-12);
    EXPECT_NEAR(a.fz_left, b.fz_left, 1e-9);
    EXPECT_NEAR(a.fz_right, b.fz_right, 1e-9);
  }
}

TEST(Reference, SwingFootUnloaded) {
  const double w = 166.77;
  const auto ref = default_reference(w);
  EXPECT_EQ(ref.reference_at(0.8).fz_right, 0.0);
  EXPECT_EQ(ref.reference_at(0.8).fz_left, w);
  EXPECT_EQ(ref.reference_at(0.3).fz_left, 0.0);
  EXPECT_EQ(ref.reference_at(0.3).fz_right, w);
  // Halfway through each double support the load is shared evenly.
  EXPECT_NEAR(ref.reference_at(0.05).fz_left, 0.5 * w, 1e-9);
  EXPECT_NEAR(ref.reference_at(0.55).fz_right, 0.5 * w, 1e-9);
}

TEST(Reference, CycleAverageLoadIsWeight) {
  const double w = 166.77;
  const auto ref = default_reference(w);
  const int n = 20000;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto r = ref.reference_at((k + 0.5) / n);
    ASSERT_GE(r.fz_left, 0.0);
    ASSERT_GE(r.fz_right, 0.0);
    sum += r.fz_left + r.fz_right;
  }
  EXPECT_NEAR(sum / n, w, 0.05 * w);
  EXPECT_NEAR(sum / n, w, 1e-9 * w);
}

TEST(Reference, ContinuousInPhase) {
  const auto ref = default_reference(100.0);
  const double h = 1e-7;
  for (double p = 0.0; p < 1.0; p += 0.001) {
    const auto a = ref.reference_at(p), b = ref.reference_at(p + h);
    ASSERT_LT((a.q - b.q).cwiseAbs().maxCoeff(), 1e-5) << p;
    ASSERT_LT(std::abs(a.fz_left - b.fz_left), 1e-3) << p;
  }
}

TEST(Reference, ShapeOracle) {
  const ReferenceParams p;
  const auto ref = default_reference();
  for (double phi : {0.0, 0.2, 0.3, 0.45, 0.7, 0.8, 0.95}) {
    const auto r = ref.reference_at(phi);
    const double hip_l = p.hip_nominal - p.hip_amplitude * std::cos(2 * std::numbers::pi * (phi - 0.05));
    const double hip_r = p.hip_nominal - p.hip_amplitude * std::cos(2 * std::numbers::pi * (phi - 0.55));
    EXPECT_NEAR(r.q[0], hip_l, 1e-12);
    EXPECT_NEAR(r.q[3], hip_r, 1e-12);
    const bool left_swing = phi >= 0.1 && phi < 0.5, right_swing = phi >= 0.6;
    const double bump_l = left_swing ? std::pow(std::sin(std::numbers::pi * (phi - 0.1) / 0.4), 2) : 0.0;
    const double bump_r = right_swing ? std::pow(std::sin(std::numbers::pi * (phi - 0.6) / 0.4), 2) : 0.0;
    EXPECT_NEAR(r.q[1], p.knee_nominal - p.knee_lift * bump_l, 1e-12);
    EXPECT_NEAR(r.q[4], p.knee_nominal - p.knee_lift * bump_r, 1e-12);
    // Level sole: hip + knee + ankle stays at zero for the default pose.
    EXPECT_NEAR(r.q[0] + r.q[1] + r.q[2], 0.0, 1e-12);
    EXPECT_NEAR(r.q[3] + r.q[4] + r.q[5], 0.0, 1e-12);
  }
}

TEST(Reference, RejectsBadSchedules) {
  GaitSchedule s;
  s.intervals = {{0.0, SupportPhase::DSP}, {0.1, SupportPhase::RSSP}, {0.3, SupportPhase::LSSP},
                 {0.5, SupportPhase::DSP}, {0.6, SupportPhase::LSSP}};
  EXPECT_THROW(GaitReference(s, {}, 100.0), ConfigError);
  EXPECT_THROW(GaitReference(GaitSchedule{}, {}, 0.0), ConfigError);
}

TEST(Reference, CsvExport) {
  const auto path = std::filesystem::temp_directory_path() / "tolebi_reference.csv";
  default_reference().write_csv(path.string(), 50);
  std::ifstream is(path);
  std::string line;
  int rows = 0;
  std::getline(is, line);
  EXPECT_EQ(line.rfind("phase,l_hip", 0), 0u);
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 50);
  std::filesystem::remove(path);
}
