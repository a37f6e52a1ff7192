// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/errors.hpp"

namespace tolebi::gait {

struct PhaseState {
  double phase = 0.0;   // [0, 1)
  double period = 1.0;  // s, reference gait period
};

/// phi' = (phi + dt / T_ref + a) mod 1 with the modulation clamped to
/// [-max_modulation, max_modulation].
inline PhaseState advance_phase(PhaseState ps, double dt, double modulation, double max_modulation = 0.05) {
  if (!(dt > 0.0)) throw ConfigError("advance_phase: dt must be > 0");
  if (!(ps.period > 0.0)) throw ConfigError("gait.period must be > 0");
  const double a = std::clamp(modulation, -max_modulation, max_modulation);
  double next = ps.phase + dt / ps.period + a;
  next -= std::floor(next);
  if (next >= 1.0) next = 0.0;
  ps.phase = next;
  return ps;
}

/// (sin 2 pi phi, cos 2 pi phi).
inline Eigen::Vector2d phase_encoding(double phase) {
  const double a = 2.0 * std::numbers::pi * phase;
  return {std::sin(a), std::cos(a)};
}

enum class SupportPhase : int { DSP = 0, RSSP = 1, LSSP = 2 };

inline const char* to_string(SupportPhase p) {
  switch (p) {
    case SupportPhase::RSSP: return "RSSP";
    case SupportPhase::LSSP: return "LSSP";
    default: return "DSP";
  }
}

/// Which feet carry load.
struct ContactPattern {
  bool left = false;
  bool right = false;
};

inline bool matches(const ContactPattern& c, SupportPhase p) {
  switch (p) {
    case SupportPhase::DSP: return c.left && c.right;
    case SupportPhase::RSSP: return c.right && !c.left;
    case SupportPhase::LSSP: return c.left && !c.right;
  }
  return false;
}

/// Partition of the gait cycle into half-open intervals [start, next start).
/// A phase exactly on a boundary belongs to the interval that starts there.
struct GaitSchedule {
  struct Interval {
    double start;
    SupportPhase phase;
  };
  std::vector<Interval> intervals{{0.0, SupportPhase::DSP},
                                  {0.1, SupportPhase::RSSP},
                                  {0.5, SupportPhase::DSP},
                                  {0.6, SupportPhase::LSSP}};

  void validate() const {
    if (intervals.empty() || intervals.front().start != 0.0)
      throw ConfigError("gait.schedule: first interval must start at 0");
    bool seen[3] = {false, false, false};
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      const double end = i + 1 < intervals.size() ? intervals[i + 1].start : 1.0;
      if (!(end > intervals[i].start) || end > 1.0)
        throw ConfigError("gait.schedule: intervals must be non-empty, sorted and inside [0,1)");
      seen[static_cast<int>(intervals[i].phase)] = true;
    }
    if (!(seen[0] && seen[1] && seen[2])) throw ConfigError("gait.schedule: every support phase must appear");
  }

  std::size_t index_of(double phase) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < intervals.size(); ++i)
      if (intervals[i].start <= phase) k = i;
    return k;
  }
  double end_of(std::size_t i) const { return i + 1 < intervals.size() ? intervals[i + 1].start : 1.0; }
};

inline SupportPhase support_phase(double phase, const GaitSchedule& schedule) {
  return schedule.intervals[schedule.index_of(phase)].phase;
}

struct ReferenceParams {
  double hip_nominal = 0.3;    // rad
  double knee_nominal = -0.6;  // rad
  double hip_amplitude = 0.25;  // rad, fore/aft swing about the nominal
  double knee_lift = 0.5;       // rad, extra flexion at mid-swing
};

struct ReferenceSample {
  Eigen::VectorXd q;  // [l_hip, l_knee, l_ankle, r_hip, r_knee, r_ankle]
  double fz_left = 0.0;
  double fz_right = 0.0;
};

/// Scripted periodic gait: sinusoidal hip swing with half-cycle offset
/// between legs, a sin^2 knee bump during each swing, and an ankle that keeps
/// the sole level. Vertical load ramps between feet across double support,
/// sits at W on the stance foot and at zero on the swing foot, so the two
/// references always sum to W.
class GaitReference {
 public:
  GaitReference(GaitSchedule schedule, ReferenceParams params, double weight)
      : schedule_(std::move(schedule)), params_(params), weight_(weight) {
    schedule_.validate();
    if (!(weight_ > 0.0)) throw ConfigError("gait reference: weight must be > 0");
    auto count = [&](SupportPhase p) {
      return std::count_if(schedule_.intervals.begin(), schedule_.intervals.end(),
                           [p](const auto& i) { return i.phase == p; });
    };
    if (count(SupportPhase::RSSP) != 1 || count(SupportPhase::LSSP) != 1)
      throw ConfigError("gait reference: schedule needs exactly one RSSP and one LSSP interval");
    for (int side = 0; side < 2; ++side) {
      const SupportPhase swing_phase = side == 0 ? SupportPhase::RSSP : SupportPhase::LSSP;
      const std::size_t n = schedule_.intervals.size();
      for (std::size_t i = 0; i < n; ++i) {
        if (schedule_.intervals[i].phase != swing_phase) continue;
        swing_start_[side] = schedule_.intervals[i].start;
        swing_end_[side] = schedule_.end_of(i);
        const std::size_t prev = (i + n - 1) % n;
        if (schedule_.intervals[prev].phase != SupportPhase::DSP)
          throw ConfigError("gait reference: every single-support interval must follow a DSP interval");
        double p0 = schedule_.intervals[prev].start, p1 = schedule_.end_of(prev);
        hip_back_[side] = 0.5 * (p0 + p1);
      }
    }
  }

  const GaitSchedule& schedule() const { return schedule_; }
  double weight() const { return weight_; }

  ReferenceSample reference_at(double phase) const {
    phase -= std::floor(phase);
    ReferenceSample out;
    out.q.resize(6);
    const double ankle_nominal = -(params_.hip_nominal + params_.knee_nominal);
    for (int side = 0; side < 2; ++side) {
      const double hip =
          params_.hip_nominal - params_.hip_amplitude * std::cos(2.0 * std::numbers::pi * (phase - hip_back_[side]));
      double knee = params_.knee_nominal;
      if (phase >= swing_start_[side] && phase < swing_end_[side]) {
        const double u = (phase - swing_start_[side]) / (swing_end_[side] - swing_start_[side]);
        const double s = std::sin(std::numbers::pi * u);
        knee -= params_.knee_lift * s * s;
      }
      out.q[3 * side + 0] = hip;
      out.q[3 * side + 1] = knee;
      out.q[3 * side + 2] = ankle_nominal - (hip - params_.hip_nominal) - (knee - params_.knee_nominal);
    }

    const std::size_t i = schedule_.index_of(phase);
    const auto& iv = schedule_.intervals[i];
    switch (iv.phase) {
      case SupportPhase::RSSP:
        out.fz_right = weight_;
        break;
      case SupportPhase::LSSP:
        out.fz_left = weight_;
        break;
      case SupportPhase::DSP: {
        const double u = (phase - iv.start) / (schedule_.end_of(i) - iv.start);
        const std::size_t next = (i + 1) % schedule_.intervals.size();
        // The foot about to swing unloads while the other takes over.
        const bool left_unloads = schedule_.intervals[next].phase == SupportPhase::RSSP;
        const double rising = weight_ * u, falling = weight_ * (1.0 - u);
        out.fz_left = left_unloads ? falling : rising;
        out.fz_right = left_unloads ? rising : falling;
        break;
      }
    }
    return out;
  }

  /// Samples the reference over one cycle for inspection.
  void write_csv(const std::string& path, int samples = 200) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write reference csv: " + path);
    os << "phase,l_hip,l_knee,l_ankle,r_hip,r_knee,r_ankle,fz_left_ref,fz_right_ref,support\n";
    os << std::setprecision(17);
    for (int k = 0; k < samples; ++k) {
      const double phi = static_cast<double>(k) / samples;
      const ReferenceSample r = reference_at(phi);
      os << phi;
      for (int j = 0; j < 6; ++j) os << ',' << r.q[j];
      os << ',' << r.fz_left << ',' << r.fz_right << ',' << to_string(support_phase(phi, schedule_)) << '\n';
    }
  }

 private:
  GaitSchedule schedule_;
  ReferenceParams params_;
  double weight_;
  double swing_start_[2] = {0, 0}, swing_end_[2] = {0, 0}, hip_back_[2] = {0, 0};
};

}  // namespace tolebi::gait
