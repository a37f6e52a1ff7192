// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/rng.hpp"
#include "tolebi/estimator/estimator.hpp"
#include "tolebi/fault/fault.hpp"
#include "tolebi/gait/gait.hpp"
#include "tolebi/sim/dynamics.hpp"

namespace tolebi::estimator {

/// Biped hung from a fixed base, every joint driven by a PD tracker toward a
/// random multi-sine target around the nominal pose. Produces labeled
/// feature sequences with injected faults for estimator training.
struct RigConfig {
  double control_dt = 0.02;
  int substeps = 10;
  double horizon = 4.0;  // s
  double amplitude = 0.3;  // rad per sine component
  double min_freq = 0.4, max_freq = 1.5;  // Hz
  int components = 2;
  double track_kp_scale = 0.25;  // tracker gains as a fraction of the lock gains
  double track_kd_scale = 0.3;
  fault::FaultConfig fault;
};

struct RigEpisode {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<Eigen::VectorXd> labels;
};

class FaultRig {
 public:
  FaultRig(sim::RobotModel model, RigConfig cfg) : model_(std::move(model)), cfg_(cfg) {
    model_.validate();
    opt_.fixed_base = true;
  }

  int steps_per_episode() const { return static_cast<int>(std::lround(cfg_.horizon / cfg_.control_dt)); }

  RigEpisode run(RngStream& rng) const {
    const int J = model_.joint_count();
    fault::FaultInjector injector(sample_scenario(rng, J, cfg_.fault, cfg_.horizon));
    std::vector<std::array<double, 3>> waves;  // per joint and component: amplitude, frequency, phase
    for (int j = 0; j < J * cfg_.components; ++j)
      waves.push_back({rng.uniform(0.3, 1.0) * cfg_.amplitude, rng.uniform(cfg_.min_freq, cfg_.max_freq),
                       rng.uniform(0.0, 2.0 * std::numbers::pi)});
    auto target = [&](double t) {
      Eigen::VectorXd q = model_.nominal_pose;
      for (int j = 0; j < J; ++j)
        for (int c = 0; c < cfg_.components; ++c) {
          const auto& w = waves[j * cfg_.components + c];
          q[j] += w[0] * std::sin(2.0 * std::numbers::pi * w[1] * t + w[2]);
        }
      return q;
    };

    sim::SimState s = sim::SimState::zeros(J);
    s.base_pos = sim::Vec2(0.0, 5.0);
    s.q = target(0.0);
    const Eigen::VectorXd kp = cfg_.track_kp_scale * model_.kp, kd = cfg_.track_kd_scale * model_.kd;
    Eigen::VectorXd prev_command = Eigen::VectorXd::Zero(J), prev_qd = s.qd;
    gait::PhaseState phase;
    RigEpisode ep;
    const int steps = steps_per_episode();
    const double sub_dt = cfg_.control_dt / cfg_.substeps;
    for (int k = 0; k < steps; ++k) {
      ep.inputs.push_back(features(s, gait::phase_encoding(phase.phase), prev_qd, prev_command, model_));
      ep.labels.push_back(injector.label(s.time, J));
      const Eigen::VectorXd command = kp.cwiseProduct(target(s.time) - s.q) - kd.cwiseProduct(s.qd);
      const Eigen::VectorXd ep_prev_qd = s.qd;
      for (int i = 0; i < cfg_.substeps; ++i) {
        injector.latch(s.q, s.time);
        const Eigen::VectorXd applied = injector.apply(command, s.q, s.qd, model_, s.time);
        s = sim::step(s, applied, model_, terrain_, sub_dt, opt_);
      }
      prev_command = command;
      prev_qd = ep_prev_qd;
      phase = gait::advance_phase(phase, cfg_.control_dt, 0.0);
    }
    return ep;
  }

 private:
  sim::RobotModel model_;
  RigConfig cfg_;
  sim::Terrain terrain_;
  sim::StepOptions opt_;
};

/// Runs the estimator along each episode from a zero state and cuts the
/// sequences into BPTT windows carrying the online hidden state.
inline std::vector<Window> collect_windows(const StatusEstimator& est, const std::vector<RigEpisode>& episodes) {
  std::vector<Window> out;
  for (const RigEpisode& ep : episodes) {
    std::vector<Eigen::VectorXd> hidden;
    Eigen::VectorXd h = est.reset_state();
    for (const auto& x : ep.inputs) {
      hidden.push_back(h);
      est.estimate(x, h);
    }
    std::vector<bool> starts(ep.inputs.size(), false);
    if (!starts.empty()) starts[0] = true;
    append_windows(out, ep.inputs, ep.labels, hidden, starts, est.config().window);
  }
  return out;
}

/// Per-joint detection counts of thresholded estimates against labels.
struct DetectionStats {
  std::vector<long> tp, fp, fn;
  explicit DetectionStats(int joints = 0) : tp(joints, 0), fp(joints, 0), fn(joints, 0) {}
  void add(const Eigen::VectorXd& status, const Eigen::VectorXd& label) {
    for (std::size_t j = 0; j < tp.size(); ++j) {
      const bool s = status[1 + j] > 0.5, l = label[1 + j] > 0.5;
      tp[j] += s && l;
      fp[j] += s && !l;
      fn[j] += !s && l;
    }
  }
  double precision(int j) const { return tp[j] + fp[j] ? static_cast<double>(tp[j]) / (tp[j] + fp[j]) : 1.0; }
  double recall(int j) const { return tp[j] + fn[j] ? static_cast<double>(tp[j]) / (tp[j] + fn[j]) : 1.0; }
};

}  // namespace tolebi::estimator
