// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/errors.hpp"
#include "tolebi/eval/metrics.hpp"
#include "tolebi/fault/fault.hpp"
#include "tolebi/sim/robot_model.hpp"
#include "tolebi/train/biped_env.hpp"
#include "tolebi/train/trainer.hpp"

namespace tolebi::eval {

struct EvalScenario {
  std::string name;
  fault::FaultScenario fault;
  double command_vx = 0.3;
  int episodes = 1;
  std::uint64_t seed = 1;
};

/// One control step of an evaluated episode.
struct TraceStep {
  double t = 0.0;
  double vx = 0.0, vx_cmd = 0.0, pitch_rate = 0.0;
  double fz_left = 0.0, fz_right = 0.0, fz_ref_left = 0.0, fz_ref_right = 0.0;
  double modulation = 0.0;
  bool fault_active = false;
  Eigen::VectorXd probability, status, label;
};

struct EpisodeResult {
  double survival = 0.0;  // s
  bool success = false;
  TrackingTrace linear, angular;
  std::vector<TraceStep> trace;  // only for traced episodes
};

struct ScenarioResult {
  std::string name;
  std::string fault_type;
  std::string joint;
  int episodes = 0;
  double success_rate = 0.0;
  double mean_survival = 0.0;
  double lin_rmse = 0.0, lin_mbe = 0.0;
  double ang_rmse = 0.0, ang_mbe = 0.0;
};

struct EvalReport {
  std::vector<ScenarioResult> rows;
  std::vector<std::pair<std::string, std::vector<TraceStep>>> traces;  // (scenario/episode label, steps)
};

/// success = survival >= success_time, as a rate over the scenario's episodes.
inline double success_rate(const std::vector<double>& survival, double success_time) {
  if (survival.empty()) return 0.0;
  long ok = 0;
  for (double s : survival) ok += s >= success_time - 1e-9;
  return static_cast<double>(ok) / static_cast<double>(survival.size());
}

/// Default grid: healthy plus every fault type on every joint.
inline std::vector<EvalScenario> scenario_grid(const std::vector<std::string>& joint_names,
                                               const train::EvalConfig& cfg, std::uint64_t seed) {
  std::vector<std::string> names = cfg.scenarios;
  if (names.empty()) names = fault::scenario_names(joint_names);
  std::vector<EvalScenario> out;
  for (const auto& n : names) {
    auto sc = fault::parse_scenario(n, joint_names, cfg.onset);
    if (!sc) {
      std::string valid;
      for (const auto& v : fault::scenario_names(joint_names)) valid += (valid.empty() ? "" : ", ") + v;
      throw ConfigError("unknown scenario '" + n + "'; valid names: " + valid);
    }
    out.push_back({n, *sc, cfg.command_vx, cfg.episodes, seed});
  }
  return out;
}

/// Runs one episode of a pinned scenario with the deterministic policy
/// (Gaussian mean). Episode k of every scenario shares the same dynamics
/// draw, so scenarios are compared on paired episodes.
inline EpisodeResult run_episode(const train::PolicyBundle& bundle, const EvalScenario& sc, int episode, bool traced) {
  train::TrainConfig cfg = bundle.config;
  cfg.horizon = cfg.eval.horizon;
  train::EpisodeOverrides ov;
  ov.scenario = sc.fault;
  ov.command_vx = sc.command_vx;
  ov.pushes = false;
  const sim::RobotModel model = sim::RobotModel::planar_biped();
  train::BipedEnv env(cfg, model, &bundle.estimator, sc.seed, episode, train::Stage::FaultsEnabled, ov);
  EpisodeResult r;
  const double onset = sc.fault.healthy() ? 0.0 : sc.fault.onset;
  while (true) {
    const Eigen::VectorXd a = bundle.policy.mean(env.observation());
    const train::Transition tr = env.step(a);
    const train::StepInfo& info = env.last_step();
    const bool counted = !cfg.eval.post_onset_only || info.time >= onset;
    if (counted) {
      r.linear.add(info.vx, info.vx_cmd);
      r.angular.add(info.pitch_rate, 0.0);
    }
    if (traced) {
      TraceStep t;
      t.t = info.time;
      t.vx = info.vx;
      t.vx_cmd = info.vx_cmd;
      t.pitch_rate = info.pitch_rate;
      t.fz_left = info.fz[0];
      t.fz_right = info.fz[1];
      t.fz_ref_left = info.fz_ref[0];
      t.fz_ref_right = info.fz_ref[1];
      t.modulation = info.modulation;
      t.fault_active = info.fault_active;
      t.probability = info.probability;
      t.status = info.status;
      t.label = info.label;
      r.trace.push_back(std::move(t));
    }
    if (tr.done) {
      r.survival = tr.episode_length;
      break;
    }
  }
  r.success = r.survival >= cfg.eval.success_time - 1e-9;
  return r;
}

/// Aggregates episode results of one scenario; tracking metrics pool all
/// counted steps of all episodes.
inline ScenarioResult summarize(const EvalScenario& sc, const std::vector<EpisodeResult>& eps,
                                const std::vector<std::string>& joint_names, double success_time) {
  ScenarioResult row;
  row.name = sc.name;
  row.fault_type = fault::to_string(sc.fault.type);
  row.joint = sc.fault.healthy() ? "none" : joint_names.at(sc.fault.joint);
  row.episodes = static_cast<int>(eps.size());
  std::vector<double> survival;
  TrackingTrace lin, ang;
  for (const auto& e : eps) {
    survival.push_back(e.survival);
    lin.append(e.linear);
    ang.append(e.angular);
  }
  row.success_rate = success_rate(survival, success_time);
  double total = 0.0;
  for (double s : survival) total += s;
  row.mean_survival = survival.empty() ? 0.0 : total / static_cast<double>(survival.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const TrackingMetrics l = lin.empty() ? TrackingMetrics{nan, nan} : lin.metrics();
  const TrackingMetrics a = ang.empty() ? TrackingMetrics{nan, nan} : ang.metrics();
  row.lin_rmse = l.rmse;
  row.lin_mbe = l.mbe;
  row.ang_rmse = a.rmse;
  row.ang_mbe = a.mbe;
  return row;
}

inline EvalReport run_success_eval(const train::PolicyBundle& bundle, const std::vector<EvalScenario>& scenarios) {
  const auto joint_names = sim::RobotModel::planar_biped().joint_names();
  EvalReport report;
  for (const EvalScenario& sc : scenarios) {
    const int traced = bundle.config.eval.trace_episodes;
    std::vector<EpisodeResult> eps(sc.episodes);
    train::parallel_for(sc.episodes, bundle.config.eval.workers,
                        [&](int k) { eps[k] = run_episode(bundle, sc, k, k < traced); });
    for (int k = 0; k < std::min(traced, sc.episodes); ++k)
      report.traces.emplace_back(sc.name + "/" + std::to_string(k), std::move(eps[k].trace));
    report.rows.push_back(summarize(sc, eps, joint_names, bundle.config.eval.success_time));
  }
  return report;
}

/// Mean of each tracking column over the fault scenarios (healthy excluded).
inline ScenarioResult fault_average(const EvalReport& report, const std::string& only_type = "") {
  ScenarioResult avg;
  avg.name = only_type.empty() ? "fault_average" : only_type + "_average";
  avg.fault_type = only_type.empty() ? "all" : only_type;
  avg.joint = "all";
  int n = 0;
  for (const auto& r : report.rows) {
    if (r.fault_type == "healthy" || (!only_type.empty() && r.fault_type != only_type)) continue;
    ++n;
    avg.episodes += r.episodes;
    avg.success_rate += r.success_rate;
    avg.mean_survival += r.mean_survival;
    avg.lin_rmse += r.lin_rmse;
    avg.lin_mbe += r.lin_mbe;
    avg.ang_rmse += r.ang_rmse;
    avg.ang_mbe += r.ang_mbe;
  }
  if (n == 0) return avg;
  for (double* v : {&avg.success_rate, &avg.mean_survival, &avg.lin_rmse, &avg.lin_mbe, &avg.ang_rmse, &avg.ang_mbe})
    *v /= n;
  return avg;
}

}  // namespace tolebi::eval
