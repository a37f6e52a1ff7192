// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/rng.hpp"
#include "tolebi/nn/adam.hpp"
#include "tolebi/train/rollout.hpp"

namespace tolebi::train {

/// Torque-driven point-mass pendulum; theta = 0 is upright. Episodes start
/// at a uniformly random angle and last a fixed number of steps.
struct PendulumConfig {
  double mass = 1.0;        // kg
  double length = 0.5;      // m
  double torque_limit = 6.0;  // N m
  double dt = 0.05;         // s
  int substeps = 5;
  int horizon = 100;        // steps
  double gravity = 9.81;
  double max_speed = 12.0;  // rad/s
};

class PendulumEnv final : public Environment {
 public:
  PendulumEnv(PendulumConfig cfg, std::uint64_t seed, std::uint64_t stream) : cfg_(cfg), rng_(seed, stream) { reset(); }

  static double reward_of(double theta) { return std::exp(-theta * theta / 0.5); }

  int observation_size() const override { return 3; }
  int action_size() const override { return 1; }
  const PendulumConfig& config() const { return cfg_; }
  double theta() const { return theta_; }

  Eigen::VectorXd observation() const override {
    return Eigen::Vector3d(std::cos(theta_), std::sin(theta_), 0.1 * omega_);
  }

  Transition step(const Eigen::VectorXd& action) override {
    const double u = std::clamp(action[0], -cfg_.torque_limit, cfg_.torque_limit);
    const double ml2 = cfg_.mass * cfg_.length * cfg_.length;
    const double h = cfg_.dt / cfg_.substeps;
    for (int i = 0; i < cfg_.substeps; ++i) {
      const double acc = (cfg_.mass * cfg_.gravity * cfg_.length * std::sin(theta_) + u) / ml2;
      omega_ = std::clamp(omega_ + h * acc, -cfg_.max_speed, cfg_.max_speed);
      theta_ = std::remainder(theta_ + h * omega_, 2.0 * std::numbers::pi);
    }
    Transition tr;
    tr.reward = reward_of(theta_);
    ret_ += tr.reward;
    if (++t_ >= cfg_.horizon) {
      tr.done = true;
      tr.final_observation = observation();
      tr.episode_return = ret_;
      tr.episode_length = t_ * cfg_.dt;
      reset();
    }
    return tr;
  }

  void reset() {
    theta_ = rng_.uniform(-std::numbers::pi, std::numbers::pi);
    omega_ = 0.0;
    t_ = 0;
    ret_ = 0.0;
  }

  void save(BinaryWriter& w) const override {
    w.put_string(rng_.serialize());
    w.put_f64(theta_);
    w.put_f64(omega_);
    w.put_i64(t_);
    w.put_f64(ret_);
  }
  void load(BinaryReader& r) override {
    rng_.deserialize(r.get_string());
    theta_ = r.get_f64();
    omega_ = r.get_f64();
    t_ = static_cast<int>(r.get_i64());
    ret_ = r.get_f64();
  }

 private:
  PendulumConfig cfg_;
  RngStream rng_;
  double theta_ = 0.0, omega_ = 0.0;
  int t_ = 0;
  double ret_ = 0.0;
};

struct PendulumTraining {
  int iterations = 300;
  int envs = 8;
  int steps_per_env = 200;
  std::vector<int> hidden{32, 32};
  double sigma = 1.5;  // N m
  double lr_start = 1e-3, lr_end = 3e-4;
  double gamma = 0.95, lambda = 0.95;
  PpoSettings ppo{0.2, 8, 64, 1.0, 0.0, true};
  std::uint64_t seed = 1;
};

/// Mean episode return of a controller over fresh episodes (streams 5000+k).
inline double pendulum_mean_return(const std::function<double(const PendulumEnv&)>& controller, int episodes,
                                   std::uint64_t seed, const PendulumConfig& cfg = {}) {
  double total = 0.0;
  for (int k = 0; k < episodes; ++k) {
    PendulumEnv env(cfg, seed, 5000 + static_cast<std::uint64_t>(k));
    while (true) {
      const Transition tr = env.step(Eigen::VectorXd::Constant(1, controller(env)));
      if (tr.done) {
        total += tr.episode_return;
        break;
      }
    }
  }
  return total / episodes;
}

/// Uniform random torques within the limit.
inline double pendulum_random_return(int episodes, std::uint64_t seed, const PendulumConfig& cfg = {}) {
  RngStream rng(seed, 7);
  return pendulum_mean_return([&](const PendulumEnv&) { return rng.uniform(-cfg.torque_limit, cfg.torque_limit); },
                              episodes, seed, cfg);
}

/// Plain PPO on the pendulum; returns the trained actor-critic.
inline ActorCritic train_pendulum(const PendulumTraining& s, const std::function<void(int, double)>& progress = {},
                                  const PendulumConfig& cfg = {}) {
  ActorCritic ac(3, s.hidden, Eigen::VectorXd::Constant(1, cfg.torque_limit), Eigen::VectorXd::Constant(1, s.sigma));
  RngStream init(s.seed, 1), ppo_rng(s.seed, 2);
  ac.init(init, 0.1);
  std::vector<std::unique_ptr<Environment>> envs;
  for (int e = 0; e < s.envs; ++e) envs.push_back(std::make_unique<PendulumEnv>(cfg, s.seed, 100 + e));
  RolloutCollector collector(s.seed, s.envs);
  const nn::LinearDecay lr{s.lr_start, s.lr_end, s.iterations};
  for (int it = 0; it < s.iterations; ++it) {
    RolloutStats stats;
    const RolloutBatch batch = collector.collect(envs, ac, s.steps_per_env, s.gamma, s.lambda, stats);
    ppo_update(ac, batch, s.ppo, lr(it), ppo_rng);
    if (progress) progress(it, stats.mean_return().value_or(std::nan("")));
  }
  return ac;
}

}  // namespace tolebi::train
