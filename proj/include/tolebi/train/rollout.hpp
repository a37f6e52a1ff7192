// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/rng.hpp"
#include "tolebi/train/gae.hpp"
#include "tolebi/train/ppo.hpp"

namespace tolebi::train {

struct Transition {
  double reward = 0.0;
  bool done = false;      // episode ended after this step (the env has already reset)
  bool terminal = false;  // ended by a fall rather than the time limit
  Eigen::VectorXd final_observation;  // pre-reset policy input when done
  double episode_return = 0.0;        // valid when done
  double episode_length = 0.0;        // s, valid when done
};

/// An environment that resets itself at episode end.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_size() const = 0;
  virtual int action_size() const = 0;
  virtual Eigen::VectorXd observation() const = 0;
  virtual Transition step(const Eigen::VectorXd& action) = 0;
  virtual void save(BinaryWriter& w) const = 0;
  virtual void load(BinaryReader& r) = 0;
};

struct RolloutStats {
  long episodes = 0;
  double return_sum = 0.0;
  double length_sum = 0.0;
  long falls = 0;
  std::optional<double> mean_length() const {
    return episodes ? std::optional<double>(length_sum / static_cast<double>(episodes)) : std::nullopt;
  }
  std::optional<double> mean_return() const {
    return episodes ? std::optional<double>(return_sum / static_cast<double>(episodes)) : std::nullopt;
  }
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads; each index touches
/// only its own data, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const int w = std::min(workers, n);
  for (int k = 0; k < w; ++k)
    pool.emplace_back([&, k] {
      for (int i = k; i < n; i += w) fn(i);
    });
  for (auto& t : pool) t.join();
}

/// Steps every environment `steps` times with the stochastic policy and
/// returns a batch ordered env-major (sample = env * steps + t), with
/// advantages and returns filled in.
class RolloutCollector {
 public:
  RolloutCollector() = default;
  RolloutCollector(std::uint64_t seed, int envs) {
    for (int e = 0; e < envs; ++e) action_rng_.emplace_back(seed, 1000 + static_cast<std::uint64_t>(e));
  }

  RolloutBatch collect(std::vector<std::unique_ptr<Environment>>& envs, const ActorCritic& ac, int steps, double gamma,
                       double lambda, RolloutStats& stats, int workers = 1) {
    const int E = static_cast<int>(envs.size());
    const int D = ac.observation_size(), A = ac.action_size();
    const long N = static_cast<long>(E) * steps;
    RolloutBatch b;
    b.observations.resize(D, N);
    b.actions.resize(A, N);
    b.log_probs.resize(N);
    b.rewards.resize(N);
    b.values.resize(N);
    b.next_values.resize(N);
    b.done.resize(N);
    b.terminal.resize(N);
    std::vector<Transition> out(E);
    Eigen::MatrixXd obs(D, E);
    for (int t = 0; t < steps; ++t) {
      for (int e = 0; e < E; ++e) obs.col(e) = envs[e]->observation();
      const Eigen::MatrixXd mean = ac.mean_batch(obs);
      const Eigen::VectorXd values = ac.value_batch(obs);
      Eigen::MatrixXd actions(A, E);
      for (int e = 0; e < E; ++e) {
        actions.col(e) = ac.head().sample(mean.col(e), action_rng_[e]);
        const long i = static_cast<long>(e) * steps + t;
        b.observations.col(i) = obs.col(e);
        b.actions.col(i) = actions.col(e);
        b.log_probs[i] = ac.head().log_prob(mean.col(e), actions.col(e));
        b.values[i] = values[e];
        // After a reset the new episode's first value is not a successor.
        if (t > 0 && !b.done[i - 1]) b.next_values[i - 1] = values[e];
      }
      parallel_for(E, workers, [&](int e) { out[e] = envs[e]->step(actions.col(e)); });
      for (int e = 0; e < E; ++e) {
        const long i = static_cast<long>(e) * steps + t;
        b.rewards[i] = out[e].reward;
        b.done[i] = out[e].done;
        b.terminal[i] = out[e].terminal;
        if (out[e].done) {
          // A timeout bootstraps from the state it was cut off in.
          b.next_values[i] = out[e].terminal ? 0.0 : ac.value(out[e].final_observation);
          ++stats.episodes;
          stats.return_sum += out[e].episode_return;
          stats.length_sum += out[e].episode_length;
          stats.falls += out[e].terminal;
        }
      }
    }
    for (int e = 0; e < E; ++e) obs.col(e) = envs[e]->observation();
    const Eigen::VectorXd last = ac.value_batch(obs);
    for (int e = 0; e < E; ++e) {
      const long i = static_cast<long>(e) * steps + steps - 1;
      if (!b.done[i]) b.next_values[i] = last[e];
    }
    b.advantages.resize(N);
    b.returns.resize(N);
    for (int e = 0; e < E; ++e) {
      const long o = static_cast<long>(e) * steps;
      const AdvantageResult r =
          gae_and_returns(b.rewards.segment(o, steps), b.values.segment(o, steps), b.next_values.segment(o, steps),
                          b.done.segment(o, steps), b.terminal.segment(o, steps), gamma, lambda);
      b.advantages.segment(o, steps) = r.advantages;
      b.returns.segment(o, steps) = r.returns;
    }
    return b;
  }

  void save(BinaryWriter& w) const {
    w.put_u64(action_rng_.size());
    for (const auto& r : action_rng_) w.put_string(r.serialize());
  }
  void load(BinaryReader& r) {
    const auto n = r.get_u64();
    if (n != action_rng_.size()) throw IoError("checkpoint environment count does not match the config");
    for (auto& s : action_rng_) s.deserialize(r.get_string());
  }

 private:
  std::vector<RngStream> action_rng_;
};

}  // namespace tolebi::train
