// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/errors.hpp"
#include "tolebi/core/rng.hpp"
#include "tolebi/nn/adam.hpp"
#include "tolebi/nn/gaussian.hpp"
#include "tolebi/nn/mlp.hpp"
#include "tolebi/train/gae.hpp"

namespace tolebi::train {

inline std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

/// Gaussian actor with fixed sigma and an MLP critic. The action mean is
/// scale * actor output, so a small output-layer init starts near zero.
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(int obs_size, const std::vector<int>& hidden, Eigen::VectorXd action_scale, Eigen::VectorXd sigma)
      : actor_(layer_sizes(obs_size, hidden, static_cast<int>(action_scale.size()))),
        critic_(layer_sizes(obs_size, hidden, 1)),
        scale_(std::move(action_scale)),
        head_(std::move(sigma)),
        actor_opt_(actor_.param_count()),
        critic_opt_(critic_.param_count()) {
    check_dim("policy sigma", scale_.size(), head_.size());
  }

  void init(RngStream& rng, double output_scale) {
    actor_.init(rng, output_scale);
    critic_.init(rng, 1.0);
  }

  int observation_size() const { return actor_.input_size(); }
  int action_size() const { return actor_.output_size(); }
  nn::Mlp& actor() { return actor_; }
  nn::Mlp& critic() { return critic_; }
  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& critic() const { return critic_; }
  const nn::GaussianHead& head() const { return head_; }
  const Eigen::VectorXd& action_scale() const { return scale_; }
  nn::Adam& actor_optimizer() { return actor_opt_; }
  nn::Adam& critic_optimizer() { return critic_opt_; }

  /// Columns are samples.
  Eigen::MatrixXd mean_batch(const Eigen::MatrixXd& obs, nn::Mlp::Cache* cache = nullptr) const {
    return scale_.asDiagonal() * actor_.forward_batch(obs, cache);
  }
  Eigen::VectorXd mean(const Eigen::VectorXd& obs) const { return mean_batch(obs); }
  Eigen::VectorXd value_batch(const Eigen::MatrixXd& obs, nn::Mlp::Cache* cache = nullptr) const {
    return critic_.forward_batch(obs, cache).row(0).transpose();
  }
  double value(const Eigen::VectorXd& obs) const { return value_batch(obs)[0]; }

  void save(BinaryWriter& w) const {
    actor_opt_.save(w);
    critic_opt_.save(w);
  }
  void load(BinaryReader& r) {
    actor_opt_.load(r);
    critic_opt_.load(r);
  }

 private:
  nn::Mlp actor_, critic_;
  Eigen::VectorXd scale_;
  nn::GaussianHead head_;
  nn::Adam actor_opt_, critic_opt_;
};

/// Samples are columns / entries in the same order everywhere.
struct RolloutBatch {
  Eigen::MatrixXd observations;
  Eigen::MatrixXd actions;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  Eigen::VectorXd next_values;
  Eigen::Array<bool, -1, 1> done;
  Eigen::Array<bool, -1, 1> terminal;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  long size() const { return rewards.size(); }
};

struct PpoSettings {
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 128;
  double max_grad_norm = 1.0;
  double entropy_coef = 0.0;
  bool normalize_advantages = true;
};

struct PpoDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double entropy = 0.0;
  long minibatches = 0;
};

/// min(r A, clip(r, 1-eps, 1+eps) A).
inline double clipped_surrogate(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

/// d surrogate / d log pi: r A when the unclipped branch is the minimum,
/// otherwise zero.
inline double surrogate_grad_logp(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
  return ratio * advantage <= clipped ? ratio * advantage : 0.0;
}

/// Clipped-surrogate actor step and squared-error critic step per minibatch.
/// The entropy of a fixed-sigma Gaussian does not depend on the parameters,
/// so entropy_coef only shows up in the reported loss.
inline PpoDiagnostics ppo_update(ActorCritic& ac, const RolloutBatch& batch, const PpoSettings& s, double lr,
                                 RngStream& rng) {
  const long N = batch.size();
  PpoDiagnostics d;
  if (N == 0) return d;
  const Eigen::VectorXd adv = s.normalize_advantages ? normalize_advantages(batch.advantages) : batch.advantages;
  std::vector<long> order(N);
  std::iota(order.begin(), order.end(), 0L);
  const long mb = std::max<long>(1, s.minibatch);
  double ratio_sum = 0.0, kl_sum = 0.0;
  long clipped = 0, seen = 0;
  for (int epoch = 0; epoch < s.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (long start = 0; start < N; start += mb) {
      const long B = std::min(mb, N - start);
      Eigen::MatrixXd obs(batch.observations.rows(), B), act(batch.actions.rows(), B);
      Eigen::VectorXd old_lp(B), a(B), ret(B);
      for (long b = 0; b < B; ++b) {
        const long i = order[start + b];
        obs.col(b) = batch.observations.col(i);
        act.col(b) = batch.actions.col(i);
        old_lp[b] = batch.log_probs[i];
        a[b] = adv[i];
        ret[b] = batch.returns[i];
      }

      nn::Mlp::Cache acache, ccache;
      const Eigen::MatrixXd mean = ac.mean_batch(obs, &acache);
      const Eigen::VectorXd lp = ac.head().log_prob_batch(mean, act);
      const Eigen::VectorXd v = ac.value_batch(obs, &ccache);

      double pl = 0.0;
      Eigen::VectorXd dlp(B);
      for (long b = 0; b < B; ++b) {
        const double r = std::exp(lp[b] - old_lp[b]);
        pl -= clipped_surrogate(r, a[b], s.clip) / static_cast<double>(B);
        dlp[b] = -surrogate_grad_logp(r, a[b], s.clip) / static_cast<double>(B);
        ratio_sum += r;
        kl_sum += old_lp[b] - lp[b];
        clipped += std::abs(r - 1.0) > s.clip;
      }
      seen += B;
      const Eigen::VectorXd verr = v - ret;
      const double vl = 0.5 * verr.squaredNorm() / static_cast<double>(B);
      if (!std::isfinite(pl) || !std::isfinite(vl))
        throw NumericalDivergence("ppo loss is not finite (policy " + std::to_string(pl) + ", value " +
                                  std::to_string(vl) + ")");

      Eigen::MatrixXd dmean = ac.head().grad_mean_batch(mean, act) * dlp.asDiagonal();
      Eigen::MatrixXd dout = ac.action_scale().asDiagonal() * dmean;
      Eigen::VectorXd ga = Eigen::VectorXd::Zero(ac.actor().param_count());
      ac.actor().backward_batch(acache, dout, ga);
      Eigen::VectorXd gc = Eigen::VectorXd::Zero(ac.critic().param_count());
      ac.critic().backward_batch(ccache, (verr / static_cast<double>(B)).transpose(), gc);
      if (!ga.allFinite() || !gc.allFinite()) throw NumericalDivergence("ppo gradient is not finite");
      nn::clip_grad_norm(ga, s.max_grad_norm);
      nn::clip_grad_norm(gc, s.max_grad_norm);
      ac.actor_optimizer().step(ac.actor().params(), ga, lr);
      ac.critic_optimizer().step(ac.critic().params(), gc, lr);

      d.policy_loss += pl;
      d.value_loss += vl;
      ++d.minibatches;
    }
  }
  d.entropy = ac.head().entropy();
  d.policy_loss = d.policy_loss / static_cast<double>(d.minibatches) - s.entropy_coef * d.entropy;
  d.value_loss /= static_cast<double>(d.minibatches);
  d.mean_ratio = ratio_sum / static_cast<double>(seen);
  d.clip_fraction = static_cast<double>(clipped) / static_cast<double>(seen);
  d.approx_kl = kl_sum / static_cast<double>(seen);
  return d;
}

}  // namespace tolebi::train
