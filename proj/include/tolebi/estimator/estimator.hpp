// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/errors.hpp"
#include "tolebi/core/rng.hpp"
#include "tolebi/nn/adam.hpp"
#include "tolebi/nn/gru.hpp"
#include "tolebi/sim/robot_model.hpp"
#include "tolebi/sim/state.hpp"

namespace tolebi::estimator {

struct EstimatorConfig {
  int hidden = 128;
  double threshold = 0.7;
  int window = 16;          // truncated-BPTT length, control steps
  double learning_rate = 1e-4;
  int minibatch = 32;       // windows per optimizer step
  double max_grad_norm = 1.0;
};

/// Pitch, q, scaled qd, phase encoding, per-step change of qd, previous
/// commanded torques over limit.
inline int feature_size(int joints) { return 1 + 3 * joints + 2 + joints; }

inline Eigen::VectorXd features(const sim::SimState& s, const Eigen::Vector2d& phase_encoding,
                                const Eigen::VectorXd& prev_qd, const Eigen::VectorXd& prev_command,
                                const sim::RobotModel& model) {
  const long J = model.joint_count();
  check_dim("estimator previous qd", J, prev_qd.size());
  check_dim("estimator previous command", J, prev_command.size());
  Eigen::VectorXd f(feature_size(static_cast<int>(J)));
  f << s.pitch, s.q, 0.1 * s.qd, phase_encoding, s.qd - prev_qd, prev_command.cwiseQuotient(model.torque_limit);
  return f;
}

/// s_k = 1 iff p_k > threshold.
inline Eigen::VectorXd threshold_status(const Eigen::VectorXd& p, double threshold) {
  return (p.array() > threshold).cast<double>().matrix();
}

struct StatusEstimate {
  Eigen::VectorXd probability;
  Eigen::VectorXd status;
};

struct BceResult {
  double loss = 0.0;
  Eigen::VectorXd grad_logits;
};

/// Mean binary cross-entropy over the J+1 outputs; p is clamped to
/// [1e-7, 1 - 1e-7] for the loss only.
inline BceResult bce_loss_and_grad(const Eigen::VectorXd& p, const Eigen::VectorXd& label) {
  check_dim("bce label", p.size(), label.size());
  const double n = static_cast<double>(p.size());
  const Eigen::ArrayXd c = p.array().max(1e-7).min(1.0 - 1e-7);
  const double loss = -(label.array() * c.log() + (1.0 - label.array()) * (1.0 - c).log()).sum() / n;
  return {loss, (p - label) / n};
}

/// One labeled stretch of a single environment's rollout, no longer than the
/// BPTT window and never crossing an episode boundary.
struct Window {
  Eigen::VectorXd h0;
  std::vector<Eigen::VectorXd> inputs;
  std::vector<Eigen::VectorXd> labels;
};

/// Splits one environment's step sequence into windows. `hidden[t]` is the
/// estimator state before step t; `episode_start[t]` marks a reset.
inline void append_windows(std::vector<Window>& out, const std::vector<Eigen::VectorXd>& inputs,
                           const std::vector<Eigen::VectorXd>& labels, const std::vector<Eigen::VectorXd>& hidden,
                           const std::vector<bool>& episode_start, int window) {
  const std::size_t n = inputs.size();
  std::size_t t = 0;
  while (t < n) {
    Window w;
    w.h0 = hidden[t];
    do {
      w.inputs.push_back(inputs[t]);
      w.labels.push_back(labels[t]);
      ++t;
    } while (t < n && !episode_start[t] && static_cast<int>(w.inputs.size()) < window);
    out.push_back(std::move(w));
  }
}

class StatusEstimator {
 public:
  StatusEstimator() = default;
  StatusEstimator(int joints, EstimatorConfig cfg)
      : cfg_(cfg), joints_(joints), gru_(feature_size(joints), cfg.hidden, joints + 1), adam_(gru_.param_count()) {
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) throw ConfigError("estimator.threshold must be in (0,1)");
    if (cfg.window < 1) throw ConfigError("estimator.window must be >= 1");
    if (cfg.minibatch < 1) throw ConfigError("estimator.minibatch must be >= 1");
  }

  void init(RngStream& rng) { gru_.init(rng); }

  const EstimatorConfig& config() const { return cfg_; }
  int joints() const { return joints_; }
  nn::Gru& gru() { return gru_; }
  const nn::Gru& gru() const { return gru_; }
  nn::Adam& optimizer() { return adam_; }

  Eigen::VectorXd reset_state() const { return gru_.zero_state(); }

  /// Probabilities for a batch of environments (columns); advances hidden.
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& inputs, Eigen::MatrixXd& hidden) const {
    return nn::sigmoid(gru_.step_batch(inputs, hidden));
  }

  StatusEstimate estimate(const Eigen::VectorXd& input, Eigen::VectorXd& hidden) const {
    Eigen::MatrixXd h = hidden;
    Eigen::VectorXd p = probabilities(input, h);
    hidden = h;
    return {p, threshold_status(p, cfg_.threshold)};
  }

  /// Mean per-step BCE of the windows, starting each from its stored state.
  double evaluate(const std::vector<Window>& windows) const {
    double total = 0.0;
    long steps = 0;
    for (const Window& w : windows) {
      Eigen::VectorXd h = w.h0;
      for (std::size_t t = 0; t < w.inputs.size(); ++t) {
        const Eigen::VectorXd p = nn::sigmoid(gru_.step(w.inputs[t], h));
        total += bce_loss_and_grad(p, w.labels[t]).loss;
        ++steps;
      }
    }
    return steps ? total / static_cast<double>(steps) : 0.0;
  }

  /// One shuffled pass over the windows, one Adam step per minibatch.
  /// Returns the mean training loss (0 for an empty batch).
  double update(const std::vector<Window>& windows, RngStream& rng) {
    if (windows.empty()) return 0.0;
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0.0;
    long steps = 0;
    const int F = gru_.input_size(), H = gru_.hidden_size(), O = gru_.output_size();
    for (std::size_t start = 0; start < order.size(); start += cfg_.minibatch) {
      const std::size_t end = std::min(order.size(), start + cfg_.minibatch);
      const long B = static_cast<long>(end - start);
      std::size_t T = 0;
      long valid = 0;
      for (std::size_t k = start; k < end; ++k) {
        T = std::max(T, windows[order[k]].inputs.size());
        valid += static_cast<long>(windows[order[k]].inputs.size());
      }
      Eigen::MatrixXd h(H, B);
      for (long b = 0; b < B; ++b) h.col(b) = windows[order[start + b]].h0;
      std::vector<nn::Gru::StepCache> caches(T);
      std::vector<Eigen::MatrixXd> dlogits(T, Eigen::MatrixXd::Zero(O, B));
      for (std::size_t t = 0; t < T; ++t) {
        // Shorter windows are zero-padded at the end; their padded steps get
        // no loss, so no gradient flows from them.
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(F, B);
        for (long b = 0; b < B; ++b) {
          const Window& w = windows[order[start + b]];
          if (t < w.inputs.size()) x.col(b) = w.inputs[t];
        }
        const Eigen::MatrixXd p = nn::sigmoid(gru_.step_batch(x, h, &caches[t]));
        for (long b = 0; b < B; ++b) {
          const Window& w = windows[order[start + b]];
          if (t >= w.inputs.size()) continue;
          const BceResult r = bce_loss_and_grad(p.col(b), w.labels[t]);
          total += r.loss;
          dlogits[t].col(b) = r.grad_logits / static_cast<double>(valid);
        }
      }
      steps += valid;
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(gru_.param_count());
      gru_.backward_sequence(caches, dlogits, grad);
      nn::clip_grad_norm(grad, cfg_.max_grad_norm);
      adam_.step(gru_.params(), grad, cfg_.learning_rate);
    }
    return total / static_cast<double>(steps);
  }

  void save(BinaryWriter& w) const { adam_.save(w); }
  void load(BinaryReader& r) { adam_.load(r); }

 private:
  EstimatorConfig cfg_;
  int joints_ = 0;
  nn::Gru gru_;
  nn::Adam adam_;
};

}  // namespace tolebi::estimator
