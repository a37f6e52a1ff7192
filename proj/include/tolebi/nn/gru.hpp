// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Core>

#include "tolebi/core/errors.hpp"
#include "tolebi/core/rng.hpp"
#include "tolebi/nn/mlp.hpp"

namespace tolebi::nn {

inline MatrixXd sigmoid(const MatrixXd& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

/// Single-layer GRU with a linear readout. Gate order [reset, update, new]:
///   r = sig(W_ir x + b_ir + W_hr h + b_hr)
///   z = sig(W_iz x + b_iz + W_hz h + b_hz)
///   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
///   h' = (1 - z) * n + z * h,   logits = W_o h' + b_o
/// Flat parameter layout: W_ih (3H x I), W_hh (3H x H), b_ih, b_hh, W_o (O x H), b_o.
class Gru {
 public:
  Gru() = default;
  Gru(int input, int hidden, int output) : in_(input), h_(hidden), out_(output) {
    if (input < 1 || hidden < 1 || output < 1) throw ConfigError("gru sizes must be >= 1");
    params_ = VectorXd::Zero(param_count());
  }

  int input_size() const { return in_; }
  int hidden_size() const { return h_; }
  int output_size() const { return out_; }
  long param_count() const { return 3L * h_ * (in_ + h_ + 2) + static_cast<long>(out_) * (h_ + 1); }
  VectorXd& params() { return params_; }
  const VectorXd& params() const { return params_; }

  void init(RngStream& rng) {
    params_.setZero();
    fan_in_uniform(rng, params_.data() + off_wih(), 3L * h_, in_, 1.0);
    fan_in_uniform(rng, params_.data() + off_whh(), 3L * h_, h_, 1.0);
    fan_in_uniform(rng, params_.data() + off_wo(), out_, h_, 1.0);
  }

  VectorXd zero_state() const { return VectorXd::Zero(h_); }

  /// Batched step: columns are sequences.
  struct StepCache {
    MatrixXd x, h_prev, r, z, n, hn, h;
  };

  /// Advances h in place and returns the logits.
  MatrixXd step_batch(const MatrixXd& x, MatrixXd& h, StepCache* cache = nullptr) const {
    check_dim("gru input", in_, x.rows());
    check_dim("gru hidden", h_, h.rows());
    MatrixXd gi = wih() * x;
    gi.colwise() += bih();
    MatrixXd gh = whh() * h;
    gh.colwise() += bhh();
    const MatrixXd r = sigmoid(gi.topRows(h_) + gh.topRows(h_));
    const MatrixXd z = sigmoid(gi.middleRows(h_, h_) + gh.middleRows(h_, h_));
    const MatrixXd hn = gh.bottomRows(h_);
    const MatrixXd n = (gi.bottomRows(h_) + r.cwiseProduct(hn)).array().tanh().matrix();
    MatrixXd next = (1.0 - z.array()) * n.array() + z.array() * h.array();
    if (cache) *cache = {x, h, r, z, n, hn, next};
    h = std::move(next);
    MatrixXd logits = wo() * h;
    logits.colwise() += bo();
    return logits;
  }

  VectorXd step(const VectorXd& x, VectorXd& h) const {
    MatrixXd hm = h;
    VectorXd out = step_batch(x, hm);
    h = hm;
    return out;
  }

  /// Truncated BPTT over one window: dlogits[t] is dL/dlogits at step t.
  /// The gradient does not flow into the window's initial hidden state.
  void backward_sequence(const std::vector<StepCache>& caches, const std::vector<MatrixXd>& dlogits,
                         VectorXd& grad) const {
    check_dim("gru gradient buffer", param_count(), grad.size());
    if (caches.size() != dlogits.size()) throw DimensionMismatch("gru bptt steps", caches.size(), dlogits.size());
    MatrixMap g_wih(grad.data() + off_wih(), 3L * h_, in_);
    MatrixMap g_whh(grad.data() + off_whh(), 3L * h_, h_);
    VectorMap g_bih(grad.data() + off_bih(), 3L * h_);
    VectorMap g_bhh(grad.data() + off_bhh(), 3L * h_);
    MatrixMap g_wo(grad.data() + off_wo(), out_, h_);
    VectorMap g_bo(grad.data() + off_bo(), out_);
    MatrixXd dh_next;
    for (std::size_t k = caches.size(); k-- > 0;) {
      const StepCache& c = caches[k];
      const MatrixXd& dl = dlogits[k];
      g_wo.noalias() += dl * c.h.transpose();
      g_bo += dl.rowwise().sum();
      MatrixXd dh = wo().transpose() * dl;
      if (dh_next.size()) dh += dh_next;

      const auto one = 1.0 - c.z.array();
      const MatrixXd dn = (dh.array() * one).matrix();
      const MatrixXd dz = (dh.array() * (c.h_prev.array() - c.n.array())).matrix();
      const MatrixXd dn_pre = (dn.array() * (1.0 - c.n.array().square())).matrix();
      const MatrixXd dz_pre = (dz.array() * c.z.array() * one).matrix();
      const MatrixXd dr = (dn_pre.array() * c.hn.array()).matrix();
      const MatrixXd dr_pre = (dr.array() * c.r.array() * (1.0 - c.r.array())).matrix();

      MatrixXd dgi(3 * h_, dl.cols()), dgh(3 * h_, dl.cols());
      dgi << dr_pre, dz_pre, dn_pre;
      dgh << dr_pre, dz_pre, (dn_pre.array() * c.r.array()).matrix();

      g_wih.noalias() += dgi * c.x.transpose();
      g_whh.noalias() += dgh * c.h_prev.transpose();
      g_bih += dgi.rowwise().sum();
      g_bhh += dgh.rowwise().sum();
      dh_next = whh().transpose() * dgh + (dh.array() * c.z.array()).matrix();
    }
  }

 private:
  long off_wih() const { return 0; }
  long off_whh() const { return 3L * h_ * in_; }
  long off_bih() const { return off_whh() + 3L * h_ * h_; }
  long off_bhh() const { return off_bih() + 3L * h_; }
  long off_wo() const { return off_bhh() + 3L * h_; }
  long off_bo() const { return off_wo() + static_cast<long>(out_) * h_; }

  ConstMatrixMap wih() const { return {params_.data() + off_wih(), 3L * h_, in_}; }
  ConstMatrixMap whh() const { return {params_.data() + off_whh(), 3L * h_, h_}; }
  ConstVectorMap bih() const { return {params_.data() + off_bih(), 3L * h_}; }
  ConstVectorMap bhh() const { return {params_.data() + off_bhh(), 3L * h_}; }
  ConstMatrixMap wo() const { return {params_.data() + off_wo(), out_, h_}; }
  ConstVectorMap bo() const { return {params_.data() + off_bo(), out_}; }

  int in_ = 0, h_ = 0, out_ = 0;
  VectorXd params_;
};

}  // namespace tolebi::nn
