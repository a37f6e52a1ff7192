// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/errors.hpp"
#include "tolebi/core/rng.hpp"

namespace tolebi::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMatrixMap = Eigen::Map<const MatrixXd>;
using ConstVectorMap = Eigen::Map<const VectorXd>;
using MatrixMap = Eigen::Map<MatrixXd>;
using VectorMap = Eigen::Map<VectorXd>;

/// U(-s, s) with s = scale / sqrt(fan_in), biases zero.
inline void fan_in_uniform(RngStream& rng, double* w, long rows, long cols, double scale) {
  const double s = scale / std::sqrt(static_cast<double>(cols));
  for (long i = 0; i < rows * cols; ++i) w[i] = rng.uniform(-s, s);
}

/// Fully connected network, ReLU on hidden layers, linear output. Parameters
/// are one flat vector: for each layer the weight matrix (out x in,
/// column-major) followed by the bias.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ConfigError("mlp needs at least input and output sizes");
    for (int s : sizes_)
      if (s < 1) throw ConfigError("mlp layer sizes must be >= 1");
    long n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(n);
      n += static_cast<long>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_ = VectorXd::Zero(n);
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int layers() const { return static_cast<int>(sizes_.size()) - 1; }
  long param_count() const { return params_.size(); }
  VectorXd& params() { return params_; }
  const VectorXd& params() const { return params_; }

  void init(RngStream& rng, double output_scale = 1.0) {
    params_.setZero();
    for (int l = 0; l < layers(); ++l)
      fan_in_uniform(rng, params_.data() + offsets_[l], sizes_[l + 1], sizes_[l],
                     l + 1 == layers() ? output_scale : 1.0);
  }

  ConstMatrixMap weight(int l) const { return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]}; }
  ConstVectorMap bias(int l) const {
    return {params_.data() + offsets_[l] + static_cast<long>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
  }

  /// Layer inputs kept for the backward pass; acts[l] is the input of layer l.
  struct Cache {
    std::vector<MatrixXd> acts;
  };

  /// Columns are samples.
  MatrixXd forward_batch(const MatrixXd& x, Cache* cache = nullptr) const {
    check_dim("mlp input", input_size(), x.rows());
    if (cache) cache->acts.assign(1, x);
    MatrixXd a = x;
    for (int l = 0; l < layers(); ++l) {
      MatrixXd z = weight(l) * a;
      z.colwise() += bias(l);
      if (l + 1 < layers()) z = z.cwiseMax(0.0);
      a = std::move(z);
      if (cache && l + 1 < layers()) cache->acts.push_back(a);
    }
    return a;
  }

  VectorXd forward(const VectorXd& x) const { return forward_batch(x); }

  /// Adds dL/dparams into grad and returns dL/dx.
  MatrixXd backward_batch(const Cache& cache, const MatrixXd& dy, VectorXd& grad) const {
    check_dim("mlp upstream gradient", output_size(), dy.rows());
    check_dim("mlp gradient buffer", param_count(), grad.size());
    MatrixXd delta = dy;
    for (int l = layers() - 1; l >= 0; --l) {
      const MatrixXd& in = cache.acts[l];
      MatrixMap gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
      VectorMap gb(grad.data() + offsets_[l] + static_cast<long>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]);
      gw.noalias() += delta * in.transpose();
      gb += delta.rowwise().sum();
      MatrixXd back = weight(l).transpose() * delta;
      // ReLU derivative, zero at zero; the layer input is the post-activation.
      if (l > 0) back = back.cwiseProduct((in.array() > 0.0).cast<double>().matrix());
      delta = std::move(back);
    }
    return delta;
  }

 private:
  std::vector<int> sizes_;
  std::vector<long> offsets_;
  VectorXd params_;
};

}  // namespace tolebi::nn
