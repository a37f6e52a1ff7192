// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/errors.hpp"
#include "tolebi/sim/state.hpp"

namespace tolebi::train {

/// Block sizes of one observation: orientation, q, qd, phase, command,
/// base velocity, joint status.
struct ObservationLayout {
  std::array<int, 7> sizes{};

  static ObservationLayout planar(int joints) { return {{1, joints, joints, 2, 3, 3, joints + 1}}; }
  /// Roll/pitch/yaw and a 12-joint robot.
  static ObservationLayout spatial(int joints = 12) { return {{3, joints, joints, 2, 3, 6, joints + 1}}; }

  int total() const {
    int n = 0;
    for (int s : sizes) n += s;
    return n;
  }
  int offset(int block) const {
    int n = 0;
    for (int b = 0; b < block; ++b) n += sizes[b];
    return n;
  }
  static const char* block_name(int block) {
    static constexpr const char* names[7] = {"orientation", "q", "qd", "phase", "command", "base_velocity", "status"};
    return names[block];
  }
};

/// Planar observation. Command is (vx, vy, yaw rate) with the last two zero,
/// base velocity is (vx, vz, pitch rate), qd is multiplied by qd_scale.
inline Eigen::VectorXd assemble_observation(const sim::SimState& s, const Eigen::Vector2d& phase_encoding,
                                            const Eigen::Vector3d& command, const Eigen::Vector3d& base_velocity,
                                            const Eigen::VectorXd& status, double qd_scale) {
  const int J = static_cast<int>(s.q.size());
  check_dim("observation qd", J, s.qd.size());
  check_dim("observation status", J + 1, status.size());
  const ObservationLayout layout = ObservationLayout::planar(J);
  Eigen::VectorXd o(layout.total());
  o << s.pitch, s.q, qd_scale * s.qd, phase_encoding, command, base_velocity, status;
  return o;
}

/// Last (history - 1) * stride + 1 observations; the policy sees every
/// stride-th one, newest first. Slots older than the episode are zero.
class HistoryBuffer {
 public:
  HistoryBuffer() = default;
  HistoryBuffer(int obs_dim, int history, int stride) : dim_(obs_dim), history_(history), stride_(stride) {
    if (obs_dim < 1 || history < 1 || stride < 1) throw ConfigError("history buffer sizes must be >= 1");
    ring_ = Eigen::MatrixXd::Zero(obs_dim, capacity());
  }

  int capacity() const { return (history_ - 1) * stride_ + 1; }
  int obs_dim() const { return dim_; }
  int output_size() const { return dim_ * history_; }
  long pushes() const { return pushes_; }

  void reset() {
    ring_.setZero();
    head_ = 0;
    pushes_ = 0;
  }

  void push(const Eigen::VectorXd& obs) {
    check_dim("history observation", dim_, obs.size());
    head_ = (head_ + 1) % capacity();
    ring_.col(head_) = obs;
    ++pushes_;
  }

  /// Entry of the given age (0 = newest); zero if it predates the episode.
  Eigen::VectorXd at_age(int age) const {
    if (age < 0 || age >= capacity()) throw ConfigError("history age out of range");
    if (age >= pushes_) return Eigen::VectorXd::Zero(dim_);
    return ring_.col((head_ - age + capacity()) % capacity());
  }

  /// Ages that make up the policy input, newest first.
  std::vector<int> selected_ages() const {
    std::vector<int> ages;
    for (int k = 0; k < history_; ++k) ages.push_back(k * stride_);
    return ages;
  }

  Eigen::VectorXd stacked() const {
    Eigen::VectorXd out(output_size());
    int k = 0;
    for (int age : selected_ages()) out.segment(k++ * dim_, dim_) = at_age(age);
    return out;
  }

  void save(BinaryWriter& w) const {
    w.put_matrix(ring_);
    w.put_i64(head_);
    w.put_i64(pushes_);
  }
  void load(BinaryReader& r) {
    ring_ = r.get_matrix();
    head_ = static_cast<int>(r.get_i64());
    pushes_ = r.get_i64();
    check_dim("history buffer rows", dim_, ring_.rows());
    check_dim("history buffer columns", capacity(), ring_.cols());
  }

 private:
  int dim_ = 0, history_ = 1, stride_ = 1;
  Eigen::MatrixXd ring_;
  int head_ = 0;
  long pushes_ = 0;
};

}  // namespace tolebi::train
