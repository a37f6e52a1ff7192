// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/rng.hpp"
#include "tolebi/estimator/estimator.hpp"
#include "tolebi/fault/fault.hpp"
#include "tolebi/gait/gait.hpp"
#include "tolebi/reward/reward.hpp"
#include "tolebi/sim/dynamics.hpp"
#include "tolebi/train/config.hpp"
#include "tolebi/train/curriculum.hpp"
#include "tolebi/train/observation.hpp"
#include "tolebi/train/randomization.hpp"
#include "tolebi/train/rollout.hpp"

namespace tolebi::train {

/// Reward weights for the current curriculum phase with ablations applied.
inline reward::RewardWeights effective_weights(const TrainConfig& cfg, bool fault_phase) {
  reward::RewardWeights w = fault_phase ? cfg.reward_fault : cfg.reward_nominal;
  if (!cfg.ablation.fallibility_rewards) {
    w[reward::kTrajectoryMimic] = 0.0;
    w[reward::kContactForceTracking] = 0.0;
    w[reward::kTermination] = 0.0;
  }
  return w;
}

/// Pins parts of the episode draw; used by evaluation.
struct EpisodeOverrides {
  std::optional<fault::FaultScenario> scenario;
  std::optional<double> command_vx;
  bool randomize = true;
  bool pushes = true;
  bool noise = true;
};

/// What happened in the most recent control step.
struct StepInfo {
  double time = 0.0;
  double vx = 0.0, vx_cmd = 0.0;
  double pitch_rate = 0.0;
  std::array<double, 2> fz{0.0, 0.0}, fz_ref{0.0, 0.0};
  double phase = 0.0, modulation = 0.0;
  double push = 0.0;
  Eigen::VectorXd probability, status, label;
  Eigen::VectorXd applied_torque;
  bool fault_active = false;
};

class BipedEnv final : public Environment {
 public:
  BipedEnv(const TrainConfig& cfg, sim::RobotModel base, const estimator::StatusEstimator* est, std::uint64_t seed,
           int index, Stage stage = Stage::Nominal, EpisodeOverrides overrides = {})
      : cfg_(cfg),
        base_(std::move(base)),
        est_(est),
        rng_(seed, 100 + static_cast<std::uint64_t>(index)),
        stage_(stage),
        overrides_(std::move(overrides)),
        joints_(base_.joint_count()),
        layout_(ObservationLayout::planar(joints_)),
        history_(layout_.total(), cfg.policy.history, cfg.policy.stride),
        standing_height_(sim::nominal_height(base_)),
        weights_(effective_weights(cfg, faults_enabled(stage))) {
    base_.validate();
    if (!est_) throw ConfigError("biped env needs a status estimator");
    reset();
  }

  int observation_size() const override { return history_.output_size(); }
  int action_size() const override { return joints_ + 1; }
  Eigen::VectorXd observation() const override { return history_.stacked(); }

  int joints() const { return joints_; }
  const ObservationLayout& layout() const { return layout_; }
  const HistoryBuffer& history() const { return history_; }
  const sim::SimState& state() const { return s_; }
  const sim::RobotModel& model() const { return model_; }
  const fault::FaultScenario& scenario() const { return injector_.scenario(); }
  const StepInfo& last_step() const { return info_; }
  double command_vx() const { return vx_cmd_; }
  double phase() const { return phase_.phase; }
  const Eigen::VectorXd& status() const { return status_; }
  const Eigen::VectorXd& latest_observation() const { return obs_; }

  /// Takes effect at the next episode.
  void set_stage(Stage s) { stage_ = s; }
  Stage stage() const { return stage_; }
  void set_reward_weights(const reward::RewardWeights& w) { weights_ = w; }

  /// Action scale and sigma: torque limit per joint, then phase modulation.
  static Eigen::VectorXd action_scale(const sim::RobotModel& m, double max_modulation) {
    Eigen::VectorXd s(m.joint_count() + 1);
    s << m.torque_limit, max_modulation;
    return s;
  }
  static Eigen::VectorXd action_sigma(const sim::RobotModel& m, const PolicyConfig& p) {
    Eigen::VectorXd s(m.joint_count() + 1);
    s << p.sigma_fraction * m.torque_limit, p.phase_sigma;
    return s;
  }

  Transition step(const Eigen::VectorXd& action) override {
    check_dim("biped action", joints_ + 1, action.size());
    const Eigen::VectorXd command = action.head(joints_);
    const double modulation = cfg_.ablation.phase_modulation ? action[joints_] : 0.0;
    Eigen::VectorXd applied_sum = Eigen::VectorXd::Zero(joints_);
    double push = 0.0;
    for (int i = 0; i < cfg_.substeps; ++i) {
      const Eigen::VectorXd delayed = delay_.push(command);
      injector_.latch(s_.q, s_.time);
      const Eigen::VectorXd masked = injector_.apply(delayed, s_.q, s_.qd, model_, s_.time);
      applied_sum += sim::clamp_torques(masked, model_);
      sim::StepOptions opt;
      push = push_.force(s_.time, rng_);
      opt.push_force = sim::Vec2(push, 0.0);
      s_ = sim::step(s_, masked, model_, cfg_.terrain, cfg_.sim_dt, opt);
    }
    const Eigen::VectorXd applied = applied_sum / cfg_.substeps;
    const double dt = cfg_.control_dt();
    phase_ = gait::advance_phase(phase_, dt, modulation, cfg_.max_modulation);
    ++steps_;

    const bool fell = sim::check_termination(s_, model_, cfg_.terrain, cfg_.termination, standing_height_) ==
                      sim::TerminationFlag::Terminated;
    const gait::ReferenceSample ref = reference_.reference_at(phase_.phase);
    reward::RewardInputs in;
    in.v_cmd = Eigen::Vector2d(vx_cmd_, 0.0);
    in.v_base = Eigen::Vector2d(s_.base_vel.x(), 0.0);
    in.w_base = s_.pitch_rate;
    in.contact = reward::contact_pattern(s_.fz_left, s_.fz_right, weight_, cfg_.contact_fraction);
    in.scheduled = gait::support_phase(phase_.phase, cfg_.schedule);
    in.pitch = s_.pitch;
    in.tau = applied;
    in.tau_prev = tau_prev_;
    in.qd = s_.qd;
    in.qdd = reward::joint_acceleration(s_.qd, prev_qd_, dt);
    in.fz = {s_.fz_left, s_.fz_right};
    in.fz_prev = fz_prev_;
    in.weight = weight_;
    in.q = s_.q;
    in.q_ref = ref.q;
    in.fz_ref = {ref.fz_left, ref.fz_right};
    in.terminated = fell;
    const reward::RewardBreakdown rb = reward::total_reward(in, weights_);
    for (int k = 0; k < reward::kTermCount; ++k) term_sums_[k] += rb.weighted[k];
    ++term_steps_;

    info_.time = s_.time;
    info_.vx = s_.base_vel.x();
    info_.vx_cmd = vx_cmd_;
    info_.pitch_rate = s_.pitch_rate;
    info_.fz = in.fz;
    info_.fz_ref = in.fz_ref;
    info_.phase = phase_.phase;
    info_.modulation = modulation;
    info_.push = push;
    info_.applied_torque = applied;
    info_.fault_active = injector_.scenario().active(s_.time);

    tau_prev_ = applied;
    fz_prev_ = in.fz;
    prev_qd_for_features_ = prev_qd_;
    prev_qd_ = s_.qd;
    prev_command_ = command;
    ret_ += rb.total;

    Transition tr;
    tr.reward = rb.total;
    const bool timeout = steps_ >= horizon_steps();
    if (fell || timeout) {
      tr.done = true;
      tr.terminal = fell;
      tr.episode_return = ret_;
      tr.episode_length = steps_ * dt;
      last_episode_fell_ = fell;
      last_episode_length_ = tr.episode_length;
      if (!fell) {
        observe();
        tr.final_observation = history_.stacked();
      }
      reset();
    } else {
      observe();
    }
    return tr;
  }

  int horizon_steps() const { return static_cast<int>(std::lround(cfg_.horizon / cfg_.control_dt())); }
  bool last_episode_fell() const { return last_episode_fell_; }
  double last_episode_length() const { return last_episode_length_; }

  /// Estimator inputs and labels recorded since the last call, cut into
  /// training windows.
  std::vector<estimator::Window> take_windows(int window) {
    std::vector<estimator::Window> out;
    estimator::append_windows(out, rec_inputs_, rec_labels_, rec_hidden_, rec_start_, window);
    clear_record();
    return out;
  }

  /// Weighted per-term reward sums and the step count since the last call.
  std::pair<std::array<double, reward::kTermCount>, long> take_term_sums() {
    auto out = std::make_pair(term_sums_, term_steps_);
    term_sums_.fill(0.0);
    term_steps_ = 0;
    return out;
  }

  void reset() {
    const bool randomize = cfg_.randomization.enabled && overrides_.randomize;
    draw_ = randomize ? sample_randomization(base_, cfg_.randomization, rng_) : RandomizationDraw::identity(base_);
    rebuild_model();
    vx_cmd_ = overrides_.command_vx ? *overrides_.command_vx : rng_.uniform(cfg_.command_vx[0], cfg_.command_vx[1]);
    fault::FaultScenario sc;
    if (overrides_.scenario)
      sc = *overrides_.scenario;
    else if (faults_enabled(stage_) && cfg_.ablation.fault_training)
      sc = fault::sample_scenario(rng_, joints_, cfg_.fault, cfg_.horizon);
    injector_ = fault::FaultInjector(sc);
    push_ = PushSchedule(cfg_.randomization, pushes_enabled(stage_) && overrides_.pushes, rng_);
    delay_ = DelayLine(joints_, draw_.delay, cfg_.sim_dt);

    s_ = sim::standing_state(model_, cfg_.terrain, model_.nominal_pose);
    phase_ = {0.0, cfg_.gait_period};
    prev_qd_ = Eigen::VectorXd::Zero(joints_);
    prev_qd_for_features_ = prev_qd_;
    prev_command_ = Eigen::VectorXd::Zero(joints_);
    tau_prev_ = Eigen::VectorXd::Zero(joints_);
    fz_prev_ = {s_.fz_left, s_.fz_right};
    h_ = est_->reset_state();
    history_.reset();
    steps_ = 0;
    ret_ = 0.0;
    episode_start_ = true;
    observe();
  }

  void save(BinaryWriter& w) const override {
    w.put_string(rng_.serialize());
    w.put_i64(static_cast<int>(stage_));
    for (double v : weights_.w) w.put_f64(v);
    draw_.save(w);
    w.put_f64(vx_cmd_);
    injector_.save(w);
    push_.save(w);
    delay_.save(w);
    s_.save(w);
    w.put_f64(phase_.phase);
    w.put_f64(phase_.period);
    for (const auto* v : {&prev_qd_, &prev_qd_for_features_, &prev_command_, &tau_prev_, &h_, &status_, &obs_})
      w.put_vector(*v);
    w.put_f64(fz_prev_[0]);
    w.put_f64(fz_prev_[1]);
    history_.save(w);
    w.put_i64(steps_);
    w.put_f64(ret_);
    w.put_bool(episode_start_);
    w.put_u64(rec_inputs_.size());
    for (std::size_t i = 0; i < rec_inputs_.size(); ++i) {
      w.put_vector(rec_inputs_[i]);
      w.put_vector(rec_labels_[i]);
      w.put_vector(rec_hidden_[i]);
      w.put_bool(rec_start_[i]);
    }
    for (double v : term_sums_) w.put_f64(v);
    w.put_i64(term_steps_);
  }

  void load(BinaryReader& r) override {
    rng_.deserialize(r.get_string());
    stage_ = static_cast<Stage>(r.get_i64());
    for (double& v : weights_.w) v = r.get_f64();
    draw_.load(r);
    rebuild_model();
    vx_cmd_ = r.get_f64();
    injector_.load(r);
    push_.load(r);
    delay_.load(r);
    s_.load(r);
    phase_.phase = r.get_f64();
    phase_.period = r.get_f64();
    for (auto* v : {&prev_qd_, &prev_qd_for_features_, &prev_command_, &tau_prev_, &h_, &status_, &obs_})
      *v = r.get_vector();
    fz_prev_[0] = r.get_f64();
    fz_prev_[1] = r.get_f64();
    history_.load(r);
    steps_ = static_cast<int>(r.get_i64());
    ret_ = r.get_f64();
    episode_start_ = r.get_bool();
    clear_record();
    const auto n = r.get_u64();
    for (std::uint64_t i = 0; i < n; ++i) {
      rec_inputs_.push_back(r.get_vector());
      rec_labels_.push_back(r.get_vector());
      rec_hidden_.push_back(r.get_vector());
      rec_start_.push_back(r.get_bool());
    }
    for (double& v : term_sums_) v = r.get_f64();
    term_steps_ = r.get_i64();
  }

 private:
  void rebuild_model() {
    model_ = apply_randomization(base_, draw_);
    weight_ = model_.weight();
    reference_ = gait::GaitReference(cfg_.schedule, cfg_.reference, weight_);
  }

  /// Runs the estimator on the current state and pushes the observation.
  void observe() {
    const Eigen::VectorXd x =
        estimator::features(s_, gait::phase_encoding(phase_.phase), prev_qd_for_features_, prev_command_, model_);
    const Eigen::VectorXd label = injector_.label(s_.time, joints_);
    rec_inputs_.push_back(x);
    rec_labels_.push_back(label);
    rec_hidden_.push_back(h_);
    rec_start_.push_back(episode_start_);
    episode_start_ = false;
    const estimator::StatusEstimate e = est_->estimate(x, h_);
    status_ = e.status;
    info_.probability = e.probability;
    info_.status = e.status;
    info_.label = label;

    Eigen::Vector3d v(s_.base_vel.x(), s_.base_vel.y(), s_.pitch_rate);
    if (cfg_.randomization.enabled && overrides_.noise) {
      v[0] += rng_.uniform(-cfg_.randomization.noise_linear, cfg_.randomization.noise_linear);
      v[1] += rng_.uniform(-cfg_.randomization.noise_linear, cfg_.randomization.noise_linear);
      v[2] += rng_.uniform(-cfg_.randomization.noise_angular, cfg_.randomization.noise_angular);
    }
    const Eigen::VectorXd shown =
        cfg_.ablation.status_observation ? status_ : Eigen::VectorXd::Zero(joints_ + 1).eval();
    obs_ = assemble_observation(s_, gait::phase_encoding(phase_.phase), Eigen::Vector3d(vx_cmd_, 0.0, 0.0), v, shown,
                                cfg_.qd_scale);
    history_.push(obs_);
  }

  void clear_record() {
    rec_inputs_.clear();
    rec_labels_.clear();
    rec_hidden_.clear();
    rec_start_.clear();
  }

  TrainConfig cfg_;
  sim::RobotModel base_;
  const estimator::StatusEstimator* est_;
  RngStream rng_;
  Stage stage_;
  EpisodeOverrides overrides_;
  int joints_;
  ObservationLayout layout_;
  HistoryBuffer history_;
  double standing_height_;
  reward::RewardWeights weights_;

  RandomizationDraw draw_;
  sim::RobotModel model_;
  double weight_ = 1.0;
  gait::GaitReference reference_{gait::GaitSchedule{}, gait::ReferenceParams{}, 1.0};
  double vx_cmd_ = 0.0;
  fault::FaultInjector injector_;
  PushSchedule push_;
  DelayLine delay_;

  sim::SimState s_;
  gait::PhaseState phase_;
  Eigen::VectorXd prev_qd_, prev_qd_for_features_, prev_command_, tau_prev_, h_, status_, obs_;
  std::array<double, 2> fz_prev_{0.0, 0.0};
  int steps_ = 0;
  double ret_ = 0.0;
  bool episode_start_ = true;
  bool last_episode_fell_ = false;
  double last_episode_length_ = 0.0;
  StepInfo info_;

  std::vector<Eigen::VectorXd> rec_inputs_, rec_labels_, rec_hidden_;
  std::vector<bool> rec_start_;
  std::array<double, reward::kTermCount> term_sums_{};
  long term_steps_ = 0;
};

}  // namespace tolebi::train
