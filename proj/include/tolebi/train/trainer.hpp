// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/errors.hpp"
#include "tolebi/core/rng.hpp"
#include "tolebi/estimator/estimator.hpp"
#include "tolebi/nn/adam.hpp"
#include "tolebi/nn/checkpoint.hpp"
#include "tolebi/reward/reward.hpp"
#include "tolebi/sim/robot_model.hpp"
#include "tolebi/train/biped_env.hpp"
#include "tolebi/train/config.hpp"
#include "tolebi/train/curriculum.hpp"
#include "tolebi/train/ppo.hpp"
#include "tolebi/train/rollout.hpp"

namespace tolebi::train {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct IterationMetrics {
  int iteration = 0;
  Stage stage = Stage::Nominal;
  long episodes = 0;
  double mean_return = 0.0;  // NaN when no episode finished
  double mean_length = 0.0;  // s, NaN when no episode finished
  double smoothed_length = 0.0;
  double fall_rate = 0.0;
  double mean_step_reward = 0.0;
  double estimator_loss = 0.0;
  double learning_rate = 0.0;
  PpoDiagnostics ppo;
  std::array<double, reward::kTermCount> term_means{};

  static std::string csv_header() {
    std::string h =
        "iteration,stage,episodes,mean_return,mean_length,smoothed_length,fall_rate,mean_step_reward,estimator_bce,"
        "learning_rate,policy_loss,value_loss,mean_ratio,clip_fraction,approx_kl";
    for (const char* n : reward::kTermNames) h += std::string(",reward_") + n;
    return h;
  }
  std::string csv_row() const {
    std::string r = std::to_string(iteration) + "," + to_string(stage) + "," + std::to_string(episodes);
    for (double v : {mean_return, mean_length, smoothed_length, fall_rate, mean_step_reward, estimator_loss,
                     learning_rate, ppo.policy_loss, ppo.value_loss, ppo.mean_ratio, ppo.clip_fraction, ppo.approx_kl})
      r += "," + fmt17(v);
    for (double v : term_means) r += "," + fmt17(v);
    return r;
  }
};

inline constexpr const char* kBundleKind = "tolebi-policy";

/// Networks plus everything needed to rebuild them, read back from a
/// checkpoint for evaluation.
struct PolicyBundle {
  TrainConfig config;
  ActorCritic policy;
  estimator::StatusEstimator estimator;
  int iteration = 0;
  Stage stage = Stage::Nominal;
};

inline ActorCritic make_policy(const TrainConfig& cfg, const sim::RobotModel& model) {
  const int obs = ObservationLayout::planar(model.joint_count()).total() * cfg.policy.history;
  return ActorCritic(obs, cfg.policy.hidden, BipedEnv::action_scale(model, cfg.max_modulation),
                     BipedEnv::action_sigma(model, cfg.policy));
}

inline PolicyBundle load_bundle(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  const nn::Checkpoint ck = nn::Checkpoint::load(path);
  if (ck.header.value("kind", "") != kBundleKind) throw IoError("not a policy checkpoint: " + path.string());
  YAML::Node tree;
  try {
    tree = YAML::Load(ck.header.at("config").get<std::string>());
  } catch (const std::exception& e) {
    throw IoError("checkpoint config snapshot unreadable: " + std::string(e.what()));
  }
  for (const auto& o : overrides) apply_override(tree, o);
  PolicyBundle b;
  b.config = parse_config(tree);
  const sim::RobotModel model = sim::RobotModel::planar_biped();
  b.policy = make_policy(b.config, model);
  b.estimator = estimator::StatusEstimator(model.joint_count(), b.config.estimator);
  auto load_params = [&](const char* name, Eigen::VectorXd& dst) {
    const Eigen::VectorXd& src = ck.array(name);
    check_dim(name, dst.size(), src.size());
    dst = src;
  };
  load_params("actor", b.policy.actor().params());
  load_params("critic", b.policy.critic().params());
  load_params("estimator", b.estimator.gru().params());
  b.iteration = ck.header.value("iteration", 0);
  b.stage = static_cast<Stage>(ck.header.value("stage", 0));
  return b;
}

inline std::string config_text(const TrainConfig& cfg) {
  YAML::Emitter out;
  out << cfg.tree;
  return out.c_str();
}

class Trainer {
 public:
  using Progress = std::function<void(const IterationMetrics&)>;

  Trainer(TrainConfig cfg, std::filesystem::path run_dir)
      : cfg_(std::move(cfg)),
        dir_(std::move(run_dir)),
        model_(sim::RobotModel::planar_biped()),
        estimator_(model_.joint_count(), cfg_.estimator),
        policy_(make_policy(cfg_, model_)),
        collector_(cfg_.seed, cfg_.num_envs),
        ppo_rng_(cfg_.seed, 2),
        est_rng_(cfg_.seed, 3) {
    const Stage start = cfg_.ablation.curriculum ? Stage::Nominal : Stage::FaultsAndPush;
    controller_ = CurriculumController({cfg_.curriculum.threshold_fault, cfg_.curriculum.threshold_push},
                                       cfg_.curriculum.smoothing, start);
    RngStream init(cfg_.seed, 1);
    policy_.init(init, cfg_.policy.init_output_scale);
    estimator_.init(init);
    for (int e = 0; e < cfg_.num_envs; ++e) {
      auto env = std::make_unique<BipedEnv>(cfg_, model_, &estimator_, cfg_.seed, e, start);
      biped_.push_back(env.get());
      envs_.push_back(std::move(env));
    }
    apply_stage();
  }

  const TrainConfig& config() const { return cfg_; }
  const std::filesystem::path& run_dir() const { return dir_; }
  int iteration() const { return iteration_; }
  Stage stage() const { return controller_.stage(); }
  ActorCritic& policy() { return policy_; }
  estimator::StatusEstimator& estimator() { return estimator_; }
  const std::vector<IterationMetrics>& history() const { return history_; }

  std::filesystem::path metrics_path() const { return dir_ / "metrics.csv"; }
  std::filesystem::path checkpoint_path(int it) const {
    char name[32];
    std::snprintf(name, sizeof name, "ckpt_%06d.bin", it);
    return dir_ / "checkpoints" / name;
  }
  std::filesystem::path latest_path() const { return dir_ / "checkpoints" / "latest.bin"; }

  /// One rollout / estimator update / curriculum tick / PPO update.
  IterationMetrics run_iteration() {
    const double lr =
        nn::LinearDecay{cfg_.ppo.lr_start, cfg_.ppo.lr_end, std::max(1, cfg_.ppo.iterations - 1)}(iteration_);
    RolloutStats stats;
    RolloutBatch batch =
        collector_.collect(envs_, policy_, cfg_.ppo.steps_per_env, cfg_.ppo.gamma, cfg_.ppo.lambda, stats, cfg_.ppo.workers);

    std::vector<estimator::Window> windows;
    std::array<double, reward::kTermCount> sums{};
    long steps = 0;
    for (BipedEnv* env : biped_) {
      auto w = env->take_windows(cfg_.estimator.window);
      windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
      const auto [s, n] = env->take_term_sums();
      for (int k = 0; k < reward::kTermCount; ++k) sums[k] += s[k];
      steps += n;
    }
    IterationMetrics m;
    m.iteration = iteration_;
    m.estimator_loss = estimator_.update(windows, est_rng_);

    const Stage before = controller_.stage();
    if (cfg_.ablation.curriculum) controller_.update(stats.mean_length());
    if (controller_.stage() != before) apply_stage();

    PpoSettings ps;
    ps.clip = cfg_.ppo.clip;
    ps.epochs = cfg_.ppo.epochs;
    ps.minibatch = cfg_.ppo.minibatch;
    ps.max_grad_norm = cfg_.ppo.max_grad_norm;
    ps.entropy_coef = cfg_.ppo.entropy_coef;
    m.ppo = ppo_update(policy_, batch, ps, lr, ppo_rng_);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.stage = controller_.stage();
    m.episodes = stats.episodes;
    m.mean_return = stats.mean_return().value_or(nan);
    m.mean_length = stats.mean_length().value_or(nan);
    m.smoothed_length = controller_.smoothed_length();
    m.fall_rate = stats.episodes ? static_cast<double>(stats.falls) / static_cast<double>(stats.episodes) : 0.0;
    m.mean_step_reward = batch.size() ? batch.rewards.mean() : 0.0;
    m.learning_rate = lr;
    for (int k = 0; k < reward::kTermCount; ++k) m.term_means[k] = steps ? sums[k] / static_cast<double>(steps) : 0.0;
    ++iteration_;
    history_.push_back(m);
    return m;
  }

  /// Trains until `until` iterations are done (default: the configured
  /// count), appending to metrics.csv and checkpointing periodically.
  void run(int until = -1, const Progress& progress = {}) {
    if (until < 0) until = cfg_.ppo.iterations;
    std::filesystem::create_directories(dir_ / "checkpoints");
    write_snapshot(cfg_, dir_ / "config.yaml");
    const bool fresh = iteration_ == 0 || !std::filesystem::exists(metrics_path());
    std::ofstream csv(metrics_path(), fresh ? std::ios::trunc : std::ios::app);
    if (!csv) throw IoError("cannot write metrics: " + metrics_path().string());
    if (fresh) csv << IterationMetrics::csv_header() << '\n';
    std::ofstream episodes;
    if (cfg_.episode_log) episodes.open(dir_ / "episodes.jsonl", fresh ? std::ios::trunc : std::ios::app);
    while (iteration_ < until) {
      IterationMetrics m;
      try {
        m = run_iteration();
      } catch (const NumericalDivergence& e) {
        std::ofstream dump(dir_ / "divergence.txt");
        dump << "iteration " << iteration_ << "\nstage " << to_string(controller_.stage()) << "\n" << e.what() << '\n';
        throw;
      }
      csv << m.csv_row() << '\n';
      csv.flush();
      if (episodes.is_open()) {
        nlohmann::json j{{"iteration", m.iteration}, {"stage", to_string(m.stage)}, {"episodes", m.episodes},
                         {"mean_length", m.mean_length}, {"fall_rate", m.fall_rate}};
        episodes << j.dump() << '\n';
      }
      if (progress) progress(m);
      const bool periodic = cfg_.checkpoint_every > 0 && iteration_ % cfg_.checkpoint_every == 0;
      if (periodic || iteration_ == until) {
        const nn::Checkpoint ck = checkpoint();
        if (periodic) ck.save(checkpoint_path(iteration_));
        ck.save(latest_path());
      }
    }
  }

  nn::Checkpoint checkpoint() const {
    nn::Checkpoint ck;
    ck.header = {{"kind", kBundleKind},
                 {"iteration", iteration_},
                 {"stage", static_cast<int>(controller_.stage())},
                 {"seed", cfg_.seed},
                 {"run_name", cfg_.run_name},
                 {"joints", model_.joint_names()},
                 {"observation_size", policy_.observation_size()},
                 {"action_size", policy_.action_size()},
                 {"config", config_text(cfg_)}};
    ck.arrays["actor"] = policy_.actor().params();
    ck.arrays["critic"] = policy_.critic().params();
    ck.arrays["estimator"] = estimator_.gru().params();
    BinaryWriter w;
    policy_.save(w);
    estimator_.save(w);
    controller_.save(w);
    collector_.save(w);
    w.put_string(ppo_rng_.serialize());
    w.put_string(est_rng_.serialize());
    w.put_u64(envs_.size());
    for (const auto& env : envs_) env->save(w);
    ck.state = w.bytes();
    return ck;
  }

  /// Restores a checkpoint written by a trainer with the same config.
  void restore(const nn::Checkpoint& ck) {
    if (ck.header.value("kind", "") != kBundleKind) throw IoError("not a training checkpoint");
    auto load_params = [&](const char* name, Eigen::VectorXd& dst) {
      const Eigen::VectorXd& src = ck.array(name);
      check_dim(name, dst.size(), src.size());
      dst = src;
    };
    load_params("actor", policy_.actor().params());
    load_params("critic", policy_.critic().params());
    load_params("estimator", estimator_.gru().params());
    BinaryReader r(ck.state);
    policy_.load(r);
    estimator_.load(r);
    controller_.load(r);
    collector_.load(r);
    ppo_rng_.deserialize(r.get_string());
    est_rng_.deserialize(r.get_string());
    if (r.get_u64() != envs_.size()) throw IoError("checkpoint environment count does not match the config");
    for (auto& env : envs_) env->load(r);
    if (!r.done()) throw IoError("trailing bytes in checkpoint state");
    iteration_ = ck.header.at("iteration").get<int>();
    apply_stage();
  }

 private:
  void apply_stage() {
    const Stage s = controller_.stage();
    const reward::RewardWeights w = effective_weights(cfg_, controller_.fault_rewards());
    for (BipedEnv* env : biped_) {
      env->set_stage(s);
      env->set_reward_weights(w);
    }
  }

  TrainConfig cfg_;
  std::filesystem::path dir_;
  sim::RobotModel model_;
  estimator::StatusEstimator estimator_;
  ActorCritic policy_;
  std::vector<std::unique_ptr<Environment>> envs_;
  std::vector<BipedEnv*> biped_;
  RolloutCollector collector_;
  CurriculumController controller_;
  RngStream ppo_rng_, est_rng_;
  int iteration_ = 0;
  std::vector<IterationMetrics> history_;
};

}  // namespace tolebi::train
