// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "tolebi/train/ablation.hpp"
#include "tolebi/train/biped_env.hpp"
#include "tolebi/train/config.hpp"
#include "tolebi/train/curriculum.hpp"
#include "tolebi/train/gae.hpp"
#include "tolebi/train/observation.hpp"
#include "tolebi/train/pendulum.hpp"
#include "tolebi/train/ppo.hpp"
#include "tolebi/train/randomization.hpp"
#include "tolebi/train/rollout.hpp"
#include "tolebi/train/trainer.hpp"

using namespace tolebi;
using namespace tolebi::train;
namespace fs = std::filesystem;

namespace {

const sim::RobotModel kModel = sim::RobotModel::planar_biped();

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tolebi_test_train_" + name);
  fs::remove_all(p);
  return p;
}

// Small, fast trainer settings.
std::vector<std::string> tiny(std::vector<std::string> extra = {}) {
  std::vector<std::string> o{"env.num_envs=2",         "ppo.steps_per_env=24",    "ppo.minibatch=16",
                             "ppo.epochs=2",           "policy.hidden=[16, 16]",  "estimator.hidden=8",
                             "ppo.iterations=4",       "logging.checkpoint_every=2"};
  o.insert(o.end(), extra.begin(), extra.end());
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Eigen::Array<bool, -1, 1> flags(std::initializer_list<int> v) {
  Eigen::Array<bool, -1, 1> a(static_cast<long>(v.size()));
  long i = 0;
  for (int x : v) a[i++] = x != 0;
  return a;
}

}  // namespace

// ---- config ----------------------------------------------------------------

TEST(Config, DefaultsParse) {
  const TrainConfig c = load_config("");
  EXPECT_DOUBLE_EQ(c.control_dt(), 0.004);
  EXPECT_EQ(c.policy.history, 10);
  EXPECT_EQ(c.policy.stride, 2);
  EXPECT_EQ(c.estimator.threshold, 0.7);
  EXPECT_EQ(c.curriculum.threshold_fault, 20.0);
  EXPECT_EQ(c.curriculum.threshold_push, 24.0);
  EXPECT_EQ(c.ppo.clip, 0.2);
  EXPECT_EQ(c.ppo.gamma, 0.99);
  EXPECT_EQ(c.ppo.lambda, 0.95);
  EXPECT_EQ(c.randomization.link_mass[0], 0.6);
  EXPECT_EQ(c.randomization.link_mass[1], 1.4);
}

TEST(Config, OverridesApplyAndUnknownKeysFail) {
  const TrainConfig c = load_config("", {"curriculum.threshold_fault=5", "policy.hidden=[32, 8]"});
  EXPECT_EQ(c.curriculum.threshold_fault, 5.0);
  EXPECT_EQ(c.policy.hidden, (std::vector<int>{32, 8}));
  EXPECT_THROW(load_config("", {"curriculum.treshold_fault=5"}), ConfigError);
  EXPECT_THROW(load_config("", {"nosection.x=1"}), ConfigError);
  EXPECT_THROW(load_config("", {"curriculum=1"}), ConfigError);
  EXPECT_THROW(load_config("", {"justtext"}), ConfigError);
  EXPECT_THROW(load_config("", {"ppo.clip=-1"}), ConfigError);
  EXPECT_THROW(load_config("", {"ppo.epochs=abc"}), ConfigError);
}

TEST(Config, MissingFileNamesPath) {
  try {
    load_config("/nonexistent/dir/cfg.yaml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/cfg.yaml"), std::string::npos);
  }
}

TEST(Config, FileMergesOverDefaultsAndSnapshotRoundTrips) {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "c.yaml");
    os << "run:\n  name: filetest\nenv:\n  num_envs: 3\n";
  }
  const TrainConfig c = load_config((dir / "c.yaml").string(), {"run.seed=9"});
  EXPECT_EQ(c.run_name, "filetest");
  EXPECT_EQ(c.num_envs, 3);
  EXPECT_EQ(c.seed, 9u);
  write_snapshot(c, dir / "snap.yaml");
  const TrainConfig back = load_config((dir / "snap.yaml").string());
  EXPECT_EQ(config_text(back), config_text(c));
  {
    std::ofstream os(dir / "bad.yaml");
    os << "env:\n  num_env: 3\n";
  }
  EXPECT_THROW(load_config((dir / "bad.yaml").string()), ConfigError);
}

// ---- observation -----------------------------------------------------------

TEST(Observation, LayoutSizes) {
  EXPECT_EQ(ObservationLayout::planar(6).total(), 28);
  EXPECT_EQ(ObservationLayout::spatial(12).total(), 51);
  const ObservationLayout l = ObservationLayout::planar(6);
  EXPECT_EQ(l.offset(6), 28 - 7);
}

TEST(Observation, AssembleOrder) {
  sim::SimState s = sim::SimState::zeros(6);
  s.pitch = -0.2;
  s.q = Eigen::VectorXd::Constant(6, 0.5);
  s.qd = Eigen::VectorXd::Constant(6, 3.0);
  Eigen::VectorXd status = Eigen::VectorXd::Zero(7);
  status[0] = status[3] = 1.0;
  const Eigen::VectorXd o =
      assemble_observation(s, Eigen::Vector2d(0.1, 0.2), Eigen::Vector3d(0.4, 0, 0), Eigen::Vector3d(1, 2, 3), status, 0.1);
  ASSERT_EQ(o.size(), 28);
  EXPECT_EQ(o[0], -0.2);
  EXPECT_EQ(o[1], 0.5);
  EXPECT_NEAR(o[7], 0.3, 1e-15);
  EXPECT_EQ(o[13], 0.1);
  EXPECT_EQ(o[15], 0.4);
  EXPECT_EQ(o[18], 1.0);
  EXPECT_EQ(o.tail(7), status);
}

TEST(History, FirstStepPadsWithZeros) {
  HistoryBuffer h(3, 10, 2);
  h.push(Eigen::Vector3d(1, 2, 3));
  const Eigen::VectorXd s = h.stacked();
  ASSERT_EQ(s.size(), 30);
  EXPECT_EQ(s.head(3), Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(s.tail(27).norm(), 0.0);
}

TEST(History, StridedAgesAfterTwentyPushes) {
  HistoryBuffer h(1, 10, 2);
  for (int t = 0; t < 20; ++t) h.push(Eigen::VectorXd::Constant(1, t));
  EXPECT_EQ(h.selected_ages(), (std::vector<int>{0, 2, 4, 6, 8, 10, 12, 14, 16, 18}));
  EXPECT_EQ(h.capacity(), 19);
  const Eigen::VectorXd s = h.stacked();
  // Oracle: entry of age a is the value pushed at step 19 - a.
  for (int k = 0; k < 10; ++k) EXPECT_EQ(s[k], 19 - 2 * k);
  h.reset();
  EXPECT_EQ(h.stacked().norm(), 0.0);
}

TEST(History, SaveLoad) {
  HistoryBuffer a(2, 4, 3);
  for (int t = 0; t < 7; ++t) a.push(Eigen::Vector2d(t, -t));
  BinaryWriter w;
  a.save(w);
  HistoryBuffer b(2, 4, 3);
  BinaryReader r(w.bytes());
  b.load(r);
  EXPECT_EQ(a.stacked(), b.stacked());
}

// ---- curriculum ------------------------------------------------------------

TEST(Curriculum, Transitions) {
  EXPECT_EQ(curriculum_tick(Stage::Nominal, 19.0), Stage::Nominal);
  EXPECT_EQ(curriculum_tick(Stage::Nominal, 20.0), Stage::Nominal);
  EXPECT_EQ(curriculum_tick(Stage::Nominal, 20.5), Stage::FaultsEnabled);
  EXPECT_EQ(curriculum_tick(Stage::FaultsEnabled, 24.1), Stage::FaultsAndPush);
  EXPECT_EQ(curriculum_tick(Stage::FaultsEnabled, 22.0), Stage::FaultsEnabled);
  EXPECT_EQ(curriculum_tick(Stage::Nominal, 30.0), Stage::FaultsEnabled);
  EXPECT_EQ(curriculum_tick(Stage::FaultsAndPush, 0.0), Stage::FaultsAndPush);
  EXPECT_TRUE(pushes_enabled(Stage::FaultsAndPush));
  EXPECT_FALSE(pushes_enabled(Stage::FaultsEnabled));
  EXPECT_THROW(curriculum_tick(Stage::Nominal, 1.0, {5.0, 5.0}), ConfigError);
}

TEST(Curriculum, ControllerIsMonotoneAndSwitchesPreset) {
  CurriculumController c({20.0, 24.0}, 0.5);
  EXPECT_FALSE(c.fault_rewards());
  c.update(std::nullopt);
  EXPECT_EQ(c.smoothed_length(), 0.0);
  c.update(30.0);
  EXPECT_EQ(c.stage(), Stage::FaultsEnabled);
  EXPECT_TRUE(c.fault_rewards());
  c.update(0.0);  // smoothed 15
  EXPECT_EQ(c.stage(), Stage::FaultsEnabled);
  RngStream rng(1, 0);
  Stage prev = c.stage();
  for (int i = 0; i < 1000; ++i) {
    c.update(rng.uniform(0.0, 40.0));
    EXPECT_GE(static_cast<int>(c.stage()), static_cast<int>(prev));
    prev = c.stage();
  }
}

// ---- GAE -------------------------------------------------------------------

TEST(Gae, LambdaZeroIsTdError) {
  const Eigen::VectorXd r = Eigen::Vector4d(1.0, -0.5, 2.0, 0.3);
  const Eigen::VectorXd v = Eigen::Vector4d(0.2, 0.4, -0.1, 0.9);
  const Eigen::VectorXd nv = Eigen::Vector4d(0.4, -0.1, 0.9, 1.5);
  const auto res = gae_and_returns(r, v, nv, flags({0, 0, 0, 0}), flags({0, 0, 0, 0}), 0.97, 0.0);
  for (int t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(res.advantages[t], r[t] + 0.97 * nv[t] - v[t]);
}

TEST(Gae, LambdaOneMatchesDiscountedSum) {
  RngStream rng(3, 0);
  const int T = 12;
  const double g = 0.9;
  Eigen::VectorXd r(T), v(T), nv(T);
  for (int t = 0; t < T; ++t) {
    r[t] = rng.normal();
    v[t] = rng.normal();
  }
  for (int t = 0; t + 1 < T; ++t) nv[t] = v[t + 1];
  nv[T - 1] = 123.0;  // ignored: the episode ends in a fall
  auto done = Eigen::Array<bool, -1, 1>::Constant(T, false).eval();
  done[T - 1] = true;
  const auto res = gae_and_returns(r, v, nv, done, done, g, 1.0);
  for (int t = 0; t < T; ++t) {
    double ret = 0.0;
    for (int k = T - 1; k >= t; --k) ret = r[k] + g * ret;
    EXPECT_NEAR(res.advantages[t], ret - v[t], 1e-12);
    EXPECT_NEAR(res.returns[t], ret, 1e-12);
  }
}

TEST(Gae, ZerosAndEpisodeBoundaries) {
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(5);
  const auto res = gae_and_returns(z, z, z, flags({0, 1, 0, 0, 0}), flags({0, 1, 0, 0, 0}), 0.99, 0.95);
  EXPECT_EQ(res.advantages.norm(), 0.0);
  // Timeout bootstraps from next_value; a fall does not; neither leaks across.
  const Eigen::VectorXd r = Eigen::VectorXd::Ones(3);
  const Eigen::VectorXd nv = Eigen::Vector3d(0.0, 10.0, 0.0);
  const auto timeout = gae_and_returns(r, Eigen::VectorXd::Zero(3), nv, flags({0, 1, 1}), flags({0, 0, 1}), 0.5, 1.0);
  EXPECT_DOUBLE_EQ(timeout.advantages[1], 1.0 + 0.5 * 10.0);
  EXPECT_DOUBLE_EQ(timeout.advantages[2], 1.0);
  EXPECT_DOUBLE_EQ(timeout.advantages[0], 1.0 + 0.5 * 6.0);
  EXPECT_THROW(gae_and_returns(r, z, r, flags({0, 0, 0}), flags({0, 0, 0}), 0.9, 0.9), DimensionMismatch);
}

TEST(Gae, NormalizeAdvantages) {
  const Eigen::VectorXd a = Eigen::Vector4d(1, 2, 3, 4);
  const Eigen::VectorXd n = normalize_advantages(a);
  EXPECT_NEAR(n.mean(), 0.0, 1e-15);
  EXPECT_NEAR(std::sqrt(n.squaredNorm() / 4), 1.0, 1e-7);
  EXPECT_EQ(normalize_advantages(Eigen::VectorXd::Constant(5, 3.0)).norm(), 0.0);
}

// ---- PPO -------------------------------------------------------------------

TEST(Ppo, ClippedSurrogate) {
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, 2.0, 0.2), 1.2 * 2.0);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.1, 2.0, 0.2), 1.1 * 2.0);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, -1.0, 0.2), -1.5);
  EXPECT_EQ(surrogate_grad_logp(1.5, 2.0, 0.2), 0.0);
  EXPECT_DOUBLE_EQ(surrogate_grad_logp(1.5, -1.0, 0.2), -1.5);
  EXPECT_DOUBLE_EQ(surrogate_grad_logp(1.0, 3.0, 0.2), 3.0);
}

namespace {

RolloutBatch random_batch(const ActorCritic& ac, RngStream& rng, long n) {
  RolloutBatch b;
  b.observations.resize(ac.observation_size(), n);
  for (long i = 0; i < b.observations.size(); ++i) b.observations.data()[i] = rng.normal();
  const Eigen::MatrixXd mean = ac.mean_batch(b.observations);
  b.actions.resize(ac.action_size(), n);
  b.log_probs.resize(n);
  for (long i = 0; i < n; ++i) {
    b.actions.col(i) = ac.head().sample(mean.col(i), rng);
    b.log_probs[i] = ac.head().log_prob(mean.col(i), b.actions.col(i));
  }
  b.rewards = Eigen::VectorXd::Zero(n);
  b.values = Eigen::VectorXd::Zero(n);
  b.next_values = Eigen::VectorXd::Zero(n);
  b.done = Eigen::Array<bool, -1, 1>::Constant(n, false);
  b.terminal = b.done;
  b.advantages = Eigen::VectorXd::Zero(n);
  b.returns.resize(n);
  for (long i = 0; i < n; ++i) b.returns[i] = rng.normal();
  return b;
}

ActorCritic small_ac(RngStream& rng) {
  ActorCritic ac(5, {8, 8}, Eigen::Vector2d(2.0, 0.5), Eigen::Vector2d(0.3, 0.1));
  ac.init(rng, 0.5);
  return ac;
}

}  // namespace

TEST(Ppo, ZeroAdvantagesMoveOnlyTheCritic) {
  RngStream rng(4, 0);
  ActorCritic ac = small_ac(rng);
  const RolloutBatch b = random_batch(ac, rng, 64);
  const Eigen::VectorXd actor0 = ac.actor().params(), critic0 = ac.critic().params();
  PpoSettings s;
  s.minibatch = 16;
  const PpoDiagnostics d = ppo_update(ac, b, s, 1e-3, rng);
  EXPECT_EQ((ac.actor().params() - actor0).norm(), 0.0);
  EXPECT_GT((ac.critic().params() - critic0).norm(), 0.0);
  EXPECT_EQ(d.policy_loss, 0.0);
  EXPECT_DOUBLE_EQ(d.mean_ratio, 1.0);
}

TEST(Ppo, PositiveAdvantageRaisesLogProbability) {
  RngStream rng(5, 0);
  ActorCritic ac = small_ac(rng);
  RolloutBatch b = random_batch(ac, rng, 32);
  for (long i = 0; i < b.size(); ++i) b.advantages[i] = i % 2 ? 1.0 : -1.0;
  PpoSettings s;
  s.minibatch = 32;
  s.epochs = 1;
  s.normalize_advantages = false;
  auto score = [&] {
    const Eigen::VectorXd lp = ac.head().log_prob_batch(ac.mean_batch(b.observations), b.actions);
    double v = 0.0;
    for (long i = 0; i < b.size(); ++i) v += b.advantages[i] * lp[i];
    return v;
  };
  const double before = score();
  ppo_update(ac, b, s, 1e-3, rng);
  EXPECT_GT(score(), before);
}

TEST(Ppo, NonFiniteLossThrows) {
  RngStream rng(6, 0);
  ActorCritic ac = small_ac(rng);
  RolloutBatch b = random_batch(ac, rng, 8);
  b.returns[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(ppo_update(ac, b, {}, 1e-3, rng), NumericalDivergence);
}

TEST(Ppo, SaveLoadRestoresOptimizerState) {
  RngStream rng(7, 0);
  ActorCritic a = small_ac(rng);
  RolloutBatch b = random_batch(a, rng, 32);
  for (long i = 0; i < b.size(); ++i) b.advantages[i] = rng.normal();
  ppo_update(a, b, {}, 1e-3, rng);
  BinaryWriter w;
  a.save(w);
  RngStream other(8, 0);
  ActorCritic c = small_ac(other);
  c.actor().params() = a.actor().params();
  c.critic().params() = a.critic().params();
  BinaryReader r(w.bytes());
  c.load(r);
  RngStream ra(9, 0), rc(9, 0);
  ppo_update(a, b, {}, 1e-3, ra);
  ppo_update(c, b, {}, 1e-3, rc);
  EXPECT_EQ(a.actor().params(), c.actor().params());
  EXPECT_EQ(a.critic().params(), c.critic().params());
}

TEST(Rollout, PendulumCollectionIsDeterministic) {
  auto run = [] {
    RngStream init(1, 0);
    ActorCritic ac(3, {16}, Eigen::VectorXd::Constant(1, 6.0), Eigen::VectorXd::Constant(1, 1.0));
    ac.init(init, 0.1);
    std::vector<std::unique_ptr<Environment>> envs;
    for (int e = 0; e < 3; ++e) envs.push_back(std::make_unique<PendulumEnv>(PendulumConfig{}, 1, e));
    RolloutCollector col(1, 3);
    RolloutStats st;
    return col.collect(envs, ac, 150, 0.99, 0.95, st).advantages;
  };
  const Eigen::VectorXd a = run(), b = run();
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);
}

TEST(Rollout, TimeoutBootstrapsFromFinalObservation) {
  PendulumConfig pc;
  pc.horizon = 5;
  RngStream init(2, 0);
  ActorCritic ac(3, {8}, Eigen::VectorXd::Constant(1, 6.0), Eigen::VectorXd::Constant(1, 1.0));
  ac.init(init, 1.0);
  std::vector<std::unique_ptr<Environment>> envs;
  envs.push_back(std::make_unique<PendulumEnv>(pc, 2, 0));
  PendulumEnv shadow(pc, 2, 0);
  RolloutCollector col(2, 1);
  RolloutStats st;
  const RolloutBatch b = col.collect(envs, ac, 12, 0.99, 0.95, st);
  EXPECT_EQ(st.episodes, 2);
  EXPECT_TRUE(b.done[4]);
  EXPECT_FALSE(b.terminal[4]);
  // Replay the same actions on a shadow env to get the pre-reset state.
  Transition tr;
  for (int t = 0; t < 5; ++t) tr = shadow.step(b.actions.col(t));
  ASSERT_TRUE(tr.done);
  EXPECT_DOUBLE_EQ(b.next_values[4], ac.value(tr.final_observation));
  EXPECT_DOUBLE_EQ(b.next_values[3], b.values[4]);
  EXPECT_NE(b.next_values[4], b.values[5]);
}

// ---- randomization ---------------------------------------------------------

TEST(Randomization, MassScaleStatistics) {
  const TrainConfig c = load_config("");
  RngStream rng(10, 0);
  double lo = 1e9, hi = -1e9, sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double m = draw(rng, c.randomization.link_mass);
    lo = std::min(lo, m);
    hi = std::max(hi, m);
    sum += m;
  }
  EXPECT_GE(lo, 0.6);
  EXPECT_LE(hi, 1.4);
  EXPECT_NEAR(sum / n, 1.0, 0.01);
}

TEST(Randomization, AppliedToModel) {
  const TrainConfig c = load_config("");
  RngStream rng(11, 0);
  const RandomizationDraw d = sample_randomization(kModel, c.randomization, rng);
  const sim::RobotModel m = apply_randomization(kModel, d);
  EXPECT_DOUBLE_EQ(m.base.mass, kModel.base.mass * d.mass[0]);
  EXPECT_DOUBLE_EQ(m.motor_constant[2], kModel.motor_constant[2] * d.motor[2]);
  EXPECT_GE(d.delay, 0.0);
  EXPECT_LE(d.delay, 1e-3 * c.randomization.delay_ms[1]);
  const sim::RobotModel same = apply_randomization(kModel, RandomizationDraw::identity(kModel));
  EXPECT_EQ(same.base.mass, kModel.base.mass);
  EXPECT_EQ(same.joint_damping, kModel.joint_damping);
}

TEST(Randomization, InactivePushScheduleNeverPushes) {
  const TrainConfig c = load_config("");
  RngStream rng(12, 0);
  PushSchedule p(c.randomization, false, rng);
  for (int i = 0; i < 100000; ++i) ASSERT_EQ(p.force(i * 0.002, rng), 0.0);
  PushSchedule q(c.randomization, true, rng);
  int pushing = 0;
  for (int i = 0; i < 100000; ++i) {
    const double f = q.force(i * 0.002, rng);
    pushing += f != 0.0;
    ASSERT_LE(std::abs(f), c.randomization.push_scale * c.randomization.push_force[1] + 1e-12);
  }
  EXPECT_GT(pushing, 0);
}

TEST(Randomization, NominalStageBipedSeesNoPush) {
  TrainConfig c = load_config("", {"env.horizon=4"});
  estimator::StatusEstimator est(kModel.joint_count(), c.estimator);
  BipedEnv env(c, kModel, &est, 1, 0, Stage::Nominal);
  for (int t = 0; t < 2000; ++t) {
    env.step(Eigen::VectorXd::Zero(7));
    ASSERT_EQ(env.last_step().push, 0.0);
  }
}

TEST(Randomization, DelayLine) {
  DelayLine none(1, 0.0, 0.002);
  EXPECT_EQ(none.push(Eigen::VectorXd::Constant(1, 3.0))[0], 3.0);
  DelayLine d(1, 0.005, 0.002);  // 2.5 substeps
  std::vector<double> out;
  for (int k = 1; k <= 6; ++k) out.push_back(d.push(Eigen::VectorXd::Constant(1, k))[0]);
  // Applied at step k: midway between commands k-2 and k-3 (zero before start).
  EXPECT_DOUBLE_EQ(out[0], 0.0);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
  EXPECT_DOUBLE_EQ(out[2], 0.5);
  EXPECT_DOUBLE_EQ(out[3], 1.5);
  EXPECT_DOUBLE_EQ(out[5], 3.5);
}

// ---- biped env -------------------------------------------------------------

TEST(BipedEnv, ObservationCarriesThresholdedStatus) {
  const TrainConfig c = load_config("");
  estimator::StatusEstimator est(kModel.joint_count(), c.estimator);
  Eigen::VectorXd& p = est.gru().params();
  Eigen::VectorXd bias(7);
  bias << 0.9, 0.84, 3.0, -3.0, 0.0, 0.9, 5.0;  // sigmoid: 0.711, 0.698, ...
  p.tail(7) = bias;
  BipedEnv env(c, kModel, &est, 3, 0);
  for (int t = 0; t < 5; ++t) {
    env.step(Eigen::VectorXd::Zero(7));
    const Eigen::VectorXd shown = env.latest_observation().tail(7);
    const StepInfo& info = env.last_step();
    EXPECT_EQ(shown, info.status);
    Eigen::VectorXd expected(7);
    expected << 1, 0, 1, 0, 0, 1, 1;
    EXPECT_EQ(shown, expected);
    EXPECT_EQ(env.observation().head(28), env.latest_observation());
  }
  TrainConfig blind = load_config("", {"ablation.status_observation=false"});
  BipedEnv env2(blind, kModel, &est, 3, 0);
  env2.step(Eigen::VectorXd::Zero(7));
  EXPECT_EQ(env2.latest_observation().tail(7).norm(), 0.0);
}

TEST(BipedEnv, MaskingBeforeClampLockedJoint) {
  const TrainConfig c = load_config("");
  estimator::StatusEstimator est(kModel.joint_count(), c.estimator);
  EpisodeOverrides ov;
  fault::FaultScenario sc;
  sc.type = fault::FaultType::PowerLoss;
  sc.joint = 1;
  sc.onset = 0.0;
  ov.scenario = sc;
  ov.randomize = false;
  BipedEnv env(c, kModel, &est, 4, 0, Stage::FaultsEnabled, ov);
  Eigen::VectorXd a = Eigen::VectorXd::Constant(7, 1e4);  // far above every limit
  a[6] = 0.0;
  env.step(a);
  const Eigen::VectorXd& tau = env.last_step().applied_torque;
  EXPECT_EQ(tau[1], 0.0);
  for (int j : {0, 2, 3, 4, 5}) EXPECT_DOUBLE_EQ(tau[j], kModel.torque_limit[j]);
  EXPECT_TRUE(env.last_step().fault_active);
  EXPECT_EQ(env.last_step().label[0], 0.0);
  EXPECT_EQ(env.last_step().label[2], 1.0);
}

TEST(BipedEnv, PhaseModulationAblationForcesZero) {
  const TrainConfig on = load_config("");
  const TrainConfig off = load_config("", {"ablation.phase_modulation=false"});
  estimator::StatusEstimator est(kModel.joint_count(), on.estimator);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(7);
  a[6] = 0.05;
  BipedEnv e_on(on, kModel, &est, 5, 0), e_off(off, kModel, &est, 5, 0);
  e_on.step(a);
  e_off.step(a);
  EXPECT_EQ(e_on.last_step().modulation, 0.05);
  EXPECT_EQ(e_off.last_step().modulation, 0.0);
  EXPECT_NEAR(e_off.phase(), on.control_dt() / on.gait_period, 1e-12);
  EXPECT_NEAR(e_on.phase(), on.control_dt() / on.gait_period + 0.05, 1e-12);
}

TEST(BipedEnv, FallibilityAblationZeroesThreeTerms) {
  const TrainConfig c = load_config("", {"ablation.fallibility_rewards=false"});
  for (bool fault_phase : {false, true}) {
    const reward::RewardWeights w = effective_weights(c, fault_phase);
    EXPECT_EQ(w[reward::kTrajectoryMimic], 0.0);
    EXPECT_EQ(w[reward::kContactForceTracking], 0.0);
    EXPECT_EQ(w[reward::kTermination], 0.0);
    EXPECT_EQ(w[reward::kLinearVelocity], (fault_phase ? c.reward_fault : c.reward_nominal)[reward::kLinearVelocity]);
  }
}

TEST(BipedEnv, NoFaultTrainingKeepsEpisodesHealthy) {
  const TrainConfig c = load_config("", {"ablation.fault_training=false", "fault.probability=1.0", "env.horizon=0.2"});
  estimator::StatusEstimator est(kModel.joint_count(), c.estimator);
  BipedEnv env(c, kModel, &est, 6, 0, Stage::FaultsAndPush);
  for (int t = 0; t < 500; ++t) {
    env.step(Eigen::VectorXd::Zero(7));
    ASSERT_TRUE(env.scenario().healthy());
  }
  const TrainConfig f = load_config("", {"fault.probability=1.0", "env.horizon=0.2"});
  BipedEnv faulty(f, kModel, &est, 6, 0, Stage::FaultsEnabled);
  EXPECT_FALSE(faulty.scenario().healthy());
}

TEST(BipedEnv, SaveLoadContinuesBitIdentical) {
  const TrainConfig c = load_config("", {"env.horizon=1"});
  estimator::StatusEstimator est(kModel.joint_count(), c.estimator);
  RngStream init(7, 0);
  est.init(init);
  BipedEnv a(c, kModel, &est, 7, 0, Stage::FaultsAndPush);
  RngStream act(7, 1);
  auto action = [&] {
    Eigen::VectorXd x(7);
    for (int j = 0; j < 7; ++j) x[j] = act.normal(0.0, j < 6 ? 5.0 : 0.01);
    return x;
  };
  for (int t = 0; t < 137; ++t) a.step(action());
  BinaryWriter w;
  a.save(w);
  BipedEnv b(c, kModel, &est, 99, 3, Stage::Nominal);
  BinaryReader r(w.bytes());
  b.load(r);
  EXPECT_TRUE(r.done());
  for (int t = 0; t < 400; ++t) {
    const Eigen::VectorXd x = action();
    const Transition ta = a.step(x), tb = b.step(x);
    ASSERT_EQ(ta.reward, tb.reward);
    ASSERT_EQ(ta.done, tb.done);
    ASSERT_EQ(a.observation(), b.observation());
  }
}

TEST(BipedEnv, ActionScaleAndSigma) {
  const TrainConfig c = load_config("");
  const Eigen::VectorXd s = BipedEnv::action_scale(kModel, c.max_modulation);
  EXPECT_EQ(s.head(6), kModel.torque_limit);
  EXPECT_EQ(s[6], 0.05);
  const Eigen::VectorXd sg = BipedEnv::action_sigma(kModel, c.policy);
  EXPECT_DOUBLE_EQ(sg[0], 0.1 * kModel.torque_limit[0]);
  EXPECT_EQ(sg[6], c.policy.phase_sigma);
}

// ---- trainer ---------------------------------------------------------------

TEST(Trainer, DryRunWritesMetricsAndCheckpoint) {
  const fs::path dir = scratch("dry");
  Trainer t(load_config("", tiny({"logging.episode_log=true"})), dir);
  t.run();
  ASSERT_TRUE(fs::exists(dir / "metrics.csv"));
  ASSERT_TRUE(fs::exists(dir / "config.yaml"));
  ASSERT_TRUE(fs::exists(dir / "episodes.jsonl"));
  ASSERT_TRUE(fs::exists(dir / "checkpoints" / "ckpt_000002.bin"));
  ASSERT_TRUE(fs::exists(dir / "checkpoints" / "latest.bin"));
  std::ifstream is(dir / "metrics.csv");
  std::string header, line;
  std::getline(is, header);
  EXPECT_EQ(header, IterationMetrics::csv_header());
  const auto cols = std::count(header.begin(), header.end(), ',');
  int rows = 0;
  while (std::getline(is, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), cols);
    ++rows;
  }
  EXPECT_EQ(rows, 4);
  const PolicyBundle b = load_bundle(dir / "checkpoints" / "latest.bin");
  EXPECT_EQ(b.iteration, 4);
  EXPECT_EQ(b.policy.actor().params(), t.policy().actor().params());
  EXPECT_EQ(b.estimator.gru().params(), t.estimator().gru().params());
}

TEST(Trainer, ResumeIsBitIdentical) {
  const TrainConfig c = load_config("", tiny({"curriculum.threshold_fault=0.05", "curriculum.threshold_push=0.1"}));
  const fs::path full = scratch("resume_full"), part = scratch("resume_part");
  Trainer a(c, full);
  a.run(4);
  {
    Trainer b(c, part);
    b.run(2);
  }
  Trainer resumed(c, part);
  resumed.restore(nn::Checkpoint::load(part / "checkpoints" / "latest.bin"));
  EXPECT_EQ(resumed.iteration(), 2);
  resumed.run(4);
  EXPECT_EQ(slurp(full / "metrics.csv"), slurp(part / "metrics.csv"));
  EXPECT_EQ(slurp(full / "checkpoints" / "latest.bin"), slurp(part / "checkpoints" / "latest.bin"));
}

TEST(Trainer, CheckpointRoundTripIsBitExact) {
  const fs::path dir = scratch("roundtrip");
  Trainer t(load_config("", tiny()), dir);
  t.run(1);
  const nn::Checkpoint ck = t.checkpoint();
  Trainer u(load_config("", tiny()), scratch("roundtrip2"));
  u.restore(ck);
  EXPECT_EQ(u.checkpoint().encode(), ck.encode());
}

TEST(Trainer, CurriculumTraceIsMonotone) {
  const TrainConfig c =
      load_config("", tiny({"curriculum.threshold_fault=0.05", "curriculum.threshold_push=0.1", "ppo.iterations=6",
                            "ppo.steps_per_env=100"}));
  Trainer t(c, scratch("curriculum"));
  t.run();
  std::vector<Stage> stages;
  for (const auto& m : t.history()) stages.push_back(m.stage);
  for (std::size_t i = 1; i < stages.size(); ++i)
    EXPECT_GE(static_cast<int>(stages[i]), static_cast<int>(stages[i - 1]));
  EXPECT_EQ(stages.back(), Stage::FaultsAndPush);
}

TEST(Trainer, NoCurriculumStartsWithFaultsAndPush) {
  Trainer t(load_config("", tiny({"ablation.curriculum=false"})), scratch("nocurr"));
  EXPECT_EQ(t.stage(), Stage::FaultsAndPush);
  t.run(1);
  EXPECT_EQ(t.stage(), Stage::FaultsAndPush);
}

TEST(Trainer, RejectsForeignCheckpoint) {
  Trainer t(load_config("", tiny()), scratch("foreign"));
  nn::Checkpoint ck;
  ck.header = {{"kind", "something-else"}};
  EXPECT_THROW(t.restore(ck), IoError);
  Trainer wide(load_config("", tiny({"env.num_envs=3"})), scratch("foreign2"));
  EXPECT_THROW(wide.restore(t.checkpoint()), Error);
}

TEST(Ablation, VariantNames) {
  EXPECT_EQ(ablation_variants().size(), 6u);
  EXPECT_TRUE(variant_overrides("full").empty());
  EXPECT_EQ(variant_overrides("no_phase_modulation"), (std::vector<std::string>{"ablation.phase_modulation=false"}));
  try {
    variant_overrides("bogus");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("no_fault_training"), std::string::npos);
  }
  for (const auto& [name, o] : ablation_variants()) EXPECT_NO_THROW(load_config("", o)) << name;
}
