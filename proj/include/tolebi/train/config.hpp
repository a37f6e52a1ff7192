// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "tolebi/core/errors.hpp"
#include "tolebi/estimator/estimator.hpp"
#include "tolebi/fault/fault.hpp"
#include "tolebi/gait/gait.hpp"
#include "tolebi/reward/reward.hpp"
#include "tolebi/sim/dynamics.hpp"

namespace tolebi::train {

/// Every accepted key with its default. User files and --set overrides may
/// only touch keys listed here.
inline constexpr const char* kDefaultConfig = R"(
run:
  name: tolebi
  seed: 1
sim:
  dt: 0.002
  substeps: 2
  terrain: flat            # flat | stairs
  friction: 1.0
  stairs: {start: 3.0, step_length: 0.3, step_height: 0.03, steps: 5}
  termination: {height_fraction: 0.6, pitch_limit: 0.8, max_foot_separation: 0.7}
env:
  num_envs: 64
  horizon: 32.0            # s
  command_vx: [-0.3, 0.6]  # m/s
  qd_scale: 0.1            # joint-velocity scaling in the observation
gait:
  period: 1.0
  max_modulation: 0.05
  hip_amplitude: 0.25
  knee_lift: 0.5
  schedule:
    - [0.0, DSP]
    - [0.1, RSSP]
    - [0.5, DSP]
    - [0.6, LSSP]
fault:
  probability: 0.9
  onset_window: 0.4
randomization:
  enabled: true
  link_mass: [0.6, 1.4]
  link_inertia: [0.6, 1.4]
  link_com: [0.6, 1.4]
  joint_friction: [0.6, 1.4]
  joint_damping: [0.6, 1.4]
  motor_constant: [0.9, 1.1]
  delay_ms: [0.5, 1.5]
  push_force: [50.0, 250.0]     # N at 100 kg; multiplied by push_scale
  push_duration: [0.1, 1.0]     # s
  push_interval: [3.0, 8.0]     # s between pushes
  push_scale: 0.17
  noise_linear: 0.025           # m/s, uniform half-width
  noise_angular: 0.02           # rad/s
curriculum:
  threshold_fault: 20.0
  threshold_push: 24.0
  smoothing: 0.9
reward:
  contact_fraction: 0.05
  nominal: {linear_velocity: 0.4, angular_velocity: 0.2, foot_contact: 0.2, orientation: 0.3, joint_torque: 0.05,
            joint_velocity: 0.05, joint_acceleration: 0.05, feet_contact_force: 0.1, torque_difference: 0.7,
            contact_force_difference: 0.2, trajectory_mimic: 0.35, contact_force_tracking: 0.0, termination: 0.0}
  fault: {linear_velocity: 0.4, angular_velocity: 0.2, foot_contact: 0.2, orientation: 0.3, joint_torque: 0.05,
          joint_velocity: 0.05, joint_acceleration: 0.05, feet_contact_force: 0.1, torque_difference: 0.7,
          contact_force_difference: 0.2, trajectory_mimic: 0.35, contact_force_tracking: 0.3, termination: -100.0}
policy:
  hidden: [256, 256]
  sigma_fraction: 0.1
  phase_sigma: 0.01
  init_output_scale: 0.01
  history: 10
  stride: 2
estimator:
  hidden: 128
  threshold: 0.7
  window: 16
  learning_rate: 1.0e-4
  minibatch: 8
  max_grad_norm: 1.0
ppo:
  iterations: 1000
  steps_per_env: 256
  epochs: 4
  minibatch: 128
  clip: 0.2
  gamma: 0.99
  lambda: 0.95
  learning_rate: [1.0e-5, 3.0e-6]
  max_grad_norm: 1.0
  entropy_coef: 0.0
  workers: 1
ablation:
  status_observation: true
  fallibility_rewards: true
  phase_modulation: true
  curriculum: true
  fault_training: true
logging:
  checkpoint_every: 50
  episode_log: false
eval:
  episodes: 8
  horizon: 20.0
  success_time: 20.0
  onset: 2.0
  command_vx: 0.3
  scenarios: []           # empty = full grid
  post_onset_only: false
  trace_episodes: 1
  workers: 1              # episodes evaluated in parallel
)";

struct CurriculumConfig {
  double threshold_fault = 20.0;
  double threshold_push = 24.0;
  double smoothing = 0.9;
};

struct RandomizationConfig {
  bool enabled = true;
  std::array<double, 2> link_mass{0.6, 1.4}, link_inertia{0.6, 1.4}, link_com{0.6, 1.4};
  std::array<double, 2> joint_friction{0.6, 1.4}, joint_damping{0.6, 1.4}, motor_constant{0.9, 1.1};
  std::array<double, 2> delay_ms{0.5, 1.5};
  std::array<double, 2> push_force{50.0, 250.0}, push_duration{0.1, 1.0}, push_interval{3.0, 8.0};
  double push_scale = 0.17;
  double noise_linear = 0.025, noise_angular = 0.02;
};

struct PolicyConfig {
  std::vector<int> hidden{256, 256};
  double sigma_fraction = 0.1;
  double phase_sigma = 0.01;
  double init_output_scale = 0.01;
  int history = 10;
  int stride = 2;
};

struct PpoConfig {
  int iterations = 1000;
  int steps_per_env = 256;
  int epochs = 4;
  int minibatch = 128;
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  double lr_start = 1e-5, lr_end = 3e-6;
  double max_grad_norm = 1.0;
  double entropy_coef = 0.0;
  int workers = 1;
};

struct AblationConfig {
  bool status_observation = true;
  bool fallibility_rewards = true;
  bool phase_modulation = true;
  bool curriculum = true;
  bool fault_training = true;
};

struct EvalConfig {
  int episodes = 8;
  double horizon = 20.0;
  double success_time = 20.0;
  double onset = 2.0;
  double command_vx = 0.3;
  std::vector<std::string> scenarios;
  bool post_onset_only = false;
  int trace_episodes = 1;
  int workers = 1;
};

struct TrainConfig {
  std::string run_name = "tolebi";
  std::uint64_t seed = 1;

  double sim_dt = 0.002;
  int substeps = 2;
  sim::Terrain terrain;
  sim::TerminationConfig termination;

  int num_envs = 64;
  double horizon = 32.0;
  std::array<double, 2> command_vx{-0.3, 0.6};
  double qd_scale = 0.1;

  gait::GaitSchedule schedule;
  gait::ReferenceParams reference;
  double gait_period = 1.0;
  double max_modulation = 0.05;

  fault::FaultConfig fault;
  RandomizationConfig randomization;
  CurriculumConfig curriculum;
  reward::RewardWeights reward_nominal = reward::RewardWeights::nominal();
  reward::RewardWeights reward_fault = reward::RewardWeights::fault();
  double contact_fraction = 0.05;
  PolicyConfig policy;
  estimator::EstimatorConfig estimator;
  PpoConfig ppo;
  AblationConfig ablation;
  int checkpoint_every = 50;
  bool episode_log = false;
  EvalConfig eval;

  double control_dt() const { return sim_dt * substeps; }

  /// The merged YAML tree this config was built from.
  YAML::Node tree;
};

namespace detail {

inline std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

/// Copies `user` onto `base`, rejecting keys that `base` does not have.
inline void merge_into(YAML::Node base, const YAML::Node& user, const std::string& prefix) {
  if (!user.IsMap()) throw ConfigError("config section '" + prefix + "' must be a mapping");
  for (const auto& kv : user) {
    const std::string key = kv.first.as<std::string>();
    const std::string path = join(prefix, key);
    if (!base[key]) throw ConfigError("unknown config key: " + path);
    YAML::Node target = base[key];
    if (target.IsMap() && kv.second.IsMap())
      merge_into(target, kv.second, path);
    else if (target.IsMap())
      throw ConfigError("config key " + path + " must be a mapping");
    else
      base[key] = kv.second;
  }
}

template <typename T>
T get(const YAML::Node& root, const std::string& path) {
  YAML::Node n;
  n.reset(root);
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!n.IsMap() || !n[part]) throw ConfigError("missing config key: " + path);
    // reset() rebinds; operator= would write into the tree.
    n.reset(n[part]);
  }
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key " + path + " has the wrong type");
  }
}

inline std::array<double, 2> range(const YAML::Node& root, const std::string& path) {
  const auto v = get<std::vector<double>>(root, path);
  if (v.size() != 2 || !(v[0] <= v[1])) throw ConfigError("config key " + path + " must be [lo, hi] with lo <= hi");
  return {v[0], v[1]};
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

}  // namespace detail

inline YAML::Node default_tree() { return YAML::Load(kDefaultConfig); }

/// Applies `a.b.c=value`; the key must exist in the tree.
inline void apply_override(YAML::Node& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot parse override value for " + path + ": " + e.what());
  }
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  YAML::Node node;
  node.reset(tree);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node.IsMap() || !node[parts[i]]) throw ConfigError("unknown config key: " + path);
    node.reset(node[parts[i]]);
  }
  if (!node.IsMap() || !node[parts.back()]) throw ConfigError("unknown config key: " + path);
  if (node[parts.back()].IsMap()) throw ConfigError("config key " + path + " is a section, not a value");
  node[parts.back()] = value;
}

inline TrainConfig parse_config(const YAML::Node& tree) {
  using detail::get;
  using detail::range;
  using detail::require;
  TrainConfig c;
  c.tree = YAML::Clone(tree);
  c.run_name = get<std::string>(tree, "run.name");
  c.seed = get<std::uint64_t>(tree, "run.seed");

  c.sim_dt = get<double>(tree, "sim.dt");
  c.substeps = get<int>(tree, "sim.substeps");
  require(c.sim_dt > 0.0, "sim.dt must be > 0");
  require(c.substeps >= 1, "sim.substeps must be >= 1");
  const double friction = get<double>(tree, "sim.friction");
  const auto terrain = get<std::string>(tree, "sim.terrain");
  if (terrain == "flat") {
    c.terrain = sim::Terrain::flat(friction);
  } else if (terrain == "stairs") {
    c.terrain = sim::Terrain::stairs_down(get<double>(tree, "sim.stairs.start"), get<double>(tree, "sim.stairs.step_length"),
                                          get<double>(tree, "sim.stairs.step_height"), get<int>(tree, "sim.stairs.steps"),
                                          friction);
  } else {
    throw ConfigError("sim.terrain must be 'flat' or 'stairs', got '" + terrain + "'");
  }
  c.terrain.validate();
  c.termination = {get<double>(tree, "sim.termination.height_fraction"), get<double>(tree, "sim.termination.pitch_limit"),
                   get<double>(tree, "sim.termination.max_foot_separation")};

  c.num_envs = get<int>(tree, "env.num_envs");
  c.horizon = get<double>(tree, "env.horizon");
  c.command_vx = range(tree, "env.command_vx");
  c.qd_scale = get<double>(tree, "env.qd_scale");
  require(c.num_envs >= 1, "env.num_envs must be >= 1");
  require(c.horizon > 0.0, "env.horizon must be > 0");

  c.gait_period = get<double>(tree, "gait.period");
  c.max_modulation = get<double>(tree, "gait.max_modulation");
  require(c.gait_period > 0.0, "gait.period must be > 0");
  require(c.max_modulation >= 0.0, "gait.max_modulation must be >= 0");
  c.reference.hip_amplitude = get<double>(tree, "gait.hip_amplitude");
  c.reference.knee_lift = get<double>(tree, "gait.knee_lift");
  c.schedule.intervals.clear();
  for (const auto& row : tree["gait"]["schedule"]) {
    if (!row.IsSequence() || row.size() != 2) throw ConfigError("gait.schedule entries must be [start, phase]");
    const auto name = row[1].as<std::string>();
    gait::SupportPhase p;
    if (name == "DSP")
      p = gait::SupportPhase::DSP;
    else if (name == "RSSP")
      p = gait::SupportPhase::RSSP;
    else if (name == "LSSP")
      p = gait::SupportPhase::LSSP;
    else
      throw ConfigError("gait.schedule phase must be DSP, RSSP or LSSP, got '" + name + "'");
    c.schedule.intervals.push_back({row[0].as<double>(), p});
  }
  c.schedule.validate();

  c.fault.probability = get<double>(tree, "fault.probability");
  c.fault.onset_window = get<double>(tree, "fault.onset_window");
  require(c.fault.probability >= 0.0 && c.fault.probability <= 1.0, "fault.probability must be in [0,1]");
  require(c.fault.onset_window >= 0.0, "fault.onset_window must be >= 0");

  auto& r = c.randomization;
  r.enabled = get<bool>(tree, "randomization.enabled");
  r.link_mass = range(tree, "randomization.link_mass");
  r.link_inertia = range(tree, "randomization.link_inertia");
  r.link_com = range(tree, "randomization.link_com");
  r.joint_friction = range(tree, "randomization.joint_friction");
  r.joint_damping = range(tree, "randomization.joint_damping");
  r.motor_constant = range(tree, "randomization.motor_constant");
  r.delay_ms = range(tree, "randomization.delay_ms");
  r.push_force = range(tree, "randomization.push_force");
  r.push_duration = range(tree, "randomization.push_duration");
  r.push_interval = range(tree, "randomization.push_interval");
  r.push_scale = get<double>(tree, "randomization.push_scale");
  r.noise_linear = get<double>(tree, "randomization.noise_linear");
  r.noise_angular = get<double>(tree, "randomization.noise_angular");
  require(r.link_mass[0] > 0.0 && r.link_inertia[0] > 0.0, "randomization scales must be > 0");
  require(r.delay_ms[0] >= 0.0, "randomization.delay_ms must be >= 0");
  require(r.push_interval[0] > 0.0, "randomization.push_interval must be > 0");

  c.curriculum.threshold_fault = get<double>(tree, "curriculum.threshold_fault");
  c.curriculum.threshold_push = get<double>(tree, "curriculum.threshold_push");
  c.curriculum.smoothing = get<double>(tree, "curriculum.smoothing");
  require(c.curriculum.threshold_fault < c.curriculum.threshold_push,
          "curriculum.threshold_fault must be below curriculum.threshold_push");
  require(c.curriculum.smoothing >= 0.0 && c.curriculum.smoothing < 1.0, "curriculum.smoothing must be in [0,1)");

  c.contact_fraction = get<double>(tree, "reward.contact_fraction");
  for (const char* preset : {"nominal", "fault"}) {
    auto& w = std::string(preset) == "nominal" ? c.reward_nominal : c.reward_fault;
    for (const auto& kv : tree["reward"][preset]) {
      const auto name = kv.first.as<std::string>();
      w[reward::term_index(name)] = get<double>(tree, std::string("reward.") + preset + "." + name);
    }
  }

  c.policy.hidden = get<std::vector<int>>(tree, "policy.hidden");
  c.policy.sigma_fraction = get<double>(tree, "policy.sigma_fraction");
  c.policy.phase_sigma = get<double>(tree, "policy.phase_sigma");
  c.policy.init_output_scale = get<double>(tree, "policy.init_output_scale");
  c.policy.history = get<int>(tree, "policy.history");
  c.policy.stride = get<int>(tree, "policy.stride");
  require(!c.policy.hidden.empty(), "policy.hidden must list at least one layer");
  require(c.policy.sigma_fraction > 0.0 && c.policy.phase_sigma > 0.0, "policy sigmas must be > 0");
  require(c.policy.history >= 1 && c.policy.stride >= 1, "policy.history and policy.stride must be >= 1");

  c.estimator.hidden = get<int>(tree, "estimator.hidden");
  c.estimator.threshold = get<double>(tree, "estimator.threshold");
  c.estimator.window = get<int>(tree, "estimator.window");
  c.estimator.learning_rate = get<double>(tree, "estimator.learning_rate");
  c.estimator.minibatch = get<int>(tree, "estimator.minibatch");
  c.estimator.max_grad_norm = get<double>(tree, "estimator.max_grad_norm");

  auto& p = c.ppo;
  p.iterations = get<int>(tree, "ppo.iterations");
  p.steps_per_env = get<int>(tree, "ppo.steps_per_env");
  p.epochs = get<int>(tree, "ppo.epochs");
  p.minibatch = get<int>(tree, "ppo.minibatch");
  p.clip = get<double>(tree, "ppo.clip");
  p.gamma = get<double>(tree, "ppo.gamma");
  p.lambda = get<double>(tree, "ppo.lambda");
  const auto lr = get<std::vector<double>>(tree, "ppo.learning_rate");
  require(lr.size() == 2 && lr[0] > 0.0 && lr[1] > 0.0, "ppo.learning_rate must be [start, end], both > 0");
  p.lr_start = lr[0];
  p.lr_end = lr[1];
  p.max_grad_norm = get<double>(tree, "ppo.max_grad_norm");
  p.entropy_coef = get<double>(tree, "ppo.entropy_coef");
  p.workers = get<int>(tree, "ppo.workers");
  require(p.iterations >= 0, "ppo.iterations must be >= 0");
  require(p.steps_per_env >= 1 && p.epochs >= 1 && p.minibatch >= 1, "ppo batch sizes must be >= 1");
  require(p.clip > 0.0, "ppo.clip must be > 0");
  require(p.workers >= 1, "ppo.workers must be >= 1");

  c.ablation.status_observation = get<bool>(tree, "ablation.status_observation");
  c.ablation.fallibility_rewards = get<bool>(tree, "ablation.fallibility_rewards");
  c.ablation.phase_modulation = get<bool>(tree, "ablation.phase_modulation");
  c.ablation.curriculum = get<bool>(tree, "ablation.curriculum");
  c.ablation.fault_training = get<bool>(tree, "ablation.fault_training");

  c.checkpoint_every = get<int>(tree, "logging.checkpoint_every");
  c.episode_log = get<bool>(tree, "logging.episode_log");

  auto& e = c.eval;
  e.episodes = get<int>(tree, "eval.episodes");
  e.horizon = get<double>(tree, "eval.horizon");
  e.success_time = get<double>(tree, "eval.success_time");
  e.onset = get<double>(tree, "eval.onset");
  e.command_vx = get<double>(tree, "eval.command_vx");
  e.scenarios = get<std::vector<std::string>>(tree, "eval.scenarios");
  e.post_onset_only = get<bool>(tree, "eval.post_onset_only");
  e.trace_episodes = get<int>(tree, "eval.trace_episodes");
  e.workers = get<int>(tree, "eval.workers");
  require(e.workers >= 1, "eval.workers must be >= 1");
  require(e.episodes >= 1, "eval.episodes must be >= 1");
  require(e.horizon >= e.success_time, "eval.horizon must be >= eval.success_time");
  return c;
}

/// Defaults, then the optional user file, then each override in order.
inline TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  YAML::Node tree = default_tree();
  if (!path.empty()) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
    YAML::Node user;
    try {
      user = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
      throw ConfigError("cannot parse config file " + path + ": " + e.what());
    }
    if (user && !user.IsNull()) detail::merge_into(tree, user, "");
  }
  for (const auto& o : overrides) apply_override(tree, o);
  return parse_config(tree);
}

inline void write_snapshot(const TrainConfig& c, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config snapshot: " + path.string());
  YAML::Emitter out;
  out << c.tree;
  os << out.c_str() << '\n';
}

}  // namespace tolebi::train
