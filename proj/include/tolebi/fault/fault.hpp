// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/errors.hpp"
#include "tolebi/core/rng.hpp"
#include "tolebi/sim/robot_model.hpp"

namespace tolebi::fault {

enum class FaultType : int { Healthy = 0, JointLocking = 1, PowerLoss = 2 };

inline const char* to_string(FaultType t) {
  switch (t) {
    case FaultType::JointLocking: return "joint_locking";
    case FaultType::PowerLoss: return "power_loss";
    default: return "healthy";
  }
}

/// One actuator fault per episode. Type, joint and onset never change after
/// sampling; the locked reference angle is latched at the first masked step.
struct FaultScenario {
  FaultType type = FaultType::Healthy;
  int joint = -1;
  double onset = 0.0;                     // s
  std::optional<double> locked_position;  // rad, JointLocking only

  bool healthy() const { return type == FaultType::Healthy; }
  bool active(double t) const { return !healthy() && t >= onset; }

  static FaultScenario make(FaultType type, int joint, double onset) {
    FaultScenario s;
    s.type = type;
    s.joint = type == FaultType::Healthy ? -1 : joint;
    s.onset = type == FaultType::Healthy ? 0.0 : onset;
    return s;
  }

  void validate(int joints) const {
    if (healthy()) return;
    if (joint < 0 || joint >= joints) throw ConfigError("fault: joint index " + std::to_string(joint) + " out of range");
    if (!(onset >= 0.0)) throw ConfigError("fault: onset must be >= 0");
  }

  void save(BinaryWriter& w) const {
    w.put_i64(static_cast<int>(type));
    w.put_i64(joint);
    w.put_f64(onset);
    w.put_bool(locked_position.has_value());
    w.put_f64(locked_position.value_or(0.0));
  }
  void load(BinaryReader& r) {
    type = static_cast<FaultType>(r.get_i64());
    joint = static_cast<int>(r.get_i64());
    onset = r.get_f64();
    const bool has = r.get_bool();
    const double v = r.get_f64();
    locked_position = has ? std::optional<double>(v) : std::nullopt;
  }
};

struct FaultConfig {
  double probability = 0.9;   // share of episodes that get a fault
  double onset_window = 0.4;  // onset ~ U[0, onset_window * horizon]
};

inline FaultScenario sample_scenario(RngStream& rng, int joints, const FaultConfig& cfg, double horizon) {
  if (joints < 1) throw ConfigError("fault: joint count must be >= 1");
  if (!(cfg.probability >= 0.0 && cfg.probability <= 1.0)) throw ConfigError("fault.probability must be in [0,1]");
  if (!rng.bernoulli(cfg.probability)) return {};
  const FaultType type = rng.bernoulli(0.5) ? FaultType::JointLocking : FaultType::PowerLoss;
  const int joint = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(joints)));
  const double onset = cfg.onset_window > 0.0 ? rng.uniform(0.0, cfg.onset_window * horizon) : 0.0;
  return FaultScenario::make(type, joint, onset);
}

/// Torque masking: a locked joint is held at q0 by the model's PD gains, a
/// joint without power produces nothing, every other joint passes through.
inline Eigen::VectorXd mask_torque(const Eigen::VectorXd& torques, const FaultScenario& scenario,
                                   const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const sim::RobotModel& model,
                                   double t) {
  const long J = model.joint_count();
  check_dim("mask_torque torques", J, torques.size());
  check_dim("mask_torque q", J, q.size());
  check_dim("mask_torque qd", J, qd.size());
  Eigen::VectorXd out = torques;
  if (!scenario.active(t)) return out;
  const int j = scenario.joint;
  if (scenario.type == FaultType::PowerLoss) {
    out[j] = 0.0;
  } else {
    const double q0 = scenario.locked_position.value_or(q[j]);
    out[j] = model.kp[j] * (q0 - q[j]) - model.kd[j] * qd[j];
  }
  return out;
}

/// Status vector of length J+1: [system healthy, joint 0 faulty, ...].
using StatusLabel = Eigen::VectorXd;

inline StatusLabel ground_truth_label(const FaultScenario& scenario, double t, int joints) {
  StatusLabel label = StatusLabel::Zero(joints + 1);
  if (scenario.active(t))
    label[1 + scenario.joint] = 1.0;
  else
    label[0] = 1.0;
  return label;
}

/// Per-environment fault state: owns the scenario and latches the lock angle.
class FaultInjector {
 public:
  FaultInjector() = default;
  explicit FaultInjector(FaultScenario s) : scenario_(std::move(s)) {}

  const FaultScenario& scenario() const { return scenario_; }

  /// Call once per control step before masking.
  void latch(const Eigen::VectorXd& q, double t) {
    if (scenario_.type == FaultType::JointLocking && scenario_.active(t) && !scenario_.locked_position)
      scenario_.locked_position = q[scenario_.joint];
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& torques, const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                        const sim::RobotModel& model, double t) const {
    return mask_torque(torques, scenario_, q, qd, model, t);
  }

  StatusLabel label(double t, int joints) const { return ground_truth_label(scenario_, t, joints); }

  void save(BinaryWriter& w) const { scenario_.save(w); }
  void load(BinaryReader& r) { scenario_.load(r); }

 private:
  FaultScenario scenario_;
};

/// "healthy", "lock_<joint>", "power_<joint>".
inline std::string scenario_name(const FaultScenario& s, const std::vector<std::string>& joint_names) {
  if (s.healthy()) return "healthy";
  return std::string(s.type == FaultType::JointLocking ? "lock_" : "power_") + joint_names.at(s.joint);
}

inline std::vector<std::string> scenario_names(const std::vector<std::string>& joint_names) {
  std::vector<std::string> out{"healthy"};
  for (const char* prefix : {"lock_", "power_"})
    for (const auto& j : joint_names) out.push_back(prefix + j);
  return out;
}

inline std::optional<FaultScenario> parse_scenario(const std::string& name, const std::vector<std::string>& joint_names,
                                                   double onset) {
  if (name == "healthy") return FaultScenario{};
  for (auto [prefix, type] : {std::pair{"lock_", FaultType::JointLocking}, std::pair{"power_", FaultType::PowerLoss}}) {
    const std::string p(prefix);
    if (name.rfind(p, 0) != 0) continue;
    const std::string joint = name.substr(p.size());
    for (std::size_t j = 0; j < joint_names.size(); ++j)
      if (joint_names[j] == joint) return FaultScenario::make(type, static_cast<int>(j), onset);
  }
  return std::nullopt;
}

}  // namespace tolebi::fault
