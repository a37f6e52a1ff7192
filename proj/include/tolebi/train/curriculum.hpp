// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/errors.hpp"

namespace tolebi::train {

enum class Stage : int { Nominal = 0, FaultsEnabled = 1, FaultsAndPush = 2 };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::FaultsEnabled: return "faults";
    case Stage::FaultsAndPush: return "faults_push";
    default: return "nominal";
  }
}

inline bool faults_enabled(Stage s) { return s != Stage::Nominal; }
inline bool pushes_enabled(Stage s) { return s == Stage::FaultsAndPush; }

struct CurriculumThresholds {
  double fault = 20.0;  // s
  double push = 24.0;   // s
};

/// At most one stage per tick; thresholds are strict.
inline Stage curriculum_tick(Stage stage, double mean_length, const CurriculumThresholds& th = {}) {
  if (!(th.fault < th.push)) throw ConfigError("curriculum thresholds must satisfy fault < push");
  if (stage == Stage::Nominal && mean_length > th.fault) return Stage::FaultsEnabled;
  if (stage == Stage::FaultsEnabled && mean_length > th.push) return Stage::FaultsAndPush;
  return stage;
}

/// Exponentially smoothed mean episode length driving curriculum_tick. The
/// fault reward preset is active from the first transition on.
class CurriculumController {
 public:
  CurriculumController() = default;
  CurriculumController(CurriculumThresholds th, double smoothing, Stage start = Stage::Nominal)
      : th_(th), smoothing_(smoothing), stage_(start) {
    if (!(th.fault < th.push)) throw ConfigError("curriculum thresholds must satisfy fault < push");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("curriculum.smoothing must be in [0,1)");
  }

  Stage stage() const { return stage_; }
  bool fault_rewards() const { return stage_ != Stage::Nominal; }
  double smoothed_length() const { return smoothed_.value_or(0.0); }

  /// Feeds the mean length of episodes finished this iteration; iterations
  /// without finished episodes leave the average unchanged.
  Stage update(std::optional<double> mean_length) {
    if (mean_length) {
      smoothed_ = smoothed_ ? smoothing_ * *smoothed_ + (1.0 - smoothing_) * *mean_length : *mean_length;
      stage_ = curriculum_tick(stage_, *smoothed_, th_);
    }
    return stage_;
  }

  void save(BinaryWriter& w) const {
    w.put_i64(static_cast<int>(stage_));
    w.put_bool(smoothed_.has_value());
    w.put_f64(smoothed_.value_or(0.0));
  }
  void load(BinaryReader& r) {
    stage_ = static_cast<Stage>(r.get_i64());
    const bool has = r.get_bool();
    const double v = r.get_f64();
    smoothed_ = has ? std::optional<double>(v) : std::nullopt;
  }

 private:
  CurriculumThresholds th_;
  double smoothing_ = 0.9;
  Stage stage_ = Stage::Nominal;
  std::optional<double> smoothed_;
};

}  // namespace tolebi::train
