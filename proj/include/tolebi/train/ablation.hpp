// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tolebi/core/errors.hpp"

namespace tolebi::train {

/// Named variants and the config toggles that define them.
inline const std::vector<std::pair<std::string, std::vector<std::string>>>& ablation_variants() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> v{
      {"full", {}},
      {"no_status_observation", {"ablation.status_observation=false"}},
      {"no_fallibility_rewards", {"ablation.fallibility_rewards=false"}},
      {"no_phase_modulation", {"ablation.phase_modulation=false"}},
      {"no_curriculum", {"ablation.curriculum=false"}},
      {"no_fault_training", {"ablation.fault_training=false"}},
  };
  return v;
}

inline std::vector<std::string> variant_overrides(const std::string& name) {
  for (const auto& [n, o] : ablation_variants())
    if (n == name) return o;
  std::string valid;
  for (const auto& [n, o] : ablation_variants()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown ablation variant '" + name + "'; valid variants: " + valid);
}

}  // namespace tolebi::train
