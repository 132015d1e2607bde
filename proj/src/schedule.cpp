// SPDX-License-Identifier: Apache-2.0
#include "geolink/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace geolink {

int ScheduleConfig::warmup_steps() const {
  return static_cast<int>(std::floor(warmup_fraction * static_cast<double>(steps_per_epoch)));
}

double lr_at(int step, int total_steps, const ScheduleConfig& cfg) {
  const int warmup = std::min(cfg.warmup_steps(), std::max(total_steps, 0));
  step = std::clamp(step, 0, std::max(total_steps, 0));
  if (step < warmup) return cfg.base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  const int decay = total_steps - warmup;
  if (decay <= 0) return cfg.base_lr;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(decay);
  return cfg.final_lr + 0.5 * (cfg.base_lr - cfg.final_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace geolink
