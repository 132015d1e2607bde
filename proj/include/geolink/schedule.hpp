// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace geolink {

struct ScheduleConfig {
  double base_lr = 6e-4;
  double final_lr = 1e-4;
  double warmup_fraction = 0.1;  // of one epoch
  int steps_per_epoch = 1;

  int warmup_steps() const;
};

// Linear warmup from 0 to base_lr over warmup_steps(), then cosine decay to
// final_lr at total_steps. Step is clamped to [0, total_steps].
double lr_at(int step, int total_steps, const ScheduleConfig& cfg);

}  // namespace geolink
