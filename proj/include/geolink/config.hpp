// SPDX-License-Identifier: Apache-2.0
//
// TrainConfig: every hyperparameter of a run. Config files are flat
// `key = value` text with `#` comments; unknown keys are an error.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

namespace geolink {

struct TrainConfig {
  // Schedule and optimizer.
  int epochs = 40;
  int batch_size = 8;
  double base_lr = 6e-4;
  double final_lr = 1e-4;
  double warmup_fraction = 0.1;  // of one epoch
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;

  // Objective.
  double lambda_sc = 4.0;
  double init_tau = 0.05;
  bool ga = true;
  bool sc = true;
  bool rd = true;
  bool mme = true;
  bool symmetric_nce = false;
  bool rd_teacher_grad = false;
  bool estimator_first = true;
  bool multi_view_average = false;

  // Model sizes.
  int feature_dim = 64;
  int experts = 3;
  int vclub_hidden = 64;
  int image_side = 32;
  int patch = 8;
  int width = 64;
  int token_hidden = 32;
  int channel_hidden = 128;
  int mixer_blocks = 2;

  // Point-cloud encoder.
  int num_points = 1024;
  int pc_stages = 4;
  int pc_k = 16;
  int pc_initial_dim = 72;
  double pc_alpha = 1000.0;
  double pc_beta = 100.0;
  bool pc_random_start = false;

  // Throws ConfigError on an invariant violation.
  void validate() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;

  // Sets one field from its textual value. Throws ConfigError.
  void set(const std::string& key, const std::string& value);
};

TrainConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");
TrainConfig load_config(const std::filesystem::path& path);
std::string to_config_text(const TrainConfig& cfg);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

// Build version string (git describe at configure time).
std::string version();

}  // namespace geolink
