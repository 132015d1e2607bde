// SPDX-License-Identifier: Apache-2.0
//
// GeoLink training: aligned (drone, satellite, point cloud) batches, a frozen
// point-cloud encoder feeding the MME block and projection, a shared 2D
// encoder, alternating vCLUB estimator updates and AdamW on the total loss.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geolink/config.hpp"
#include "geolink/image_encoder.hpp"
#include "geolink/mme.hpp"
#include "geolink/nn.hpp"
#include "geolink/objectives.hpp"
#include "geolink/pointcloud.hpp"
#include "geolink/retrieval.hpp"
#include "geolink/schedule.hpp"
#include "geolink/synthetic.hpp"

namespace geolink {

pc::EncoderConfig encoder_config(const TrainConfig& cfg);
obj::LossConfig loss_config(const TrainConfig& cfg);
img::ImageEncoderConfig image_config(const TrainConfig& cfg);

struct Model {
  TrainConfig cfg;
  img::EncoderParams image;
  // 3D branch. Absent after stripping.
  bool has_3d = true;
  mme::MMEParams mme;
  ag::Var proj_w, proj_b;
  obj::Temperature temperature;
  obj::VClubEstimator est_d, est_s;
  // Per-dimension standardization of the raw point-cloud feature.
  ag::Mat pc_mean, pc_std;

  // Image encoder, MME, projection and temperature.
  nn::ParameterSet main_params() const;
  nn::ParameterSet estimator_params() const;
  nn::ParameterSet all_params() const;
};

Model init_model(const TrainConfig& cfg);

// Normalized B x D point-cloud features from raw encoder outputs (B x D_pc).
FeatureBatch pointcloud_features(const Model& m, const ag::Mat& raw, std::vector<std::string> scene_ids);
// Normalized B x D image features.
FeatureBatch image_features(const Model& m, const img::ImageBatch& batch);

struct StepRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  obj::LossReport loss;
  double grad_norm = 0.0;
};

struct OptimizerState {
  nn::AdamW main;
  nn::AdamW est;
};

// Caches encode_pointcloud outputs keyed by (scene_id, encoder hash).
class PointCloudCache {
 public:
  const Eigen::VectorXd& get(const pc::PointCloud& cloud, const pc::EncoderConfig& cfg);
  std::size_t size() const { return cache_.size(); }

 private:
  std::map<std::pair<std::string, std::uint64_t>, Eigen::VectorXd> cache_;
};

struct Checkpoint {
  Model model;
  OptimizerState opt;
  std::int64_t step = 0;
};

class Trainer {
 public:
  // Training scenes are those whose split is "train" (all scenes when the
  // dataset carries no split labels). The trainer keeps its own copy.
  Trainer(const TrainConfig& cfg, syn::Dataset data);
  // Continues from a saved state; the dataset must match the original run.
  Trainer(Checkpoint ckpt, syn::Dataset data);
  // train_ points into data_.
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  int steps_per_epoch() const { return steps_per_epoch_; }
  std::int64_t total_steps() const { return static_cast<std::int64_t>(cfg_.epochs) * steps_per_epoch_; }
  std::int64_t step() const { return step_; }
  bool done() const { return step_ >= total_steps(); }

  // One optimisation step on the next batch of the deterministic schedule.
  StepRecord train_step();
  // Runs until `until` (or the end) and returns the step records.
  std::vector<StepRecord> run(std::optional<std::int64_t> until = std::nullopt,
                              const std::function<void(const StepRecord&)>& on_step = {});

  // Scene indices (into the training list) of batch `step`.
  std::vector<int> batch_indices(std::int64_t step) const;

  const Model& model() const { return model_; }
  Model& mutable_model() { return model_; }
  Checkpoint checkpoint() const;
  const TrainConfig& config() const { return cfg_; }

 private:
  void setup(bool compute_stats);

  TrainConfig cfg_;
  Model model_;
  OptimizerState opt_;
  std::int64_t step_ = 0;
  int steps_per_epoch_ = 0;
  syn::Dataset data_;
  std::vector<const syn::SceneTriplet*> train_;
  ag::Mat raw_pc_;  // n_train x D_pc
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> history;
};

TrainResult train(const TrainConfig& cfg, const syn::Dataset& data);

// Retrieval with the 2D encoder only. Throws EmptySplit on an empty scene
// list and Error if the 3D branch runs during evaluation.
ret::RetrievalResult evaluate(const Model& m, const std::vector<const syn::SceneTriplet*>& scenes,
                              ret::Direction dir, const std::vector<int>& ks);
ret::RetrievalResult evaluate(const Model& m, const syn::Dataset& data, ret::Direction dir,
                              const std::vector<int>& ks, const std::vector<std::string>& splits = {});

// Image features (rows normalized) for a list of images.
ag::Mat encode_image_list(const Model& m, const std::vector<const Image*>& images, ViewTag view);

// Binary checkpoint: magic "GLCK", u32 version, u64 header length, JSON
// header (config, step, tensor table), then float64 payloads.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Drops the MME, projection, estimators, point-cloud statistics and their
// optimizer slots. Image encoder and temperature are kept.
Checkpoint strip_3d(const Checkpoint& ckpt);

// Loss log with one row per step.
void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& history);

struct AblationVariant {
  std::string name;
  bool mme, sc, ga, rd;
};

// baseline, baseline+mme (= cc only), +sc, +sc+ga, full.
std::vector<AblationVariant> standard_variants();
TrainConfig apply_variant(TrainConfig cfg, const AblationVariant& v);

}  // namespace geolink
