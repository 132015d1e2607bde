// SPDX-License-Identifier: Apache-2.0
//
// Parameter-free point-cloud encoder: a pyramid of farthest-point sampling,
// k-nearest-neighbour grouping and max/mean pooling over trigonometric
// position embeddings. Every kernel exists in two forms: the OpenMP version
// in geolink::pc and a plain serial version in geolink::pc::reference that
// tests and benchmarks compare against. Both produce bitwise-identical output.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace geolink::pc {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Features = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PointCloud {
  Points points;
  std::string scene_id;
};

struct EncoderConfig {
  int num_stages = 4;
  int k_neighbors = 16;
  int initial_dim = 72;
  double pose_alpha = 1000.0;
  double pose_beta = 100.0;
  int num_points = 1024;
  // When false the cloud is encoded in its input frame.
  bool normalize = true;
  // Seeded random FPS start instead of the canonical lowest point.
  bool random_start = false;
  std::uint64_t start_seed = 0;

  // Throws ConfigError on an invariant violation.
  void validate() const;
  std::uint64_t hash() const;
  // 2 * initial_dim * 2^num_stages.
  int output_dim() const;
};

// Coordinates plus per-point features at one pyramid level.
struct PyramidStage {
  Points coords;
  Features feats;
  int stage_index = 0;
};

// Centers at the origin, scales the farthest point to unit norm and rounds
// coordinates to float precision. A cloud whose points all coincide maps to
// zeros. Throws NonFinite on NaN/Inf.
PointCloud normalize_cloud(const PointCloud& pc);

// Greedy farthest-point sampling. Ties go to the lowest index.
// Throws BadSampleCount when m > M or m < 1.
std::vector<int> farthest_point_sampling(const Points& points, int m, int start_index);

// Row i: indices of the k nearest references to query i, ascending distance,
// ties by lowest index. Throws BadK when k > M or k < 1.
IndexMatrix knn_group(const Points& queries, const Points& references, int k);

// sin/cos(alpha * c / beta^(6j/dim)) per axis; layout per axis block of dim/3
// columns is [sin_0, cos_0, sin_1, cos_1, ...]. Throws BadDim if dim % 6 != 0.
Features pose_embed(const Points& coords, int dim, double alpha, double beta);

// Index of the lexicographically smallest point (lowest index on ties).
int canonical_start(const Points& points);

// Stage 0: position embedding of the (already normalized) coordinates.
PyramidStage initial_stage(const Points& coords, const EncoderConfig& cfg);

// One downsampling level: ceil(m/2) FPS centers, kNN grouping with
// relative-position weighting, concatenated max and mean pooling.
// The neighbour count is min(k_neighbors, m).
PyramidStage encode_stage(const PyramidStage& stage, const EncoderConfig& cfg);

// Full encoder: optional normalization, canonical point ordering, pyramid,
// global max+mean pooling. Output length cfg.output_dim().
Eigen::VectorXd encode_pointcloud(const PointCloud& pc, const EncoderConfig& cfg);

// The encoder has no trainable parameters.
constexpr std::size_t parameter_count(const EncoderConfig&) { return 0; }

// Number of encode_pointcloud calls since process start (all threads).
std::uint64_t invocation_count();

namespace reference {

std::vector<int> farthest_point_sampling(const Points& points, int m, int start_index);
IndexMatrix knn_group(const Points& queries, const Points& references, int k);
PyramidStage encode_stage(const PyramidStage& stage, const EncoderConfig& cfg);
Eigen::VectorXd encode_pointcloud(const PointCloud& pc, const EncoderConfig& cfg);

}  // namespace reference

}  // namespace geolink::pc
