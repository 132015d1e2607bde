// SPDX-License-Identifier: Apache-2.0
//
// Internal helpers shared by the parallel and reference encoder kernels.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "geolink/error.hpp"
#include "geolink/nn.hpp"
#include "geolink/pointcloud.hpp"

namespace geolink::pc::detail {

inline double sq_dist(const Points& a, int i, const Points& b, int j) {
  const double dx = a(i, 0) - b(j, 0);
  const double dy = a(i, 1) - b(j, 1);
  const double dz = a(i, 2) - b(j, 2);
  return dx * dx + dy * dy + dz * dz;
}

inline bool lex_less(const Points& p, int i, int j) {
  for (int a = 0; a < 3; ++a) {
    if (p(i, a) < p(j, a)) return true;
    if (p(i, a) > p(j, a)) return false;
  }
  return false;
}

inline void check_cloud(const Points& points) {
  require(points.rows() >= 1, ErrorCode::TooFewPoints, "point cloud is empty");
  require(points.allFinite(), ErrorCode::NonFinite, "point cloud has NaN/Inf coordinates");
}

inline void check_fps_args(int total, int m, int start_index) {
  require(m >= 1 && m <= total, ErrorCode::BadSampleCount,
          "cannot sample " + std::to_string(m) + " of " + std::to_string(total) + " points");
  require(start_index >= 0 && start_index < total, ErrorCode::BadSampleCount,
          "start index " + std::to_string(start_index) + " out of range");
}

// Writes dim values: per axis a, block [a*dim/3, (a+1)*dim/3) holding
// interleaved sin/cos at frequencies alpha / beta^(j / (dim/6)).
inline void embed_into(const double xyz[3], int dim, double alpha, double beta, double* out) {
  const int per_axis = dim / 3;
  const int freqs = dim / 6;
  for (int a = 0; a < 3; ++a) {
    for (int j = 0; j < freqs; ++j) {
      const double denom = std::pow(beta, static_cast<double>(j) / static_cast<double>(freqs));
      const double arg = alpha * xyz[a] / denom;
      out[a * per_axis + 2 * j] = std::sin(arg);
      out[a * per_axis + 2 * j + 1] = std::cos(arg);
    }
  }
}

// Stable lexicographic sort of the rows.
inline Points canonical_order(const Points& p) {
  std::vector<int> idx(static_cast<std::size_t>(p.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&p](int i, int j) { return lex_less(p, i, j); });
  Points out(p.rows(), 3);
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = p.row(idx[r]);
  return out;
}

// Sorting before normalizing keeps the centroid sum independent of the input
// order; the second sort restores canonical order after rounding.
inline Points canonical_points(const PointCloud& pc, bool normalize) {
  Points sorted = canonical_order(pc.points);
  if (!normalize) return sorted;
  return canonical_order(normalize_cloud(PointCloud{sorted, pc.scene_id}).points);
}

inline int stage_start(const PyramidStage& stage, const EncoderConfig& cfg) {
  const int m = static_cast<int>(stage.coords.rows());
  if (!cfg.random_start) return canonical_start(stage.coords);
  std::mt19937_64 rng(nn::mix_seed(cfg.start_seed, static_cast<std::uint64_t>(stage.stage_index)));
  return static_cast<int>(rng() % static_cast<std::uint64_t>(m));
}

// 1 / (RMS of all neighbour offsets + 1e-5), accumulated in row order.
inline double relative_inv_scale(const Points& coords, const Points& centers, const IndexMatrix& nbr) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < nbr.rows(); ++c) {
    for (Eigen::Index j = 0; j < nbr.cols(); ++j) {
      acc += sq_dist(coords, nbr(c, j), centers, static_cast<int>(c));
    }
  }
  const double count = static_cast<double>(nbr.size()) * 3.0;
  return 1.0 / (std::sqrt(acc / count) + 1e-5);
}

struct PoolScratch {
  explicit PoolScratch(int width) : pe(static_cast<std::size_t>(width)) {}
  std::vector<double> pe;
};

// Pools the neighbourhood of center c into out[0, 2*width).
inline void pool_center(const PyramidStage& stage, const Points& centers, const IndexMatrix& nbr, int c,
                        double inv_scale, const EncoderConfig& cfg, PoolScratch& scratch, double* out) {
  const int width = static_cast<int>(stage.feats.cols());
  const int k = static_cast<int>(nbr.cols());
  for (int j = 0; j < k; ++j) {
    const int n = nbr(c, j);
    double rel[3];
    for (int a = 0; a < 3; ++a) rel[a] = (stage.coords(n, a) - centers(c, a)) * inv_scale;
    embed_into(rel, width, cfg.pose_alpha, cfg.pose_beta, scratch.pe.data());
    for (int d = 0; d < width; ++d) {
      const double pe = scratch.pe[static_cast<std::size_t>(d)];
      const double v = (stage.feats(n, d) + pe) * pe;
      if (j == 0) {
        out[d] = v;
        out[width + d] = v;
      } else {
        out[d] = std::max(out[d], v);
        out[width + d] += v;
      }
    }
  }
  for (int d = 0; d < width; ++d) out[width + d] /= static_cast<double>(k);
}

inline Eigen::VectorXd global_pool(const Features& feats) {
  const Eigen::Index w = feats.cols();
  Eigen::VectorXd out(2 * w);
  for (Eigen::Index d = 0; d < w; ++d) {
    double mx = feats(0, d);
    double sum = feats(0, d);
    for (Eigen::Index r = 1; r < feats.rows(); ++r) {
      mx = std::max(mx, feats(r, d));
      sum += feats(r, d);
    }
    out(d) = mx;
    out(w + d) = sum / static_cast<double>(feats.rows());
  }
  return out;
}

}  // namespace geolink::pc::detail
