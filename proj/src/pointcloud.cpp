// SPDX-License-Identifier: Apache-2.0
#include "geolink/pointcloud.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "geolink/error.hpp"
#include "geolink/nn.hpp"
#include "pointcloud_detail.hpp"

namespace geolink::pc {

namespace {

std::atomic<std::uint64_t> g_invocations{0};

// Below this many points the OpenMP region costs more than it saves.
constexpr int kParallelThreshold = 2048;

}  // namespace

void EncoderConfig::validate() const {
  require(num_stages >= 1, ErrorCode::ConfigError, "num_stages must be >= 1");
  require(num_stages <= 20, ErrorCode::ConfigError, "num_stages too large");
  require(k_neighbors >= 1, ErrorCode::ConfigError, "k_neighbors must be >= 1");
  require(initial_dim >= 6 && initial_dim % 6 == 0, ErrorCode::ConfigError,
          "initial_dim must be a positive multiple of 6");
  require(pose_beta > 0.0, ErrorCode::ConfigError, "pose_beta must be positive");
  require(num_points >= (1 << num_stages), ErrorCode::ConfigError,
          "num_points must be >= 2^num_stages");
}

std::uint64_t EncoderConfig::hash() const {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  auto fold = [&h](std::uint64_t v) { h = nn::mix_seed(h ^ v, 17); };
  fold(static_cast<std::uint64_t>(num_stages));
  fold(static_cast<std::uint64_t>(k_neighbors));
  fold(static_cast<std::uint64_t>(initial_dim));
  fold(std::bit_cast<std::uint64_t>(pose_alpha));
  fold(std::bit_cast<std::uint64_t>(pose_beta));
  fold(static_cast<std::uint64_t>(num_points));
  fold(normalize ? 1 : 0);
  fold(random_start ? 1 : 0);
  fold(start_seed);
  return h;
}

int EncoderConfig::output_dim() const { return 2 * initial_dim * (1 << num_stages); }

PointCloud normalize_cloud(const PointCloud& pc) {
  detail::check_cloud(pc.points);
  const Eigen::Index m = pc.points.rows();
  Eigen::RowVector3d centroid = Eigen::RowVector3d::Zero();
  for (Eigen::Index i = 0; i < m; ++i) centroid += pc.points.row(i);
  centroid /= static_cast<double>(m);

  Points centered = pc.points.rowwise() - centroid;
  double max_norm = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) max_norm = std::max(max_norm, centered.row(i).norm());

  PointCloud out{Points::Zero(m, 3), pc.scene_id};
  if (max_norm == 0.0) return out;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (int a = 0; a < 3; ++a) {
      out.points(i, a) = static_cast<double>(static_cast<float>(centered(i, a) / max_norm));
    }
  }
  return out;
}

int canonical_start(const Points& points) {
  require(points.rows() > 0, ErrorCode::TooFewPoints, "empty point set");
  int best = 0;
  for (int i = 1; i < static_cast<int>(points.rows()); ++i) {
    if (detail::lex_less(points, i, best)) best = i;
  }
  return best;
}

std::vector<int> farthest_point_sampling(const Points& points, int m, int start_index) {
  const int total = static_cast<int>(points.rows());
  detail::check_fps_args(total, m, start_index);

  std::vector<int> selected;
  selected.reserve(static_cast<std::size_t>(m));
  selected.push_back(start_index);
  std::vector<double> min_d(static_cast<std::size_t>(total), std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(total), 0);
  taken[static_cast<std::size_t>(start_index)] = 1;

  for (int s = 1; s < m; ++s) {
    const int last = selected.back();
    double best_val = -1.0;
    int best_idx = -1;
#pragma omp parallel if (total >= kParallelThreshold)
    {
      double local_val = -1.0;
      int local_idx = -1;
#pragma omp for schedule(static) nowait
      for (int i = 0; i < total; ++i) {
        const double d = detail::sq_dist(points, i, points, last);
        if (d < min_d[static_cast<std::size_t>(i)]) min_d[static_cast<std::size_t>(i)] = d;
        if (!taken[static_cast<std::size_t>(i)] && min_d[static_cast<std::size_t>(i)] > local_val) {
          local_val = min_d[static_cast<std::size_t>(i)];
          local_idx = i;
        }
      }
#pragma omp critical(geolink_fps_argmax)
      {
        if (local_idx >= 0 &&
            (local_val > best_val || (local_val == best_val && local_idx < best_idx))) {
          best_val = local_val;
          best_idx = local_idx;
        }
      }
    }
    taken[static_cast<std::size_t>(best_idx)] = 1;
    selected.push_back(best_idx);
  }
  return selected;
}

IndexMatrix knn_group(const Points& queries, const Points& references, int k) {
  const int total = static_cast<int>(references.rows());
  require(k >= 1 && k <= total, ErrorCode::BadK,
          "k=" + std::to_string(k) + " with " + std::to_string(total) + " references");
  const int nq = static_cast<int>(queries.rows());
  IndexMatrix out(nq, k);
#pragma omp parallel if (static_cast<long>(nq) * total >= 16L * kParallelThreshold)
  {
    std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(total));
#pragma omp for schedule(static)
    for (int q = 0; q < nq; ++q) {
      for (int r = 0; r < total; ++r) cand[static_cast<std::size_t>(r)] = {detail::sq_dist(queries, q, references, r), r};
      std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
      for (int j = 0; j < k; ++j) out(q, j) = cand[static_cast<std::size_t>(j)].second;
    }
  }
  return out;
}

Features pose_embed(const Points& coords, int dim, double alpha, double beta) {
  require(dim > 0 && dim % 6 == 0, ErrorCode::BadDim, "pose_embed dim " + std::to_string(dim) + " not divisible by 6");
  Features out(coords.rows(), dim);
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const double xyz[3] = {coords(i, 0), coords(i, 1), coords(i, 2)};
    detail::embed_into(xyz, dim, alpha, beta, out.row(i).data());
  }
  return out;
}

PyramidStage initial_stage(const Points& coords, const EncoderConfig& cfg) {
  return PyramidStage{coords, pose_embed(coords, cfg.initial_dim, cfg.pose_alpha, cfg.pose_beta), 0};
}

PyramidStage encode_stage(const PyramidStage& stage, const EncoderConfig& cfg) {
  const int m = static_cast<int>(stage.coords.rows());
  require(m >= 2, ErrorCode::TooFewPoints, "encode_stage needs at least 2 points");
  require(stage.feats.rows() == m, ErrorCode::DimMismatch, "coords/feats row mismatch");
  const int width = static_cast<int>(stage.feats.cols());
  require(width % 6 == 0, ErrorCode::BadDim, "stage width must be divisible by 6");

  const int out_m = (m + 1) / 2;
  const int k = std::min(cfg.k_neighbors, m);
  const std::vector<int> centers =
      farthest_point_sampling(stage.coords, out_m, detail::stage_start(stage, cfg));

  Points center_coords(out_m, 3);
  for (int c = 0; c < out_m; ++c) center_coords.row(c) = stage.coords.row(centers[static_cast<std::size_t>(c)]);
  const IndexMatrix nbr = knn_group(center_coords, stage.coords, k);
  const double inv_scale = detail::relative_inv_scale(stage.coords, center_coords, nbr);

  PyramidStage out{center_coords, Features(out_m, 2 * width), stage.stage_index + 1};
#pragma omp parallel if (static_cast<long>(out_m) * k * width >= 64L * kParallelThreshold)
  {
    detail::PoolScratch scratch(width);
#pragma omp for schedule(static)
    for (int c = 0; c < out_m; ++c) {
      detail::pool_center(stage, center_coords, nbr, c, inv_scale, cfg, scratch, out.feats.row(c).data());
    }
  }
  return out;
}

Eigen::VectorXd encode_pointcloud(const PointCloud& pc, const EncoderConfig& cfg) {
  g_invocations.fetch_add(1, std::memory_order_relaxed);
  cfg.validate();
  detail::check_cloud(pc.points);
  require(pc.points.rows() >= (1 << cfg.num_stages), ErrorCode::TooFewPoints,
          std::to_string(pc.points.rows()) + " points for " + std::to_string(cfg.num_stages) + " stages");

  const Points base = detail::canonical_points(pc, cfg.normalize);
  PyramidStage stage = initial_stage(base, cfg);
  for (int s = 0; s < cfg.num_stages; ++s) stage = encode_stage(stage, cfg);
  return detail::global_pool(stage.feats);
}

std::uint64_t invocation_count() { return g_invocations.load(std::memory_order_relaxed); }

namespace reference {

std::vector<int> farthest_point_sampling(const Points& points, int m, int start_index) {
  const int total = static_cast<int>(points.rows());
  detail::check_fps_args(total, m, start_index);
  std::vector<int> selected{start_index};
  std::vector<double> min_d(static_cast<std::size_t>(total), std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(total), 0);
  taken[static_cast<std::size_t>(start_index)] = 1;
  while (static_cast<int>(selected.size()) < m) {
    const int last = selected.back();
    int best = -1;
    for (int i = 0; i < total; ++i) {
      min_d[static_cast<std::size_t>(i)] = std::min(min_d[static_cast<std::size_t>(i)], detail::sq_dist(points, i, points, last));
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (best < 0 || min_d[static_cast<std::size_t>(i)] > min_d[static_cast<std::size_t>(best)]) best = i;
    }
    taken[static_cast<std::size_t>(best)] = 1;
    selected.push_back(best);
  }
  return selected;
}

IndexMatrix knn_group(const Points& queries, const Points& references, int k) {
  const int total = static_cast<int>(references.rows());
  require(k >= 1 && k <= total, ErrorCode::BadK, "k out of range");
  IndexMatrix out(queries.rows(), k);
  for (int q = 0; q < static_cast<int>(queries.rows()); ++q) {
    std::vector<std::pair<double, int>> cand;
    for (int r = 0; r < total; ++r) cand.emplace_back(detail::sq_dist(queries, q, references, r), r);
    std::sort(cand.begin(), cand.end());
    for (int j = 0; j < k; ++j) out(q, j) = cand[static_cast<std::size_t>(j)].second;
  }
  return out;
}

PyramidStage encode_stage(const PyramidStage& stage, const EncoderConfig& cfg) {
  const int m = static_cast<int>(stage.coords.rows());
  require(m >= 2, ErrorCode::TooFewPoints, "encode_stage needs at least 2 points");
  const int width = static_cast<int>(stage.feats.cols());
  const int out_m = (m + 1) / 2;
  const int k = std::min(cfg.k_neighbors, m);
  const std::vector<int> centers =
      reference::farthest_point_sampling(stage.coords, out_m, detail::stage_start(stage, cfg));
  Points center_coords(out_m, 3);
  for (int c = 0; c < out_m; ++c) center_coords.row(c) = stage.coords.row(centers[static_cast<std::size_t>(c)]);
  const IndexMatrix nbr = reference::knn_group(center_coords, stage.coords, k);
  const double inv_scale = detail::relative_inv_scale(stage.coords, center_coords, nbr);

  PyramidStage out{center_coords, Features(out_m, 2 * width), stage.stage_index + 1};
  for (int c = 0; c < out_m; ++c) {
    // Straight-line version: embed each offset, weight, then pool.
    Features grouped(k, width);
    for (int j = 0; j < k; ++j) {
      const int n = nbr(c, j);
      Points rel(1, 3);
      for (int a = 0; a < 3; ++a) rel(0, a) = (stage.coords(n, a) - center_coords(c, a)) * inv_scale;
      const Features pe = pose_embed(rel, width, cfg.pose_alpha, cfg.pose_beta);
      for (int d = 0; d < width; ++d) grouped(j, d) = (stage.feats(n, d) + pe(0, d)) * pe(0, d);
    }
    for (int d = 0; d < width; ++d) {
      double mx = grouped(0, d);
      double sum = grouped(0, d);
      for (int j = 1; j < k; ++j) {
        mx = std::max(mx, grouped(j, d));
        sum += grouped(j, d);
      }
      out.feats(c, d) = mx;
      out.feats(c, width + d) = sum / static_cast<double>(k);
    }
  }
  return out;
}

Eigen::VectorXd encode_pointcloud(const PointCloud& pc, const EncoderConfig& cfg) {
  cfg.validate();
  detail::check_cloud(pc.points);
  require(pc.points.rows() >= (1 << cfg.num_stages), ErrorCode::TooFewPoints, "too few points");
  const Points base = detail::canonical_points(pc, cfg.normalize);
  PyramidStage stage = initial_stage(base, cfg);
  for (int s = 0; s < cfg.num_stages; ++s) stage = reference::encode_stage(stage, cfg);
  return detail::global_pool(stage.feats);
}

}  // namespace reference

}  // namespace geolink::pc
