// SPDX-License-Identifier: Apache-2.0
//
// Cosine retrieval metrics. Rankings break similarity ties by the lowest
// gallery index.
#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geolink::ret {

using Mat = Eigen::MatrixXd;

enum class Direction { DroneToSatellite, SatelliteToDrone };

std::string to_string(Direction d);
// Accepts "d2s" / "s2d". Throws ConfigError otherwise.
Direction parse_direction(const std::string& s);

// Ground truth per query: the set of relevant gallery indices.
using GroundTruth = std::vector<std::vector<int>>;

struct RetrievalResult {
  Direction direction = Direction::DroneToSatellite;
  std::map<int, double> recall_at;
  double mean_ap = 0.0;
  std::vector<int> per_query_ranks;  // 1-based rank of the best relevant item
  int n_query = 0;
  int n_gallery = 0;
};

// Q x G dot products of row-normalized inputs. Throws DimMismatch.
Mat similarity_matrix(const Mat& queries, const Mat& gallery);

// Gallery indices in ranked order for query row q.
std::vector<int> rank_gallery(const Mat& sims, Eigen::Index q);

double recall_at_k(const Mat& sims, const GroundTruth& gt, int k);
double average_precision(const Mat& sims, const GroundTruth& gt);

// Full metric bundle over a similarity matrix.
RetrievalResult score(const Mat& sims, const GroundTruth& gt, const std::vector<int>& ks, Direction dir);

// Element-wise mean of results that share the same K list.
RetrievalResult average_results(const std::vector<RetrievalResult>& results);

// JSON records {direction, K, R@K, AP, n_query, n_gallery, config_hash}.
std::string to_json(const RetrievalResult& r, const std::string& config_hash);
// CSV header plus one row per result.
std::string to_csv(const std::vector<std::pair<std::string, RetrievalResult>>& rows);

namespace reference {
Mat similarity_matrix(const Mat& queries, const Mat& gallery);
}

}  // namespace geolink::ret
