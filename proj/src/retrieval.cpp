// SPDX-License-Identifier: Apache-2.0
#include "geolink/retrieval.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "geolink/error.hpp"

namespace geolink::ret {

std::string to_string(Direction d) { return d == Direction::DroneToSatellite ? "d2s" : "s2d"; }

Direction parse_direction(const std::string& s) {
  if (s == "d2s") return Direction::DroneToSatellite;
  if (s == "s2d") return Direction::SatelliteToDrone;
  fail(ErrorCode::ConfigError, "unknown direction '" + s + "' (expected d2s or s2d)");
}

namespace {

void check_dims(const Mat& q, const Mat& g) {
  require(q.cols() == g.cols(), ErrorCode::DimMismatch,
          "query width " + std::to_string(q.cols()) + " != gallery width " + std::to_string(g.cols()));
}

void check_gt(const Mat& sims, const GroundTruth& gt) {
  require(static_cast<Eigen::Index>(gt.size()) == sims.rows(), ErrorCode::MissingGroundTruth,
          "ground truth covers " + std::to_string(gt.size()) + " of " + std::to_string(sims.rows()) + " queries");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    require(!gt[i].empty(), ErrorCode::MissingGroundTruth, "query " + std::to_string(i) + " has no relevant item");
    for (int g : gt[i]) {
      require(g >= 0 && g < sims.cols(), ErrorCode::MissingGroundTruth,
              "query " + std::to_string(i) + " references gallery index " + std::to_string(g));
    }
  }
}

}  // namespace

Mat similarity_matrix(const Mat& queries, const Mat& gallery) {
  check_dims(queries, gallery);
  Mat out(queries.rows(), gallery.rows());
  const Eigen::Index q = queries.rows();
  // Each entry is an independent dot product, so the result matches the
  // serial reference bit for bit.
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = 0; j < gallery.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < queries.cols(); ++d) s += queries(i, d) * gallery(j, d);
      out(i, j) = s;
    }
  }
  return out;
}

namespace reference {
Mat similarity_matrix(const Mat& queries, const Mat& gallery) {
  check_dims(queries, gallery);
  Mat out(queries.rows(), gallery.rows());
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    for (Eigen::Index j = 0; j < gallery.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < queries.cols(); ++d) s += queries(i, d) * gallery(j, d);
      out(i, j) = s;
    }
  }
  return out;
}
}  // namespace reference

std::vector<int> rank_gallery(const Mat& sims, Eigen::Index q) {
  std::vector<int> order(static_cast<std::size_t>(sims.cols()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sims(q, a) > sims(q, b); });
  return order;
}

namespace {

// 1-based ranks of every relevant item for one query, ascending.
std::vector<int> relevant_ranks(const Mat& sims, Eigen::Index q, const std::vector<int>& rel) {
  const std::set<int> relevant(rel.begin(), rel.end());
  const std::vector<int> order = rank_gallery(sims, q);
  std::vector<int> ranks;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (relevant.count(order[r]) != 0) ranks.push_back(static_cast<int>(r) + 1);
  }
  return ranks;
}

double query_ap(const std::vector<int>& ranks) {
  double ap = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) ap += static_cast<double>(i + 1) / ranks[i];
  return ap / static_cast<double>(ranks.size());
}

}  // namespace

double recall_at_k(const Mat& sims, const GroundTruth& gt, int k) {
  check_gt(sims, gt);
  require(sims.rows() > 0, ErrorCode::EmptySplit, "no queries");
  int hits = 0;
  for (Eigen::Index q = 0; q < sims.rows(); ++q) {
    if (relevant_ranks(sims, q, gt[static_cast<std::size_t>(q)]).front() <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(sims.rows());
}

double average_precision(const Mat& sims, const GroundTruth& gt) {
  check_gt(sims, gt);
  require(sims.rows() > 0, ErrorCode::EmptySplit, "no queries");
  double total = 0.0;
  for (Eigen::Index q = 0; q < sims.rows(); ++q) total += query_ap(relevant_ranks(sims, q, gt[static_cast<std::size_t>(q)]));
  return total / static_cast<double>(sims.rows());
}

RetrievalResult score(const Mat& sims, const GroundTruth& gt, const std::vector<int>& ks, Direction dir) {
  check_gt(sims, gt);
  require(sims.rows() > 0 && sims.cols() > 0, ErrorCode::EmptySplit, "empty query or gallery set");
  RetrievalResult r;
  r.direction = dir;
  r.n_query = static_cast<int>(sims.rows());
  r.n_gallery = static_cast<int>(sims.cols());
  std::vector<std::vector<int>> all_ranks(static_cast<std::size_t>(sims.rows()));
#pragma omp parallel for schedule(static)
  for (Eigen::Index q = 0; q < sims.rows(); ++q) {
    all_ranks[static_cast<std::size_t>(q)] = relevant_ranks(sims, q, gt[static_cast<std::size_t>(q)]);
  }
  double ap = 0.0;
  for (const auto& ranks : all_ranks) {
    r.per_query_ranks.push_back(ranks.front());
    ap += query_ap(ranks);
  }
  r.mean_ap = ap / static_cast<double>(sims.rows());
  for (int k : ks) {
    require(k >= 1, ErrorCode::ConfigError, "K must be >= 1");
    const auto hits = std::count_if(r.per_query_ranks.begin(), r.per_query_ranks.end(), [k](int rank) { return rank <= k; });
    r.recall_at[k] = static_cast<double>(hits) / static_cast<double>(sims.rows());
  }
  return r;
}

RetrievalResult average_results(const std::vector<RetrievalResult>& results) {
  require(!results.empty(), ErrorCode::EmptySplit, "nothing to average");
  RetrievalResult out;
  out.direction = results.front().direction;
  const double n = static_cast<double>(results.size());
  for (const auto& r : results) {
    require(r.recall_at.size() == results.front().recall_at.size(), ErrorCode::ConfigError,
            "results disagree on the K list");
    for (const auto& [k, v] : r.recall_at) out.recall_at[k] += v / n;
    out.mean_ap += r.mean_ap / n;
    out.n_query += r.n_query;
    out.n_gallery += r.n_gallery;
    out.per_query_ranks.insert(out.per_query_ranks.end(), r.per_query_ranks.begin(), r.per_query_ranks.end());
  }
  return out;
}

std::string to_json(const RetrievalResult& r, const std::string& config_hash) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& [k, v] : r.recall_at) {
    records.push_back({{"direction", to_string(r.direction)},
                       {"K", k},
                       {"R@K", v},
                       {"AP", r.mean_ap},
                       {"n_query", r.n_query},
                       {"n_gallery", r.n_gallery},
                       {"config_hash", config_hash}});
  }
  return records.dump(2);
}

std::string to_csv(const std::vector<std::pair<std::string, RetrievalResult>>& rows) {
  std::set<int> ks;
  for (const auto& row : rows) {
    for (const auto& kv : row.second.recall_at) ks.insert(kv.first);
  }
  std::ostringstream os;
  os << "method,direction";
  for (int k : ks) os << ",R@" << k;
  os << ",AP\n";
  for (const auto& [name, r] : rows) {
    os << name << ',' << to_string(r.direction);
    for (int k : ks) {
      auto it = r.recall_at.find(k);
      os << ',';
      if (it != r.recall_at.end()) os << 100.0 * it->second;
    }
    os << ',' << 100.0 * r.mean_ap << '\n';
  }
  return os.str();
}

}  // namespace geolink::ret
