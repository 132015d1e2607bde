// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"

#include "geolink/error.hpp"
#include "geolink/pointcloud.hpp"
#include "geolink/pointcloud_io.hpp"
#include "oracles.hpp"

using namespace geolink;
using geolink::pc::Points;

namespace {

Points pts(std::initializer_list<std::array<double, 3>> rows) {
  Points p(static_cast<Eigen::Index>(rows.size()), 3);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    p.row(i++) << r[0], r[1], r[2];
  }
  return p;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

pc::EncoderConfig small_config() {
  pc::EncoderConfig c;
  c.num_stages = 2;
  c.k_neighbors = 4;
  c.initial_dim = 12;
  c.num_points = 32;
  return c;
}

// One pyramid level rebuilt from the oracle FPS and kNN plus pose_embed.
pc::PyramidStage oracle_stage(const pc::PyramidStage& s, const pc::EncoderConfig& cfg) {
  const int m = static_cast<int>(s.coords.rows());
  const int out_m = (m + 1) / 2;
  const int k = std::min(cfg.k_neighbors, m);
  const int width = static_cast<int>(s.feats.cols());
  const auto centers = oracle::fps(s.coords, out_m, pc::canonical_start(s.coords));
  Points cc(out_m, 3);
  for (int c = 0; c < out_m; ++c) cc.row(c) = s.coords.row(centers[static_cast<std::size_t>(c)]);
  const auto nbr = oracle::knn(cc, s.coords, k);
  double acc = 0.0;
  for (int c = 0; c < out_m; ++c) {
    for (int n : nbr[static_cast<std::size_t>(c)]) acc += oracle::dist2(s.coords, n, cc, c);
  }
  const double inv = 1.0 / (std::sqrt(acc / (out_m * k * 3.0)) + 1e-5);
  pc::PyramidStage out{cc, pc::Features::Zero(out_m, 2 * width), s.stage_index + 1};
  for (int c = 0; c < out_m; ++c) {
    for (int d = 0; d < width; ++d) {
      double mx = -1e300, sum = 0.0;
      for (int n : nbr[static_cast<std::size_t>(c)]) {
        Points rel(1, 3);
        rel.row(0) = (s.coords.row(n) - cc.row(c)) * inv;
        const double pe = pc::pose_embed(rel, width, cfg.pose_alpha, cfg.pose_beta)(0, d);
        const double v = (s.feats(n, d) + pe) * pe;
        mx = std::max(mx, v);
        sum += v;
      }
      out.feats(c, d) = mx;
      out.feats(c, width + d) = sum / k;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("pointcloud") {
  TEST_CASE("normalize_cloud worked examples") {
    CHECK(pc::normalize_cloud({pts({{0, 0, 0}}), "a"}).points.isZero());
    CHECK(pc::normalize_cloud({pts({{1, 0, 0}, {-1, 0, 0}}), "a"}).points.isApprox(pts({{1, 0, 0}, {-1, 0, 0}})));
    const Points n = pc::normalize_cloud({pts({{2, 0, 0}, {4, 0, 0}}), "a"}).points;
    CHECK(n.isApprox(pts({{-1, 0, 0}, {1, 0, 0}})));
    std::mt19937_64 rng(3);
    const Points r = pc::normalize_cloud({oracle::random_points(50, rng) * 7.0, "a"}).points;
    CHECK(r.colwise().mean().norm() < 1e-6);
    CHECK(r.rowwise().norm().maxCoeff() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(code_of([] { pc::normalize_cloud({pts({{0, NAN, 0}}), "a"}); }) == ErrorCode::NonFinite);
  }

  TEST_CASE("farthest point sampling examples") {
    const Points p = pts({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {10, 10, 10}});
    CHECK(pc::farthest_point_sampling(p, 2, 0) == std::vector<int>{0, 3});
    auto all = pc::farthest_point_sampling(p, 4, 1);
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<int>{0, 1, 2, 3});
    CHECK(code_of([&] { pc::farthest_point_sampling(p, 5, 0); }) == ErrorCode::BadSampleCount);
    CHECK(code_of([&] { pc::farthest_point_sampling(p, 0, 0); }) == ErrorCode::BadSampleCount);
  }

  TEST_CASE("farthest point sampling matches the greedy oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + static_cast<int>(rng() % 63);
      const Points p = oracle::random_points(n, rng);
      const int m = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
      const int start = static_cast<int>(rng() % static_cast<unsigned>(n));
      const auto expect = oracle::fps(p, m, start);
      CHECK(pc::farthest_point_sampling(p, m, start) == expect);
      CHECK(pc::reference::farthest_point_sampling(p, m, start) == expect);
    }
  }

  TEST_CASE("fps breaks ties by lowest index") {
    // Points 1 and 2 are equidistant from point 0.
    const Points p = pts({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}});
    CHECK(pc::farthest_point_sampling(p, 2, 0) == std::vector<int>{0, 1});
  }

  TEST_CASE("knn examples and oracle") {
    const auto one = pc::knn_group(pts({{0, 0, 0}}), pts({{0, 0, 0}, {5, 0, 0}}), 1);
    CHECK(one(0, 0) == 0);
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 1 + static_cast<int>(rng() % 64);
      const int q = 1 + static_cast<int>(rng() % 8);
      const Points refs = oracle::random_points(n, rng);
      const Points queries = oracle::random_points(q, rng);
      const int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
      const auto expect = oracle::knn(queries, refs, k);
      const auto got = pc::knn_group(queries, refs, k);
      const auto ref = pc::reference::knn_group(queries, refs, k);
      for (int i = 0; i < q; ++i) {
        for (int j = 0; j < k; ++j) {
          CHECK(got(i, j) == expect[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
          CHECK(ref(i, j) == got(i, j));
        }
      }
    }
    CHECK(code_of([] { pc::knn_group(pts({{0, 0, 0}}), pts({{0, 0, 0}}), 2); }) == ErrorCode::BadK);
  }

  TEST_CASE("pose_embed layout") {
    const auto z = pc::pose_embed(Points::Zero(2, 3), 12, 1000.0, 100.0);
    for (int d = 0; d < 12; ++d) CHECK(z(0, d) == (d % 2 == 0 ? 0.0 : 1.0));
    const Points p = pts({{0.5, -0.2, 0.1}});
    const auto e = pc::pose_embed(p, 12, 1000.0, 100.0);
    // dim 12: two frequencies per axis, 1000/100^0 and 1000/100^(1/2).
    const double xyz[3] = {0.5, -0.2, 0.1};
    const double freq[2] = {1000.0, 100.0};
    for (int a = 0; a < 3; ++a) {
      for (int j = 0; j < 2; ++j) {
        CHECK(e(0, a * 4 + 2 * j) == doctest::Approx(std::sin(freq[j] * xyz[a])).epsilon(1e-12));
        CHECK(e(0, a * 4 + 2 * j + 1) == doctest::Approx(std::cos(freq[j] * xyz[a])).epsilon(1e-12));
      }
    }
    CHECK(code_of([&] { pc::pose_embed(p, 10, 1000.0, 100.0); }) == ErrorCode::BadDim);
  }

  TEST_CASE("encode_stage matches the compositional oracle") {
    std::mt19937_64 rng(5);
    pc::EncoderConfig cfg = small_config();
    for (int n : {8, 9, 16}) {
      const Points p = pc::normalize_cloud({oracle::random_points(n, rng), "x"}).points;
      const auto s0 = pc::initial_stage(p, cfg);
      const auto got = pc::encode_stage(s0, cfg);
      const auto expect = oracle_stage(s0, cfg);
      CHECK(got.coords == expect.coords);
      CHECK((got.feats - expect.feats).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(got.feats.cols() == 2 * cfg.initial_dim);
    }
  }

  TEST_CASE("parallel and serial encoders agree bitwise") {
    std::mt19937_64 rng(6);
    pc::EncoderConfig cfg;
    cfg.num_points = 256;
    for (int t = 0; t < 3; ++t) {
      const pc::PointCloud c{oracle::random_points(256, rng), "c"};
      const Eigen::VectorXd a = pc::encode_pointcloud(c, cfg);
      const Eigen::VectorXd b = pc::reference::encode_pointcloud(c, cfg);
      CHECK(a.size() == cfg.output_dim());
      CHECK(a == b);
    }
  }

  TEST_CASE("encoder invariances") {
    std::mt19937_64 rng(7);
    const pc::EncoderConfig cfg = small_config();
    const pc::PointCloud c{oracle::random_points(32, rng), "c"};
    const Eigen::VectorXd base = pc::encode_pointcloud(c, cfg);
    CHECK(pc::encode_pointcloud(c, cfg) == base);

    // Row permutation.
    pc::PointCloud perm = c;
    std::vector<int> order(32);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < 32; ++i) perm.points.row(i) = c.points.row(order[static_cast<std::size_t>(i)]);
    CHECK(pc::encode_pointcloud(perm, cfg) == base);

    // Translation and positive scaling are removed by normalization.
    pc::PointCloud moved = c;
    moved.points = (c.points * 0.25).rowwise() + Eigen::RowVector3d(3.0, -1.0, 2.0);
    const Eigen::VectorXd m = pc::encode_pointcloud(moved, cfg);
    CHECK((m - base).cwiseAbs().maxCoeff() < 1e-3 * base.cwiseAbs().maxCoeff());

    // Distinct clouds give distinct encodings.
    for (int t = 0; t < 5; ++t) {
      const Eigen::VectorXd o = pc::encode_pointcloud({oracle::random_points(32, rng), "d"}, cfg);
      CHECK(o.dot(base) / (o.norm() * base.norm()) < 1.0 - 1e-4);
    }
  }

  TEST_CASE("identical points give identical per-point features") {
    const Points p = Points::Constant(4, 3, 0.3);
    pc::EncoderConfig cfg = small_config();
    cfg.normalize = false;
    const auto s = pc::encode_stage(pc::initial_stage(p, cfg), cfg);
    for (int r = 1; r < s.feats.rows(); ++r) CHECK(s.feats.row(r) == s.feats.row(0));
  }

  TEST_CASE("encoder input errors") {
    const pc::EncoderConfig cfg = small_config();
    CHECK(code_of([&] { pc::encode_pointcloud({Points(0, 3), "e"}, cfg); }) == ErrorCode::TooFewPoints);
    CHECK(code_of([&] { pc::encode_pointcloud({Points::Zero(3, 3), "e"}, cfg); }) == ErrorCode::TooFewPoints);
    Points bad = Points::Zero(8, 3);
    bad(2, 1) = INFINITY;
    CHECK(code_of([&] { pc::encode_pointcloud({bad, "e"}, cfg); }) == ErrorCode::NonFinite);
    pc::EncoderConfig wrong = cfg;
    wrong.initial_dim = 10;
    CHECK(code_of([&] { wrong.validate(); }) == ErrorCode::ConfigError);
    CHECK(pc::parameter_count(cfg) == 0);
    CHECK(pc::EncoderConfig{}.output_dim() == 2304);
  }

  TEST_CASE("invocation counter counts encoder calls") {
    std::mt19937_64 rng(8);
    const auto before = pc::invocation_count();
    pc::encode_pointcloud({oracle::random_points(32, rng), "c"}, small_config());
    CHECK(pc::invocation_count() == before + 1);
  }

  TEST_CASE("cloud file round trip and resampling") {
    const auto dir = std::filesystem::temp_directory_path() / "geolink_pc_io";
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(9);
    const pc::PointCloud c{oracle::random_points(20, rng).cast<float>().cast<double>(), "c"};
    pc::write_ply(dir / "a.ply", c);
    pc::write_xyz(dir / "a.xyz", c);
    CHECK(pc::read_cloud(dir / "a.ply").points == c.points);
    CHECK(pc::read_cloud(dir / "a.xyz").points == c.points);

    std::vector<std::string> warnings;
    const auto padded = pc::resample_cloud({c.points.topRows(3), "c"}, 1024, &warnings);
    CHECK(padded.points.rows() == 1024);
    CHECK(warnings.size() == 1);
    CHECK(pc::resample_cloud(c, 8).points.rows() == 8);

    std::ofstream(dir / "bad.ply") << "ply\nformat ascii 1.0\nproperty float x\nend_header\n";
    const auto code = code_of([&] { pc::read_ply(dir / "bad.ply"); });
    CHECK(code == ErrorCode::ParseError);
    try {
      pc::read_ply(dir / "bad.ply");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("element vertex") != std::string::npos);
    }
    CHECK(code_of([&] { pc::read_cloud(dir / "missing.ply"); }) == ErrorCode::MissingView);
    std::filesystem::remove_all(dir);
  }
}
