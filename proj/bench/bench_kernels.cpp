// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels against their OpenMP counterparts. Run with
// OMP_NUM_THREADS set to compare thread counts.
#include <random>

#include <benchmark/benchmark.h>

#include "geolink/pointcloud.hpp"
#include "geolink/retrieval.hpp"

using namespace geolink;

namespace {

pc::Points cloud(int n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  pc::Points p(n, 3);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) p(i, c) = u(rng);
  }
  return p;
}

Eigen::MatrixXd features(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  m.rowwise().normalize();
  return m;
}

pc::EncoderConfig encoder() {
  pc::EncoderConfig cfg;
  cfg.num_points = 1024;
  return cfg;
}

void BM_fps_parallel(benchmark::State& s) {
  const auto p = cloud(static_cast<int>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(pc::farthest_point_sampling(p, static_cast<int>(s.range(0) / 2), 0));
}
void BM_fps_serial(benchmark::State& s) {
  const auto p = cloud(static_cast<int>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(pc::reference::farthest_point_sampling(p, static_cast<int>(s.range(0) / 2), 0));
}

void BM_knn_parallel(benchmark::State& s) {
  const auto p = cloud(static_cast<int>(s.range(0)));
  const pc::Points q = p.topRows(p.rows() / 2);
  for (auto _ : s) benchmark::DoNotOptimize(pc::knn_group(q, p, 16));
}
void BM_knn_serial(benchmark::State& s) {
  const auto p = cloud(static_cast<int>(s.range(0)));
  const pc::Points q = p.topRows(p.rows() / 2);
  for (auto _ : s) benchmark::DoNotOptimize(pc::reference::knn_group(q, p, 16));
}

void BM_stage_parallel(benchmark::State& s) {
  const auto cfg = encoder();
  const auto st = pc::initial_stage(cloud(1024), cfg);
  for (auto _ : s) benchmark::DoNotOptimize(pc::encode_stage(st, cfg));
}
void BM_stage_serial(benchmark::State& s) {
  const auto cfg = encoder();
  const auto st = pc::initial_stage(cloud(1024), cfg);
  for (auto _ : s) benchmark::DoNotOptimize(pc::reference::encode_stage(st, cfg));
}

void BM_encoder_parallel(benchmark::State& s) {
  const pc::PointCloud c{cloud(1024), "bench"};
  for (auto _ : s) benchmark::DoNotOptimize(pc::encode_pointcloud(c, encoder()));
}
void BM_encoder_serial(benchmark::State& s) {
  const pc::PointCloud c{cloud(1024), "bench"};
  for (auto _ : s) benchmark::DoNotOptimize(pc::reference::encode_pointcloud(c, encoder()));
}

void BM_similarity_parallel(benchmark::State& s) {
  const auto q = features(static_cast<int>(s.range(0)), 64, 1);
  const auto g = features(static_cast<int>(s.range(0)), 64, 2);
  for (auto _ : s) benchmark::DoNotOptimize(ret::similarity_matrix(q, g));
}
void BM_similarity_serial(benchmark::State& s) {
  const auto q = features(static_cast<int>(s.range(0)), 64, 1);
  const auto g = features(static_cast<int>(s.range(0)), 64, 2);
  for (auto _ : s) benchmark::DoNotOptimize(ret::reference::similarity_matrix(q, g));
}

}  // namespace

BENCHMARK(BM_fps_serial)->Arg(1024)->Arg(4096);
BENCHMARK(BM_fps_parallel)->Arg(1024)->Arg(4096);
BENCHMARK(BM_knn_serial)->Arg(1024)->Arg(4096);
BENCHMARK(BM_knn_parallel)->Arg(1024)->Arg(4096);
BENCHMARK(BM_stage_serial);
BENCHMARK(BM_stage_parallel);
BENCHMARK(BM_encoder_serial);
BENCHMARK(BM_encoder_parallel);
BENCHMARK(BM_similarity_serial)->Arg(256)->Arg(1024);
BENCHMARK(BM_similarity_parallel)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
