// SPDX-License-Identifier: Apache-2.0
#include "geolink/ablation.hpp"

#include <algorithm>
#include <numeric>

#include "geolink/error.hpp"

namespace geolink {

CrossDomainResult run_cross_domain(const std::string& name, const TrainConfig& cfg, const syn::Dataset& source,
                                   const syn::Dataset& target, const std::vector<int>& ks) {
  syn::Dataset train_set = source;
  for (auto& [id, split] : train_set.splits) split = "train";
  TrainResult tr = train(cfg, train_set);
  CrossDomainResult out;
  out.name = name;
  out.cfg = cfg;
  out.history = std::move(tr.history);
  out.d2s = evaluate(tr.checkpoint.model, target, ret::Direction::DroneToSatellite, ks);
  out.s2d = evaluate(tr.checkpoint.model, target, ret::Direction::SatelliteToDrone, ks);
  return out;
}

std::vector<SweepPoint> sensitivity_grid() {
  std::vector<SweepPoint> pts;
  for (const char* e : {"1", "3", "7", "15"}) pts.push_back({"experts", e});
  for (const char* l : {"0", "1", "2", "4", "8"}) pts.push_back({"lambda_sc", l});
  for (const char* h : {"16", "64", "256"}) pts.push_back({"vclub_hidden", h});
  return pts;
}

std::vector<SweepPoint> component_grid() {
  std::vector<SweepPoint> pts;
  for (const auto& v : standard_variants()) pts.push_back({"variant", v.name});
  return pts;
}

TrainConfig apply_sweep_point(TrainConfig cfg, const SweepPoint& p) {
  if (p.param == "variant") {
    for (const auto& v : standard_variants()) {
      if (v.name == p.value) return apply_variant(cfg, v);
    }
    fail(ErrorCode::ConfigError, "unknown ablation variant '" + p.value + "'");
  }
  cfg.set(p.param, p.value);
  cfg.validate();
  return cfg;
}

nlohmann::json result_json(const ret::RetrievalResult& r) {
  nlohmann::json j;
  j["direction"] = ret::to_string(r.direction);
  for (const auto& [k, v] : r.recall_at) j["R@" + std::to_string(k)] = v;
  j["AP"] = r.mean_ap;
  j["n_query"] = r.n_query;
  j["n_gallery"] = r.n_gallery;
  return j;
}

nlohmann::json ranked_report(const std::string& grid_name, const std::vector<SweepPoint>& points,
                             const std::vector<CrossDomainResult>& results) {
  require(points.size() == results.size(), ErrorCode::ConfigError, "sweep points and results differ in length");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  auto r1 = [&](std::size_t i) {
    const auto& m = results[i].d2s.recall_at;
    return m.empty() ? 0.0 : m.begin()->second;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (r1(a) != r1(b)) return r1(a) > r1(b);
    return results[a].d2s.mean_ap > results[b].d2s.mean_ap;
  });
  nlohmann::json report;
  report["grid"] = grid_name;
  report["ranking_metric"] = "d2s R@1";
  report["version"] = version();
  report["runs"] = nlohmann::json::array();
  int rank = 1;
  for (std::size_t i : order) {
    report["runs"].push_back({{"rank", rank++},
                              {"param", points[i].param},
                              {"value", points[i].value},
                              {"config_hash", results[i].cfg.hash_hex()},
                              {"d2s", result_json(results[i].d2s)},
                              {"s2d", result_json(results[i].s2d)}});
  }
  return report;
}

void validate_report(const nlohmann::json& report) {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::ConfigError, "report schema: " + what); };
  check(report.is_object(), "top level must be an object");
  check(report.contains("grid") && report["grid"].is_string(), "missing string 'grid'");
  check(report.contains("ranking_metric") && report["ranking_metric"].is_string(), "missing 'ranking_metric'");
  check(report.contains("runs") && report["runs"].is_array() && !report["runs"].empty(), "missing non-empty 'runs'");
  int expected_rank = 1;
  double prev = 2.0;
  for (const auto& run : report["runs"]) {
    check(run.contains("rank") && run["rank"].is_number_integer() && run["rank"].get<int>() == expected_rank++,
          "ranks must be 1..n in order");
    for (const char* key : {"param", "value", "config_hash"}) check(run.contains(key) && run[key].is_string(), std::string("run missing ") + key);
    for (const char* dir : {"d2s", "s2d"}) {
      check(run.contains(dir) && run[dir].is_object(), std::string("run missing ") + dir);
      const auto& r = run[dir];
      check(r.contains("R@1") && r["R@1"].is_number(), std::string(dir) + " missing R@1");
      check(r.contains("AP") && r["AP"].is_number(), std::string(dir) + " missing AP");
      for (const auto& [key, value] : r.items()) {
        if (value.is_number_float()) check(value.get<double>() >= 0.0 && value.get<double>() <= 1.0, key + " outside [0, 1]");
      }
    }
    const double r1 = run["d2s"]["R@1"].get<double>();
    check(r1 <= prev, "runs not sorted by d2s R@1");
    prev = r1;
  }
}

}  // namespace geolink
