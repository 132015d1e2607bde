// SPDX-License-Identifier: Apache-2.0
//
// Cross-domain ablation orchestration: train on a source-style dataset,
// evaluate on a style-shifted target dataset, and sweep hyperparameters.
#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "geolink/trainer.hpp"

namespace geolink {

struct CrossDomainResult {
  std::string name;
  TrainConfig cfg;
  ret::RetrievalResult d2s;
  ret::RetrievalResult s2d;
  std::vector<StepRecord> history;
};

// Trains on every scene of `source` and evaluates on every scene of `target`.
CrossDomainResult run_cross_domain(const std::string& name, const TrainConfig& cfg, const syn::Dataset& source,
                                   const syn::Dataset& target, const std::vector<int>& ks = {1, 5, 10});

struct SweepPoint {
  std::string param;
  std::string value;
};

// One-at-a-time sweep: experts {1,3,7,15}, lambda_sc {0,1,2,4,8},
// vclub_hidden {16,64,256}.
std::vector<SweepPoint> sensitivity_grid();
// The five standard component variants as sweep points on the "variant" axis.
std::vector<SweepPoint> component_grid();

TrainConfig apply_sweep_point(TrainConfig cfg, const SweepPoint& p);

// Report ranked by target-domain drone->satellite R@1 (ties by AP, then by
// sweep order). Schema: {"grid", "ranking_metric", "runs": [{"rank",
// "param", "value", "config_hash", "d2s": {...}, "s2d": {...}}]}.
nlohmann::json ranked_report(const std::string& grid_name, const std::vector<SweepPoint>& points,
                             const std::vector<CrossDomainResult>& results);

// Throws ConfigError describing the first schema violation.
void validate_report(const nlohmann::json& report);

nlohmann::json result_json(const ret::RetrievalResult& r);

}  // namespace geolink
