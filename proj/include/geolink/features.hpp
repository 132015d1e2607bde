// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "geolink/autograd.hpp"

namespace geolink {

enum class ViewTag { Drone, Satellite, PointCloud };

std::string_view to_string(ViewTag v);

// B x D embeddings of one view, rows aligned with scene_ids.
struct FeatureBatch {
  ag::Var values;
  ViewTag view = ViewTag::Drone;
  std::vector<std::string> scene_ids;

  Eigen::Index size() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

// Unit-norm rows. Throws ZeroVector on an all-zero row.
FeatureBatch l2_normalize(const FeatureBatch& f);

}  // namespace geolink
