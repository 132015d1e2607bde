// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geolink/pointcloud.hpp"

namespace geolink::pc {

// ASCII PLY with an `element vertex N` block carrying float x, y, z. Other
// vertex properties (colors, normals) are read past and dropped.
PointCloud read_ply(const std::filesystem::path& path);
// One `x y z` triple per line; blank lines and `#` comments are skipped.
PointCloud read_xyz(const std::filesystem::path& path);
// Dispatches on the extension (.ply / .xyz).
PointCloud read_cloud(const std::filesystem::path& path);

void write_xyz(const std::filesystem::path& path, const PointCloud& pc);
void write_ply(const std::filesystem::path& path, const PointCloud& pc);

// Brings a cloud to exactly num_points rows: FPS subsampling from the
// canonical start when larger, centroid padding when smaller. A warning is
// appended when padding happens.
PointCloud resample_cloud(const PointCloud& pc, int num_points, std::vector<std::string>* warnings = nullptr);

}  // namespace geolink::pc
