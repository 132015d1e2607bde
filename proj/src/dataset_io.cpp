// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include "json.hpp"

#include "geolink/error.hpp"
#include "geolink/pointcloud_io.hpp"
#include "geolink/synthetic.hpp"

namespace geolink::syn {

namespace fs = std::filesystem;

namespace {

fs::path find_with_ext(const fs::path& stem_path, std::initializer_list<const char*> exts) {
  for (const char* e : exts) {
    fs::path p = stem_path;
    p += e;
    if (fs::exists(p)) return p;
  }
  return {};
}

}  // namespace

void save_dataset(const fs::path& root, const Dataset& ds, bool png) {
  fs::create_directories(root);
  nlohmann::json manifest;
  manifest["seed"] = ds.seed;
  manifest["style"] = ds.style;
  manifest["scenes"] = nlohmann::json::array();
  for (const SceneTriplet& t : ds.scenes) {
    const fs::path dir = root / t.scene_id;
    fs::create_directories(dir);
    for (std::size_t k = 0; k < t.drone_images.size(); ++k) {
      const fs::path p = dir / ("drone_" + std::to_string(k) + (png ? ".png" : ".rt"));
      png ? write_png(p, t.drone_images[k]) : write_image_rt(p, t.drone_images[k]);
    }
    const fs::path sat = dir / (png ? "satellite.png" : "satellite.rt");
    png ? write_png(sat, t.satellite) : write_image_rt(sat, t.satellite);
    pc::write_ply(dir / "cloud.ply", t.cloud);
    auto it = ds.splits.find(t.scene_id);
    manifest["scenes"].push_back({{"id", t.scene_id},
                                  {"split", it == ds.splits.end() ? "train" : it->second},
                                  {"drone_views", t.drone_images.size()}});
  }
  std::ofstream out(root / "manifest.json");
  require(out.good(), ErrorCode::IoError, "cannot write " + (root / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& root, const std::vector<std::string>& splits, int num_points,
                     std::vector<std::string>* warnings) {
  const fs::path manifest_path = root / "manifest.json";
  require(fs::exists(manifest_path), ErrorCode::MissingView, "missing " + manifest_path.string());
  nlohmann::json manifest;
  try {
    std::ifstream in(manifest_path);
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, manifest_path.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
  require(manifest.contains("scenes") && manifest["scenes"].is_array(), ErrorCode::ParseError,
          manifest_path.string() + ": missing 'scenes' array");

  Dataset ds;
  ds.seed = manifest.value("seed", std::uint64_t{0});
  ds.style = manifest.value("style", std::string("external"));
  for (const auto& entry : manifest["scenes"]) {
    const std::string id = entry.at("id").get<std::string>();
    const std::string split = entry.value("split", std::string("train"));
    if (!splits.empty() && std::find(splits.begin(), splits.end(), split) == splits.end()) continue;
    const fs::path dir = root / id;
    TripletPaths paths;
    for (int k = 0;; ++k) {
      fs::path p = find_with_ext(dir / ("drone_" + std::to_string(k)), {".rt", ".png"});
      if (p.empty()) break;
      paths.drone.push_back(p);
    }
    require(!paths.drone.empty(), ErrorCode::MissingView, dir.string() + ": no drone_<k> image");
    paths.satellite = find_with_ext(dir / "satellite", {".rt", ".png"});
    require(!paths.satellite.empty(), ErrorCode::MissingView, dir.string() + ": no satellite image");
    paths.cloud = find_with_ext(dir / "cloud", {".ply", ".xyz"});
    require(!paths.cloud.empty(), ErrorCode::MissingView, dir.string() + ": no cloud.ply or cloud.xyz");
    SceneTriplet t = load_external_triplet(paths, num_points, warnings);
    t.scene_id = id;
    t.cloud.scene_id = id;
    ds.splits[id] = split;
    ds.scenes.push_back(std::move(t));
  }
  return ds;
}

}  // namespace geolink::syn
