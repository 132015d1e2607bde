// SPDX-License-Identifier: Apache-2.0
//
// Procedural cross-view scenes: a handful of boxes and cylinders on a unit
// ground square, rendered orthographically from oblique drone cameras and a
// top-down satellite camera, plus a surface point cloud. The appearance style
// (palette, noise, texture) is swappable while geometry stays a function of
// the seed alone.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "geolink/image.hpp"
#include "geolink/pointcloud.hpp"

namespace geolink::syn {

using Rgb = std::array<float, 3>;

enum class ShapeKind { Box, Cylinder };

struct Shape {
  ShapeKind kind = ShapeKind::Box;
  double cx = 0.0, cy = 0.0;
  // Box: full x/y extents. Cylinder: sx is the diameter, sy is ignored.
  double sx = 0.1, sy = 0.1;
  double height = 0.1;
  int color_index = 0;
};

struct DomainStyle {
  std::string name = "source";
  std::vector<Rgb> palette;
  Rgb ground{0.35f, 0.45f, 0.30f};
  double noise_sigma = 0.02;
  double texture_freq = 12.0;
  double texture_amp = 0.12;

  static DomainStyle source();
  // Rotated palette, shifted ground colour, stronger noise and a different
  // roof texture frequency.
  static DomainStyle target();
};

struct SceneSpec {
  std::string scene_id;
  std::vector<double> latent;  // unit vector
  std::vector<Shape> layout;
  DomainStyle style;
};

struct Camera {
  double azimuth_deg = 0.0;
  double elevation_deg = 90.0;
  // Full width of the square orthographic view window in scene units.
  double height = 1.0;
};

struct SceneTriplet {
  std::string scene_id;
  std::vector<Image> drone_images;
  Image satellite;
  pc::PointCloud cloud;
};

struct GeneratorConfig {
  int image_side = 32;
  int drone_views = 4;
  int num_points = 1024;
  int latent_dim = 8;
  int min_shapes = 3;
  int max_shapes = 6;
};

// Scene ids have the form "s<seed>-<index, 4 digits>".
std::string scene_id(std::uint64_t seed, int index);

// Layout and latent depend on (seed, index) only.
SceneSpec make_scene(std::uint64_t seed, int index, const DomainStyle& style, const GeneratorConfig& cfg);

// Throws BadCamera unless elevation is in (0, 90] and height > 0.
Image render_view(const SceneSpec& spec, const Camera& camera, int side);

// Adds N(0, sigma^2) pixel noise and clamps to [0, 1].
void add_noise(Image& img, double sigma, std::uint64_t seed);

// Area-weighted uniform samples on the shape surfaces.
pc::PointCloud sample_pointcloud(const SceneSpec& spec, int n, std::uint64_t seed);

// Oblique camera for drone view k of n.
Camera drone_camera(std::uint64_t seed, int index, int view, int n_views);
Camera satellite_camera();

SceneTriplet make_triplet(const SceneSpec& spec, std::uint64_t seed, int index, const GeneratorConfig& cfg);

struct Dataset {
  std::uint64_t seed = 0;
  std::string style;
  std::vector<SceneTriplet> scenes;
  // scene_id -> train / test / query / gallery
  std::map<std::string, std::string> splits;
};

// Throws ConfigError when n_scenes < 2.
Dataset generate_dataset(std::uint64_t seed, int n_scenes, const DomainStyle& style, const GeneratorConfig& cfg,
                         double train_fraction = 1.0);

struct TripletPaths {
  std::vector<std::filesystem::path> drone;
  std::filesystem::path satellite;
  std::filesystem::path cloud;
};

// Reads images and a point cloud from disk and resamples the cloud to
// num_points. Throws MissingView for absent files and ParseError for bad ones.
SceneTriplet load_external_triplet(const TripletPaths& paths, int num_points,
                                   std::vector<std::string>* warnings = nullptr);

// On-disk layout: <root>/<scene_id>/{drone_<k>,satellite}.(png|rt),
// <root>/<scene_id>/cloud.(ply|xyz) and <root>/manifest.json.
void save_dataset(const std::filesystem::path& root, const Dataset& ds, bool png = false);
// Loads every scene listed in the manifest whose split is in `splits` (all
// when empty).
Dataset load_dataset(const std::filesystem::path& root, const std::vector<std::string>& splits = {},
                     int num_points = 1024, std::vector<std::string>* warnings = nullptr);

}  // namespace geolink::syn
