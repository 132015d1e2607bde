// SPDX-License-Identifier: Apache-2.0
#include "geolink/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include "geolink/error.hpp"
#include "geolink/nn.hpp"
#include "geolink/pointcloud_io.hpp"

namespace geolink::syn {

namespace {

constexpr double kPi = std::numbers::pi;

struct Vec3 {
  double x, y, z;
};

Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }

std::uint64_t scene_seed(std::uint64_t seed, int index) { return nn::mix_seed(seed, static_cast<std::uint64_t>(index)); }

// Face shading factors by hit surface.
enum class Surface { Ground, Top, SideX, SideY, CylSide };

float shade(Surface s) {
  switch (s) {
    case Surface::Top: return 1.0f;
    case Surface::SideX: return 0.72f;
    case Surface::SideY: return 0.58f;
    case Surface::CylSide: return 0.66f;
    case Surface::Ground: return 1.0f;
  }
  return 1.0f;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Surface surface = Surface::Ground;
  int shape = -1;
};

void intersect_box(const Shape& b, Vec3 o, Vec3 d, int idx, Hit& best) {
  const double lo[3] = {b.cx - b.sx / 2, b.cy - b.sy / 2, 0.0};
  const double hi[3] = {b.cx + b.sx / 2, b.cy + b.sy / 2, b.height};
  const double oo[3] = {o.x, o.y, o.z};
  const double dd[3] = {d.x, d.y, d.z};
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dd[a]) < 1e-12) {
      if (oo[a] < lo[a] || oo[a] > hi[a]) return;
      continue;
    }
    double t0 = (lo[a] - oo[a]) / dd[a];
    double t1 = (hi[a] - oo[a]) / dd[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      axis = a;
    }
    tmax = std::min(tmax, t1);
  }
  if (tmin > tmax || tmin < 0.0 || tmin >= best.t) return;
  best.t = tmin;
  best.shape = idx;
  best.surface = axis == 2 ? Surface::Top : (axis == 0 ? Surface::SideX : Surface::SideY);
}

void intersect_cylinder(const Shape& c, Vec3 o, Vec3 d, int idx, Hit& best) {
  const double r = c.sx / 2;
  // Top cap.
  if (std::abs(d.z) > 1e-12) {
    const double t = (c.height - o.z) / d.z;
    const double px = o.x + t * d.x - c.cx;
    const double py = o.y + t * d.y - c.cy;
    if (t >= 0.0 && px * px + py * py <= r * r && t < best.t) {
      best = Hit{t, Surface::Top, idx};
    }
  }
  // Lateral surface.
  const double ox = o.x - c.cx;
  const double oy = o.y - c.cy;
  const double a = d.x * d.x + d.y * d.y;
  if (a < 1e-12) return;
  const double b = 2.0 * (ox * d.x + oy * d.y);
  const double cc = ox * ox + oy * oy - r * r;
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return;
  const double t = (-b - std::sqrt(disc)) / (2.0 * a);
  const double z = o.z + t * d.z;
  if (t >= 0.0 && z >= 0.0 && z <= c.height && t < best.t) best = Hit{t, Surface::CylSide, idx};
}

bool overlaps(const Shape& a, const Shape& b) {
  const double ay = a.kind == ShapeKind::Cylinder ? a.sx : a.sy;
  const double by = b.kind == ShapeKind::Cylinder ? b.sx : b.sy;
  return std::abs(a.cx - b.cx) * 2 < a.sx + b.sx + 0.02 && std::abs(a.cy - b.cy) * 2 < ay + by + 0.02;
}

}  // namespace

DomainStyle DomainStyle::source() {
  DomainStyle s;
  s.name = "source";
  s.palette = {Rgb{0.85f, 0.20f, 0.18f}, Rgb{0.20f, 0.35f, 0.85f}, Rgb{0.92f, 0.85f, 0.25f},
               Rgb{0.95f, 0.95f, 0.95f}, Rgb{0.25f, 0.80f, 0.80f}, Rgb{0.70f, 0.30f, 0.75f}};
  s.ground = Rgb{0.35f, 0.45f, 0.30f};
  s.noise_sigma = 0.02;
  s.texture_freq = 12.0;
  s.texture_amp = 0.12;
  return s;
}

DomainStyle DomainStyle::target() {
  const DomainStyle src = source();
  DomainStyle s;
  s.name = "target";
  const std::size_t n = src.palette.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Rgb& c = src.palette[(i + 2) % n];
    s.palette.push_back(Rgb{c[1], c[2], c[0]});
  }
  s.ground = Rgb{0.55f, 0.50f, 0.38f};
  s.noise_sigma = 0.06;
  s.texture_freq = 22.0;
  s.texture_amp = 0.2;
  return s;
}

std::string scene_id(std::uint64_t seed, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "s%llu-%04d", static_cast<unsigned long long>(seed), index);
  return buf;
}

SceneSpec make_scene(std::uint64_t seed, int index, const DomainStyle& style, const GeneratorConfig& cfg) {
  require(cfg.min_shapes >= 1 && cfg.max_shapes >= cfg.min_shapes, ErrorCode::ConfigError, "bad shape count range");
  require(!style.palette.empty(), ErrorCode::ConfigError, "style palette is empty");
  std::mt19937_64 rng(scene_seed(seed, index));
  SceneSpec spec;
  spec.scene_id = scene_id(seed, index);
  spec.style = style;

  std::normal_distribution<double> gauss;
  double norm = 0.0;
  spec.latent.resize(static_cast<std::size_t>(cfg.latent_dim));
  for (double& v : spec.latent) {
    v = gauss(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : spec.latent) v /= norm;

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int k = std::uniform_int_distribution<int>(cfg.min_shapes, cfg.max_shapes)(rng);
  for (int attempt = 0; attempt < 200 && static_cast<int>(spec.layout.size()) < k; ++attempt) {
    Shape s;
    s.kind = u01(rng) < 0.7 ? ShapeKind::Box : ShapeKind::Cylinder;
    s.sx = 0.10 + 0.22 * u01(rng);
    s.sy = s.kind == ShapeKind::Box ? 0.10 + 0.22 * u01(rng) : s.sx;
    s.height = 0.05 + 0.35 * u01(rng);
    s.cx = -0.5 + s.sx / 2 + (1.0 - s.sx) * u01(rng);
    s.cy = -0.5 + s.sy / 2 + (1.0 - s.sy) * u01(rng);
    s.color_index = static_cast<int>(u01(rng) * static_cast<double>(style.palette.size())) %
                    static_cast<int>(style.palette.size());
    const bool clash = std::any_of(spec.layout.begin(), spec.layout.end(), [&](const Shape& o) { return overlaps(s, o); });
    if (!clash) spec.layout.push_back(s);
  }
  return spec;
}

Image render_view(const SceneSpec& spec, const Camera& camera, int side) {
  require(camera.elevation_deg > 0.0 && camera.elevation_deg <= 90.0, ErrorCode::BadCamera,
          "elevation " + std::to_string(camera.elevation_deg) + " outside (0, 90]");
  require(camera.height > 0.0 && std::isfinite(camera.height), ErrorCode::BadCamera, "view height must be positive");
  require(std::isfinite(camera.azimuth_deg), ErrorCode::BadCamera, "azimuth must be finite");
  require(side >= 1, ErrorCode::ShapeError, "image side must be positive");

  const double a = camera.azimuth_deg * kPi / 180.0;
  const double e = camera.elevation_deg * kPi / 180.0;
  const Vec3 d{-std::cos(e) * std::cos(a), -std::cos(e) * std::sin(a), -std::sin(e)};
  const Vec3 right{-std::sin(a), std::cos(a), 0.0};
  const Vec3 up{-std::sin(e) * std::cos(a), -std::sin(e) * std::sin(a), std::cos(e)};
  const double half = camera.height / 2.0;

  Image img = Image::filled(3, side, side);
  for (int py = 0; py < side; ++py) {
    for (int px = 0; px < side; ++px) {
      const double s = ((px + 0.5) / side * 2.0 - 1.0) * half;
      const double t = (1.0 - (py + 0.5) / side * 2.0) * half;
      const Vec3 o = s * right + t * up + (-10.0) * d;
      Hit hit;
      for (std::size_t i = 0; i < spec.layout.size(); ++i) {
        const Shape& sh = spec.layout[i];
        if (sh.kind == ShapeKind::Box) {
          intersect_box(sh, o, d, static_cast<int>(i), hit);
        } else {
          intersect_cylinder(sh, o, d, static_cast<int>(i), hit);
        }
      }
      Rgb colour = spec.style.ground;
      if (hit.shape >= 0) {
        const Shape& sh = spec.layout[static_cast<std::size_t>(hit.shape)];
        const Rgb& base = spec.style.palette[static_cast<std::size_t>(sh.color_index) % spec.style.palette.size()];
        float f = shade(hit.surface);
        if (hit.surface == Surface::Top) {
          const Vec3 p = o + hit.t * d;
          f *= static_cast<float>(1.0 + spec.style.texture_amp * std::sin(spec.style.texture_freq * kPi * (p.x + p.y)));
        }
        colour = Rgb{base[0] * f, base[1] * f, base[2] * f};
      }
      for (int c = 0; c < 3; ++c) img.at(c, py, px) = std::clamp(colour[static_cast<std::size_t>(c)], 0.0f, 1.0f);
    }
  }
  return img;
}

void add_noise(Image& img, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (float& v : img.data) v = std::clamp(static_cast<float>(v + gauss(rng)), 0.0f, 1.0f);
}

pc::PointCloud sample_pointcloud(const SceneSpec& spec, int n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::BadSampleCount, "point count must be >= 1");
  require(!spec.layout.empty(), ErrorCode::ConfigError, "cannot sample an empty layout");

  // Surface patches: (shape, face) with face ids 0..5 for boxes
  // (x-, x+, y-, y+, bottom, top) and 0..2 for cylinders (side, bottom, top).
  struct Patch {
    int shape;
    int face;
    double area;
  };
  std::vector<Patch> patches;
  for (std::size_t i = 0; i < spec.layout.size(); ++i) {
    const Shape& s = spec.layout[i];
    const int si = static_cast<int>(i);
    if (s.kind == ShapeKind::Box) {
      patches.push_back({si, 0, s.sy * s.height});
      patches.push_back({si, 1, s.sy * s.height});
      patches.push_back({si, 2, s.sx * s.height});
      patches.push_back({si, 3, s.sx * s.height});
      patches.push_back({si, 4, s.sx * s.sy});
      patches.push_back({si, 5, s.sx * s.sy});
    } else {
      const double r = s.sx / 2;
      patches.push_back({si, 0, 2.0 * kPi * r * s.height});
      patches.push_back({si, 1, kPi * r * r});
      patches.push_back({si, 2, kPi * r * r});
    }
  }
  std::vector<double> weights;
  for (const Patch& p : patches) weights.push_back(p.area);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::mt19937_64 rng(seed);

  pc::PointCloud cloud;
  cloud.scene_id = spec.scene_id;
  cloud.points.resize(n, 3);
  for (int k = 0; k < n; ++k) {
    const Patch& p = patches[static_cast<std::size_t>(pick(rng))];
    const Shape& s = spec.layout[static_cast<std::size_t>(p.shape)];
    const double u = u01(rng);
    const double v = u01(rng);
    double x = 0, y = 0, z = 0;
    if (s.kind == ShapeKind::Box) {
      const double x0 = s.cx - s.sx / 2, y0 = s.cy - s.sy / 2;
      switch (p.face) {
        case 0: x = x0; y = y0 + u * s.sy; z = v * s.height; break;
        case 1: x = x0 + s.sx; y = y0 + u * s.sy; z = v * s.height; break;
        case 2: x = x0 + u * s.sx; y = y0; z = v * s.height; break;
        case 3: x = x0 + u * s.sx; y = y0 + s.sy; z = v * s.height; break;
        case 4: x = x0 + u * s.sx; y = y0 + v * s.sy; z = 0.0; break;
        default: x = x0 + u * s.sx; y = y0 + v * s.sy; z = s.height; break;
      }
    } else {
      const double r = s.sx / 2;
      const double ang = 2.0 * kPi * u;
      if (p.face == 0) {
        x = s.cx + r * std::cos(ang);
        y = s.cy + r * std::sin(ang);
        z = v * s.height;
      } else {
        const double rr = r * std::sqrt(v);
        x = s.cx + rr * std::cos(ang);
        y = s.cy + rr * std::sin(ang);
        z = p.face == 1 ? 0.0 : s.height;
      }
    }
    cloud.points.row(k) << x, y, z;
  }
  return cloud;
}

Camera drone_camera(std::uint64_t seed, int index, int view, int n_views) {
  std::mt19937_64 rng(nn::mix_seed(scene_seed(seed, index), 100 + static_cast<std::uint64_t>(view)));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Camera c;
  c.azimuth_deg = 360.0 * view / std::max(1, n_views) + (u01(rng) * 40.0 - 20.0);
  c.elevation_deg = 45.0 + 25.0 * u01(rng);
  c.height = 1.1 + 0.3 * u01(rng);
  return c;
}

Camera satellite_camera() { return Camera{0.0, 90.0, 1.0}; }

SceneTriplet make_triplet(const SceneSpec& spec, std::uint64_t seed, int index, const GeneratorConfig& cfg) {
  require(cfg.drone_views >= 1, ErrorCode::ConfigError, "need at least one drone view");
  const std::uint64_t base = scene_seed(seed, index);
  SceneTriplet t;
  t.scene_id = spec.scene_id;
  for (int v = 0; v < cfg.drone_views; ++v) {
    Image img = render_view(spec, drone_camera(seed, index, v, cfg.drone_views), cfg.image_side);
    add_noise(img, spec.style.noise_sigma, nn::mix_seed(base, 200 + static_cast<std::uint64_t>(v)));
    t.drone_images.push_back(std::move(img));
  }
  t.satellite = render_view(spec, satellite_camera(), cfg.image_side);
  add_noise(t.satellite, spec.style.noise_sigma, nn::mix_seed(base, 300));
  t.cloud = sample_pointcloud(spec, cfg.num_points, nn::mix_seed(base, 7));
  return t;
}

Dataset generate_dataset(std::uint64_t seed, int n_scenes, const DomainStyle& style, const GeneratorConfig& cfg,
                         double train_fraction) {
  require(n_scenes >= 2, ErrorCode::ConfigError, "n_scenes must be >= 2");
  require(train_fraction >= 0.0 && train_fraction <= 1.0, ErrorCode::ConfigError, "train_fraction outside [0, 1]");
  Dataset ds;
  ds.seed = seed;
  ds.style = style.name;
  ds.scenes.resize(static_cast<std::size_t>(n_scenes));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_scenes; ++i) {
    ds.scenes[static_cast<std::size_t>(i)] = make_triplet(make_scene(seed, i, style, cfg), seed, i, cfg);
  }
  const int n_train = static_cast<int>(std::floor(train_fraction * n_scenes));
  for (int i = 0; i < n_scenes; ++i) ds.splits[ds.scenes[static_cast<std::size_t>(i)].scene_id] = i < n_train ? "train" : "test";
  return ds;
}

SceneTriplet load_external_triplet(const TripletPaths& paths, int num_points, std::vector<std::string>* warnings) {
  require(!paths.drone.empty(), ErrorCode::MissingView, "no drone images given");
  auto need = [](const std::filesystem::path& p, const char* what) {
    require(std::filesystem::exists(p), ErrorCode::MissingView, std::string("missing ") + what + ": " + p.string());
  };
  for (const auto& p : paths.drone) need(p, "drone image");
  need(paths.satellite, "satellite image");
  need(paths.cloud, "point cloud");
  SceneTriplet t;
  for (const auto& p : paths.drone) t.drone_images.push_back(read_image(p));
  t.satellite = read_image(paths.satellite);
  t.cloud = pc::resample_cloud(pc::read_cloud(paths.cloud), num_points, warnings);
  t.scene_id = t.cloud.scene_id;
  return t;
}

}  // namespace geolink::syn
