// SPDX-License-Identifier: Apache-2.0
#include "geolink/pointcloud_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "geolink/error.hpp"

namespace geolink::pc {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void parse_fail(const fs::path& path, std::size_t line, const std::string& what) {
  fail(ErrorCode::ParseError, path.string() + ": line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::ifstream open_or_throw(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingView, "cannot open " + path.string());
  return in;
}

std::string scene_from_path(const fs::path& path) { return path.parent_path().filename().string(); }

}  // namespace

PointCloud read_ply(const fs::path& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  std::size_t lineno = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") parse_fail(path, lineno == 0 ? 1 : lineno, "missing 'ply' magic");

  long vertex_count = -1;
  bool in_vertex = false;
  bool ascii = false;
  int prop_count = 0;
  int ix = -1, iy = -1, iz = -1;
  bool header_done = false;
  while (next_line()) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") {
      header_done = true;
      break;
    }
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") parse_fail(path, lineno, "only ascii PLY is supported");
      ascii = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_fail(path, lineno, "malformed element line");
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        double n = 0;
        if (!parse_double(tok[2], n) || n < 0) parse_fail(path, lineno, "bad vertex count '" + tok[2] + "'");
        vertex_count = static_cast<long>(n);
      }
    } else if (tok[0] == "property") {
      if (!in_vertex) continue;
      if (tok.size() < 3) parse_fail(path, lineno, "malformed property line");
      if (tok[1] == "list") parse_fail(path, lineno, "list properties are not supported on vertices");
      const std::string& name = tok.back();
      if (name == "x") ix = prop_count;
      if (name == "y") iy = prop_count;
      if (name == "z") iz = prop_count;
      ++prop_count;
    } else {
      parse_fail(path, lineno, "unexpected header line '" + tok[0] + "'");
    }
  }
  if (!header_done) parse_fail(path, lineno + 1, "header truncated before 'end_header'");
  if (!ascii) parse_fail(path, lineno, "header missing 'format ascii 1.0' line");
  if (vertex_count < 0) parse_fail(path, lineno, "header missing 'element vertex N' line");
  if (ix < 0 || iy < 0 || iz < 0) parse_fail(path, lineno, "vertex element lacks x/y/z properties");

  PointCloud pc{Points(vertex_count, 3), scene_from_path(path)};
  for (long v = 0; v < vertex_count; ++v) {
    if (!next_line()) parse_fail(path, lineno + 1, "expected " + std::to_string(vertex_count) + " vertices, got " + std::to_string(v));
    const auto tok = split_ws(line);
    if (static_cast<int>(tok.size()) < prop_count) parse_fail(path, lineno, "vertex has too few values");
    const int idx[3] = {ix, iy, iz};
    for (int a = 0; a < 3; ++a) {
      double val = 0;
      if (!parse_double(tok[static_cast<std::size_t>(idx[a])], val)) parse_fail(path, lineno, "bad number '" + tok[static_cast<std::size_t>(idx[a])] + "'");
      pc.points(v, a) = val;
    }
  }
  require(pc.points.allFinite(), ErrorCode::NonFinite, path.string() + ": non-finite coordinate");
  return pc;
}

PointCloud read_xyz(const fs::path& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok.size() != 3) parse_fail(path, lineno, "expected 3 values, got " + std::to_string(tok.size()));
    for (const auto& t : tok) {
      double v = 0;
      if (!parse_double(t, v)) parse_fail(path, lineno, "bad number '" + t + "'");
      vals.push_back(v);
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(vals.size() / 3);
  PointCloud pc{Points(n, 3), scene_from_path(path)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) pc.points(i, a) = vals[static_cast<std::size_t>(3 * i + a)];
  }
  require(pc.points.allFinite(), ErrorCode::NonFinite, path.string() + ": non-finite coordinate");
  return pc;
}

PointCloud read_cloud(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ply") return read_ply(path);
  if (ext == ".xyz") return read_xyz(path);
  fail(ErrorCode::ParseError, path.string() + ": unsupported point-cloud extension '" + ext + "'");
}

void write_xyz(const fs::path& path, const PointCloud& pc) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < pc.points.rows(); ++i) {
    out << pc.points(i, 0) << ' ' << pc.points(i, 1) << ' ' << pc.points(i, 2) << '\n';
  }
}

void write_ply(const fs::path& path, const PointCloud& pc) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << pc.points.rows()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < pc.points.rows(); ++i) {
    out << pc.points(i, 0) << ' ' << pc.points(i, 1) << ' ' << pc.points(i, 2) << '\n';
  }
}

PointCloud resample_cloud(const PointCloud& pc, int num_points, std::vector<std::string>* warnings) {
  require(num_points >= 1, ErrorCode::ConfigError, "num_points must be positive");
  require(pc.points.rows() >= 1, ErrorCode::TooFewPoints, "cannot resample an empty cloud");
  require(pc.points.allFinite(), ErrorCode::NonFinite, "point cloud has NaN/Inf coordinates");
  const int n = static_cast<int>(pc.points.rows());
  if (n == num_points) return pc;
  PointCloud out{Points(num_points, 3), pc.scene_id};
  if (n > num_points) {
    const auto idx = farthest_point_sampling(pc.points, num_points, canonical_start(pc.points));
    for (int i = 0; i < num_points; ++i) out.points.row(i) = pc.points.row(idx[static_cast<std::size_t>(i)]);
    return out;
  }
  const Eigen::RowVector3d centroid = pc.points.colwise().mean();
  out.points.topRows(n) = pc.points;
  for (int i = n; i < num_points; ++i) out.points.row(i) = centroid;
  if (warnings) {
    warnings->push_back("cloud '" + pc.scene_id + "' has " + std::to_string(n) + " points; padded to " +
                        std::to_string(num_points) + " with its centroid");
  }
  return out;
}

}  // namespace geolink::pc
