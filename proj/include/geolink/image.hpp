// SPDX-License-Identifier: Apache-2.0
//
// Planar float images and their on-disk forms: PNG (8-bit) and the raw tensor
// container. The container is little-endian:
//   magic "GLRT" | u32 dtype (1 = float32, 2 = float64) | u32 rank |
//   u64 dims[rank] | row-major payload
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geolink {

// CHW layout, values in [0, 1].
struct Image {
  int channels = 3;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  float& at(int c, int y, int x) { return data[static_cast<std::size_t>((c * height + y) * width + x)]; }
  float at(int c, int y, int x) const { return data[static_cast<std::size_t>((c * height + y) * width + x)]; }

  static Image filled(int channels, int height, int width, float value = 0.0f);
  bool operator==(const Image&) const = default;
};

enum class DType : std::uint32_t { Float32 = 1, Float64 = 2 };

struct RawTensor {
  DType dtype = DType::Float32;
  std::vector<std::uint64_t> dims;
  // Stored as double in memory; float32 payloads round-trip exactly.
  std::vector<double> values;
};

void write_raw_tensor(const std::filesystem::path& path, const RawTensor& t);
RawTensor read_raw_tensor(const std::filesystem::path& path);

void write_image_rt(const std::filesystem::path& path, const Image& img);
Image read_image_rt(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

// Dispatch on extension: .png or .rt.
Image read_image(const std::filesystem::path& path);

// Nearest-neighbour resize to side x side.
Image resize_nearest(const Image& img, int side);

void write_matrix_rt(const std::filesystem::path& path, const Eigen::MatrixXd& m, DType dtype = DType::Float64);
Eigen::MatrixXd read_matrix_rt(const std::filesystem::path& path);

}  // namespace geolink
