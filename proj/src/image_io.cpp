// SPDX-License-Identifier: Apache-2.0
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "geolink/error.hpp"
#include "geolink/image.hpp"

namespace geolink {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "raw tensor IO assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'G', 'L', 'R', 'T'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const fs::path& path, const char* what, std::size_t offset) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) {
    fail(ErrorCode::ParseError, path.string() + ": byte " + std::to_string(offset) + ": truncated while reading " + what);
  }
  return v;
}

}  // namespace

Image Image::filled(int channels, int height, int width, float value) {
  Image img{channels, height, width, {}};
  img.data.assign(static_cast<std::size_t>(channels) * height * width, value);
  return img;
}

void write_raw_tensor(const fs::path& path, const RawTensor& t) {
  std::size_t count = 1;
  for (auto d : t.dims) count *= static_cast<std::size_t>(d);
  require(count == t.values.size(), ErrorCode::ShapeError, "raw tensor dims do not match payload");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dtype));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) put<std::uint64_t>(out, d);
  if (t.dtype == DType::Float32) {
    for (double v : t.values) put<float>(out, static_cast<float>(v));
  } else {
    for (double v : t.values) put<double>(out, v);
  }
  require(out.good(), ErrorCode::IoError, "write failed for " + path.string());
}

RawTensor read_raw_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::MissingView, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::ParseError, path.string() + ": byte 0: bad raw-tensor magic");
  }
  RawTensor t;
  const auto code = get<std::uint32_t>(in, path, "dtype", 4);
  if (code != 1 && code != 2) fail(ErrorCode::ParseError, path.string() + ": byte 4: unknown dtype code " + std::to_string(code));
  t.dtype = static_cast<DType>(code);
  const auto rank = get<std::uint32_t>(in, path, "rank", 8);
  if (rank > 8) fail(ErrorCode::ParseError, path.string() + ": byte 8: implausible rank " + std::to_string(rank));
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.dims.push_back(get<std::uint64_t>(in, path, "dims", 12 + 8 * static_cast<std::size_t>(i)));
    count *= static_cast<std::size_t>(t.dims.back());
  }
  const std::size_t header = 12 + 8 * rank;
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (t.dtype == DType::Float32) {
      float v;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      t.values[i] = v;
    } else {
      in.read(reinterpret_cast<char*>(&t.values[i]), sizeof(double));
    }
    if (!in) {
      const std::size_t width = t.dtype == DType::Float32 ? 4 : 8;
      fail(ErrorCode::ParseError, path.string() + ": byte " + std::to_string(header + i * width) +
                                      ": payload truncated (" + std::to_string(i) + " of " + std::to_string(count) + " values)");
    }
  }
  return t;
}

void write_image_rt(const fs::path& path, const Image& img) {
  RawTensor t;
  t.dtype = DType::Float32;
  t.dims = {static_cast<std::uint64_t>(img.channels), static_cast<std::uint64_t>(img.height),
            static_cast<std::uint64_t>(img.width)};
  t.values.assign(img.data.begin(), img.data.end());
  write_raw_tensor(path, t);
}

Image read_image_rt(const fs::path& path) {
  const RawTensor t = read_raw_tensor(path);
  require(t.dims.size() == 3, ErrorCode::ShapeError, path.string() + ": image tensors must be rank 3 (C,H,W)");
  Image img{static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]), {}};
  img.data.reserve(t.values.size());
  for (double v : t.values) img.data.push_back(static_cast<float>(v));
  return img;
}

void write_png(const fs::path& path, const Image& img) {
  require(img.channels == 3, ErrorCode::ShapeError, "PNG export expects 3 channels");
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
        buf[static_cast<std::size_t>((y * img.width + x) * 3 + c)] = static_cast<png_byte>(std::lround(v * 255.0f));
      }
    }
  }
  if (!png_image_write_to_file(&pi, path.c_str(), 0, buf.data(), 0, nullptr)) {
    fail(ErrorCode::IoError, path.string() + ": " + pi.message);
  }
}

Image read_png(const fs::path& path) {
  require(fs::exists(path), ErrorCode::MissingView, "missing image " + path.string());
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str())) {
    fail(ErrorCode::ParseError, path.string() + ": byte 0: " + pi.message);
  }
  pi.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&pi);
    fail(ErrorCode::ParseError, path.string() + ": " + pi.message);
  }
  Image img = Image::filled(3, static_cast<int>(pi.height), static_cast<int>(pi.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = static_cast<float>(buf[static_cast<std::size_t>((y * img.width + x) * 3 + c)]) / 255.0f;
      }
    }
  }
  return img;
}

Image read_image(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png") return read_png(path);
  if (ext == ".rt") return read_image_rt(path);
  fail(ErrorCode::ParseError, path.string() + ": unsupported image extension '" + ext + "'");
}

Image resize_nearest(const Image& img, int side) {
  if (img.height == side && img.width == side) return img;
  Image out = Image::filled(img.channels, side, side);
  for (int y = 0; y < side; ++y) {
    const int sy = std::min(img.height - 1, static_cast<int>((static_cast<long>(y) * img.height) / side));
    for (int x = 0; x < side; ++x) {
      const int sx = std::min(img.width - 1, static_cast<int>((static_cast<long>(x) * img.width) / side));
      for (int c = 0; c < img.channels; ++c) out.at(c, y, x) = img.at(c, sy, sx);
    }
  }
  return out;
}

void write_matrix_rt(const fs::path& path, const Eigen::MatrixXd& m, DType dtype) {
  RawTensor t;
  t.dtype = dtype;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.values.push_back(m(i, j));
  }
  write_raw_tensor(path, t);
}

Eigen::MatrixXd read_matrix_rt(const fs::path& path) {
  const RawTensor t = read_raw_tensor(path);
  require(t.dims.size() == 2, ErrorCode::ShapeError, path.string() + ": expected a rank-2 tensor");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.dims[0]), static_cast<Eigen::Index>(t.dims[1]));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = t.values[k++];
  }
  return m;
}

}  // namespace geolink
