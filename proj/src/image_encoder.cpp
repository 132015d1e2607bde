// SPDX-License-Identifier: Apache-2.0
#include "geolink/image_encoder.hpp"

#include <random>

#include "geolink/error.hpp"

namespace geolink {

std::string_view to_string(ViewTag v) {
  switch (v) {
    case ViewTag::Drone: return "drone";
    case ViewTag::Satellite: return "satellite";
    case ViewTag::PointCloud: return "pointcloud";
  }
  return "unknown";
}

FeatureBatch l2_normalize(const FeatureBatch& f) {
  return FeatureBatch{ag::l2_normalize_rows(f.values), f.view, f.scene_ids};
}

}  // namespace geolink

namespace geolink::img {

void ImageEncoderConfig::validate() const {
  require(patch >= 1 && image_side >= patch, ErrorCode::ConfigError, "bad patch size");
  require(image_side % patch == 0, ErrorCode::ConfigError, "image_side must be divisible by patch");
  require(width >= 1 && token_hidden >= 1 && channel_hidden >= 1 && out_dim >= 1 && blocks >= 0,
          ErrorCode::ConfigError, "image encoder widths must be positive");
}

namespace {

ag::Var ones_row(int n) { return ag::parameter(ag::Mat::Ones(1, n)); }
ag::Var zeros_row(int n) { return ag::parameter(ag::Mat::Zero(1, n)); }

}  // namespace

void EncoderParams::register_params(nn::ParameterSet& set, const std::string& prefix) const {
  set.add(prefix + "patch_w", patch_w);
  set.add(prefix + "patch_b", patch_b);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = prefix + "block" + std::to_string(i) + "/";
    const MixerBlock& b = blocks[i];
    set.add(p + "tok_norm_g", b.tok_norm_g);
    set.add(p + "tok_norm_b", b.tok_norm_b);
    set.add(p + "tok_w1", b.tok_w1);
    set.add(p + "tok_w2", b.tok_w2);
    set.add(p + "ch_norm_g", b.ch_norm_g);
    set.add(p + "ch_norm_b", b.ch_norm_b);
    set.add(p + "ch_w1", b.ch_w1);
    set.add(p + "ch_b1", b.ch_b1);
    set.add(p + "ch_w2", b.ch_w2);
    set.add(p + "ch_b2", b.ch_b2);
  }
  set.add(prefix + "out_norm_g", out_norm_g);
  set.add(prefix + "out_norm_b", out_norm_b);
  set.add(prefix + "head_w", head_w);
  set.add(prefix + "head_b", head_b);
}

EncoderParams init_image_encoder(const ImageEncoderConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int t = cfg.tokens();
  EncoderParams p;
  p.cfg = cfg;
  p.patch_w = ag::parameter(nn::fan_in_uniform(cfg.patch_dim(), cfg.width, rng));
  p.patch_b = zeros_row(cfg.width);
  for (int i = 0; i < cfg.blocks; ++i) {
    MixerBlock b;
    b.tok_norm_g = ones_row(cfg.width);
    b.tok_norm_b = zeros_row(cfg.width);
    // Token mixing acts from the left, so the stored matrices are transposed
    // relative to the x*W convention.
    b.tok_w1 = ag::parameter(nn::fan_in_uniform(t, cfg.token_hidden, rng).transpose());
    b.tok_w2 = ag::parameter(nn::fan_in_uniform(cfg.token_hidden, t, rng).transpose());
    b.ch_norm_g = ones_row(cfg.width);
    b.ch_norm_b = zeros_row(cfg.width);
    b.ch_w1 = ag::parameter(nn::fan_in_uniform(cfg.width, cfg.channel_hidden, rng));
    b.ch_b1 = zeros_row(cfg.channel_hidden);
    b.ch_w2 = ag::parameter(nn::fan_in_uniform(cfg.channel_hidden, cfg.width, rng));
    b.ch_b2 = zeros_row(cfg.width);
    p.blocks.push_back(std::move(b));
  }
  p.out_norm_g = ones_row(cfg.width);
  p.out_norm_b = zeros_row(cfg.width);
  p.head_w = ag::parameter(nn::fan_in_uniform(cfg.width, cfg.out_dim, rng));
  p.head_b = zeros_row(cfg.out_dim);
  return p;
}

ImageBatch make_batch(const std::vector<const Image*>& images, int side, ViewTag view,
                      std::vector<std::string> scene_ids) {
  require(scene_ids.empty() || scene_ids.size() == images.size(), ErrorCode::AlignmentError,
          "scene_ids length differs from image count");
  ImageBatch batch;
  batch.height = side;
  batch.width = side;
  batch.view = view;
  batch.scene_ids = std::move(scene_ids);
  batch.pixels.resize(static_cast<Eigen::Index>(images.size()), 3 * side * side);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& src = *images[i];
    require(src.channels == 3, ErrorCode::ShapeError, "images must have 3 channels");
    const Image img = resize_nearest(src, side);
    for (std::size_t k = 0; k < img.data.size(); ++k) {
      batch.pixels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = static_cast<double>(img.data[k]);
    }
  }
  return batch;
}

ag::Mat patchify(const ImageBatch& batch, int patch) {
  const int h = batch.height;
  const int w = batch.width;
  const int gy = h / patch;
  const int gx = w / patch;
  const int t = gy * gx;
  const int pd = 3 * patch * patch;
  ag::Mat out(batch.pixels.rows() * t, pd);
  for (Eigen::Index b = 0; b < batch.pixels.rows(); ++b) {
    for (int ty = 0; ty < gy; ++ty) {
      for (int tx = 0; tx < gx; ++tx) {
        const Eigen::Index row = b * t + ty * gx + tx;
        int col = 0;
        for (int c = 0; c < 3; ++c) {
          for (int py = 0; py < patch; ++py) {
            for (int px = 0; px < patch; ++px) {
              const int y = ty * patch + py;
              const int x = tx * patch + px;
              out(row, col++) = batch.pixels(b, (c * h + y) * w + x);
            }
          }
        }
      }
    }
  }
  return out;
}

FeatureBatch encode_images(const EncoderParams& params, const ImageBatch& batch) {
  const auto& cfg = params.cfg;
  require(batch.height == batch.width, ErrorCode::ShapeError, "images must be square");
  require(batch.height % cfg.patch == 0, ErrorCode::ShapeError,
          "image side " + std::to_string(batch.height) + " not divisible by patch " + std::to_string(cfg.patch));
  require(batch.height == cfg.image_side, ErrorCode::DimMismatch,
          "image side " + std::to_string(batch.height) + " != configured " + std::to_string(cfg.image_side));
  require(batch.pixels.cols() == 3 * batch.height * batch.width, ErrorCode::ShapeError, "pixel row width mismatch");
  require(batch.pixels.allFinite(), ErrorCode::NonFinite, "image batch has NaN/Inf");

  const Eigen::Index t = cfg.tokens();
  ag::Var x = nn::linear(ag::constant(patchify(batch, cfg.patch)), params.patch_w, params.patch_b);
  for (const MixerBlock& b : params.blocks) {
    ag::Var y = ag::add_row(ag::mul_row(ag::layer_norm_rows(x), b.tok_norm_g), b.tok_norm_b);
    y = ag::block_left_matmul(b.tok_w1, y, t);
    y = ag::gelu(y);
    y = ag::block_left_matmul(b.tok_w2, y, b.tok_w1.rows());
    x = ag::add(x, y);

    ag::Var z = ag::add_row(ag::mul_row(ag::layer_norm_rows(x), b.ch_norm_g), b.ch_norm_b);
    z = ag::gelu(nn::linear(z, b.ch_w1, b.ch_b1));
    z = nn::linear(z, b.ch_w2, b.ch_b2);
    x = ag::add(x, z);
  }
  x = ag::add_row(ag::mul_row(ag::layer_norm_rows(x), params.out_norm_g), params.out_norm_b);
  ag::Var pooled = ag::block_mean_rows(x, t);
  return FeatureBatch{nn::linear(pooled, params.head_w, params.head_b), batch.view, batch.scene_ids};
}

}  // namespace geolink::img
