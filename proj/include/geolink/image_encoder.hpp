// SPDX-License-Identifier: Apache-2.0
//
// Shared-weight 2D encoder for drone and satellite views: non-overlapping
// patch embedding, token/channel mixing blocks, mean pooling over tokens and
// a linear head to the feature dimension.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geolink/autograd.hpp"
#include "geolink/features.hpp"
#include "geolink/image.hpp"
#include "geolink/nn.hpp"

namespace geolink::img {

struct ImageEncoderConfig {
  int image_side = 32;
  int patch = 8;
  int width = 64;
  int token_hidden = 32;
  int channel_hidden = 128;
  int blocks = 2;
  int out_dim = 64;
  std::uint64_t seed = 0;

  void validate() const;
  int tokens() const { return (image_side / patch) * (image_side / patch); }
  int patch_dim() const { return 3 * patch * patch; }
};

struct MixerBlock {
  ag::Var tok_norm_g, tok_norm_b;
  ag::Var tok_w1, tok_w2;  // (token_hidden x T), (T x token_hidden), left-multiplied
  ag::Var ch_norm_g, ch_norm_b;
  ag::Var ch_w1, ch_b1, ch_w2, ch_b2;
};

struct EncoderParams {
  ImageEncoderConfig cfg;
  ag::Var patch_w, patch_b;
  std::vector<MixerBlock> blocks;
  ag::Var out_norm_g, out_norm_b;
  ag::Var head_w, head_b;

  void register_params(nn::ParameterSet& set, const std::string& prefix) const;
};

EncoderParams init_image_encoder(const ImageEncoderConfig& cfg);

// pixels: B x (3*H*W), CHW-flattened rows with values in [0, 1].
struct ImageBatch {
  ag::Mat pixels;
  int height = 0;
  int width = 0;
  ViewTag view = ViewTag::Drone;
  std::vector<std::string> scene_ids;
};

// Packs images (resized to side if needed) into a batch.
ImageBatch make_batch(const std::vector<const Image*>& images, int side, ViewTag view,
                      std::vector<std::string> scene_ids);

// B x D features (not normalized). Throws ShapeError when H != W or H is not
// divisible by the patch size, DimMismatch when H differs from the
// configured image side.
FeatureBatch encode_images(const EncoderParams& params, const ImageBatch& batch);

// Rearranges a batch into (B*T) x patch_dim token rows.
ag::Mat patchify(const ImageBatch& batch, int patch);

}  // namespace geolink::img
