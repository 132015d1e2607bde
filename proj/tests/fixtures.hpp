// SPDX-License-Identifier: Apache-2.0
//
// Small models and datasets shared by the trainer tests and the acceptance
// runner.
#pragma once

#include <random>

#include "geolink/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace fixtures {

inline geolink::TrainConfig tiny_config(std::uint64_t seed = 0) {
  geolink::TrainConfig c;
  c.seed = seed;
  c.epochs = 2;
  c.batch_size = 4;
  c.feature_dim = 8;
  c.experts = 3;
  c.vclub_hidden = 8;
  c.image_side = 16;
  c.patch = 8;
  c.width = 12;
  c.token_hidden = 4;
  c.channel_hidden = 16;
  c.mixer_blocks = 1;
  c.num_points = 64;
  c.pc_stages = 2;
  c.pc_k = 8;
  c.pc_initial_dim = 12;
  return c;
}

inline geolink::syn::Dataset tiny_data(int scenes = 16, std::uint64_t seed = 1, bool target = false) {
  geolink::syn::GeneratorConfig g;
  g.image_side = 16;
  g.drone_views = 2;
  g.num_points = 64;
  return geolink::syn::generate_dataset(
      seed, scenes, target ? geolink::syn::DomainStyle::target() : geolink::syn::DomainStyle::source(), g);
}

inline geolink::Image random_image(int side, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  geolink::Image im = geolink::Image::filled(3, side, side);
  for (float& v : im.data) v = u(rng);
  return im;
}

// Finite-difference check of L_total (all terms on) with respect to every
// trainable tensor of a B=3, D=8 model: image encoder, MME, projection,
// temperature and both vCLUB estimators.
inline std::vector<gradcheck::TensorError> total_loss_gradcheck(std::uint64_t seed) {
  using namespace geolink;
  TrainConfig cfg = tiny_config(seed);
  Model m = init_model(cfg);
  std::mt19937_64 rng(seed + 7);
  // Perturb zero-initialized tensors (gate, biases, norms) so every path
  // carries gradient.
  const nn::ParameterSet params = m.all_params();
  for (const auto& [name, v] : params.entries()) {
    if (name != "log_tau") v.node()->value += oracle::random_matrix(v.rows(), v.cols(), rng, 0.05);
  }
  m.temperature.log_tau.node()->value(0, 0) = std::log(0.5);
  const int d_pc = encoder_config(cfg).output_dim();
  const ag::Mat raw = oracle::random_matrix(3, d_pc, rng);
  std::vector<Image> dro, sat;
  for (int i = 0; i < 3; ++i) {
    dro.push_back(random_image(cfg.image_side, rng));
    sat.push_back(random_image(cfg.image_side, rng));
  }
  const std::vector<std::string> ids{"a", "b", "c"};
  const auto db = img::make_batch({&dro[0], &dro[1], &dro[2]}, cfg.image_side, ViewTag::Drone, ids);
  const auto sb = img::make_batch({&sat[0], &sat[1], &sat[2]}, cfg.image_side, ViewTag::Satellite, ids);
  obj::LossConfig lc = loss_config(cfg);
  lc.estimator_grad_in_total = true;
  lc.rd_teacher_grad = true;
  auto loss = [&] {
    return obj::total_loss(image_features(m, db), image_features(m, sb), pointcloud_features(m, raw, ids), m.temperature,
                           m.est_d, m.est_s, lc)
        .total;
  };
  // est_*/b2 has zero gradient (the estimate ignores the output bias), so the
  // floor sits above the roughly 1e-9 round-off of the central differences.
  return gradcheck::check(params, loss, 12, 1e-6, 1e-5);
}

}  // namespace fixtures
