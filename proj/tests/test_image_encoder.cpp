// SPDX-License-Identifier: Apache-2.0
#include <random>

#include "doctest.h"

#include "geolink/error.hpp"
#include "geolink/image_encoder.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace geolink;

namespace {

img::ImageEncoderConfig tiny() {
  img::ImageEncoderConfig c;
  c.image_side = 16;
  c.patch = 8;
  c.width = 6;
  c.token_hidden = 3;
  c.channel_hidden = 8;
  c.blocks = 1;
  c.out_dim = 5;
  c.seed = 4;
  return c;
}

Image random_image(int side, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image im = Image::filled(3, side, side);
  for (float& v : im.data) v = u(rng);
  return im;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

}  // namespace

TEST_SUITE("image_encoder") {
  TEST_CASE("zero image propagates the head bias") {
    auto p = img::init_image_encoder(tiny());
    p.head_b.node()->value << 0.1, -0.2, 0.3, 0.0, 5.0;
    const Image z = Image::filled(3, 16, 16, 0.0f);
    const auto f = img::encode_images(p, img::make_batch({&z, &z}, 16, ViewTag::Drone, {}));
    for (int r = 0; r < 2; ++r) CHECK(f.values.value().row(r).isApprox(p.head_b.value().row(0)));
  }

  TEST_CASE("rows are independent and deterministic") {
    const auto p = img::init_image_encoder(tiny());
    std::mt19937_64 rng(1);
    const Image a = random_image(16, rng);
    const Image b = random_image(16, rng);
    const auto f1 = img::encode_images(p, img::make_batch({&a, &b, &a}, 16, ViewTag::Drone, {}));
    const auto f2 = img::encode_images(p, img::make_batch({&a}, 16, ViewTag::Drone, {}));
    CHECK(f1.values.value().row(0) == f1.values.value().row(2));
    CHECK((f1.values.value().row(0) - f2.values.value().row(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f1.values.value().row(0) != f1.values.value().row(1));
    const auto again = img::encode_images(p, img::make_batch({&a, &b, &a}, 16, ViewTag::Drone, {}));
    CHECK(again.values.value() == f1.values.value());
    CHECK(f1.dim() == 5);
  }

  TEST_CASE("patchify arranges tokens row-major") {
    Image im = Image::filled(3, 4, 4);
    for (std::size_t i = 0; i < im.data.size(); ++i) im.data[i] = static_cast<float>(i);
    const auto batch = img::make_batch({&im}, 4, ViewTag::Satellite, {});
    const ag::Mat t = img::patchify(batch, 2);
    CHECK(t.rows() == 4);
    CHECK(t.cols() == 12);
    // Token 1 is the top-right patch; its first entry is channel 0, row 0, col 2.
    CHECK(t(1, 0) == doctest::Approx(im.at(0, 0, 2)));
  }

  TEST_CASE("shape errors") {
    const auto p = img::init_image_encoder(tiny());
    img::ImageBatch b;
    b.height = 16;
    b.width = 12;
    b.pixels = ag::Mat::Zero(1, 3 * 16 * 12);
    CHECK(code_of([&] { img::encode_images(p, b); }) == ErrorCode::ShapeError);
    b.height = b.width = 8;
    b.pixels = ag::Mat::Zero(1, 3 * 64);
    CHECK(code_of([&] { img::encode_images(p, b); }) == ErrorCode::DimMismatch);
    b.height = b.width = 12;
    b.pixels = ag::Mat::Zero(1, 3 * 144);
    CHECK(code_of([&] { img::encode_images(p, b); }) == ErrorCode::ShapeError);
    b.height = b.width = 16;
    b.pixels = ag::Mat::Zero(1, 3 * 256);
    b.pixels(0, 5) = NAN;
    CHECK(code_of([&] { img::encode_images(p, b); }) == ErrorCode::NonFinite);
    auto bad = tiny();
    bad.patch = 5;
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::ConfigError);
  }

  TEST_CASE("make_batch resizes to the configured side") {
    std::mt19937_64 rng(2);
    const Image big = random_image(32, rng);
    const auto b = img::make_batch({&big}, 16, ViewTag::Drone, {"s"});
    CHECK(b.height == 16);
    CHECK(b.pixels.cols() == 3 * 256);
  }

  TEST_CASE("gradients match finite differences") {
    auto p = img::init_image_encoder(tiny());
    std::mt19937_64 rng(3);
    // Move norms and biases off their init so every path carries signal.
    nn::ParameterSet set;
    p.register_params(set, "image/");
    for (const auto& [name, v] : set.entries()) v.node()->value += oracle::random_matrix(v.rows(), v.cols(), rng, 0.1);
    const Image a = random_image(16, rng);
    const Image b = random_image(16, rng);
    const auto batch = img::make_batch({&a, &b}, 16, ViewTag::Drone, {});
    const ag::Mat w = oracle::random_matrix(2, 5, rng);
    const auto errs = gradcheck::check(set, [&] {
      return ag::sum(ag::mul(img::encode_images(p, batch).values, ag::constant(w)));
    });
    for (const auto& e : errs) CHECK_MESSAGE(e.rel_error < 1e-4, e.name);
  }

  TEST_CASE("l2_normalize on feature batches") {
    FeatureBatch f{ag::constant((ag::Mat(2, 2) << 3, 4, 0, 2).finished()), ViewTag::Drone, {"a", "b"}};
    const auto n = l2_normalize(f);
    CHECK(n.values.value()(0, 0) == doctest::Approx(0.6));
    CHECK(n.values.value()(1, 1) == doctest::Approx(1.0));
    CHECK(n.scene_ids == f.scene_ids);
    std::mt19937_64 rng(4);
    const auto r = l2_normalize({ag::constant(oracle::random_matrix(6, 9, rng)), ViewTag::Satellite, {}});
    CHECK((r.values.value().rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}
