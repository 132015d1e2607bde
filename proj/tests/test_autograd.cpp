// SPDX-License-Identifier: Apache-2.0
#include <random>

#include "doctest.h"

#include "geolink/autograd.hpp"
#include "geolink/error.hpp"
#include "geolink/nn.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace geolink;
using ag::Var;

namespace {

// Fixed linear readout so every op is checked through a scalar.
Var readout(const Var& y, const ag::Mat& w) { return ag::sum(ag::mul(y, ag::constant(w))); }

void check_unary(const std::function<Var(const Var&)>& op, ag::Mat x0, double tol = 1e-6) {
  std::mt19937_64 rng(21);
  nn::ParameterSet set;
  const Var x = ag::parameter(std::move(x0));
  set.add("x", x);
  const Var probe = op(x);
  const ag::Mat w = oracle::random_matrix(probe.rows(), probe.cols(), rng);
  const auto errs = gradcheck::check(set, [&] { return readout(op(x), w); }, 64);
  CHECK(gradcheck::worst(errs) < tol);
}

void check_binary(const std::function<Var(const Var&, const Var&)>& op, ag::Mat a0, ag::Mat b0, double tol = 1e-6) {
  std::mt19937_64 rng(22);
  nn::ParameterSet set;
  const Var a = ag::parameter(std::move(a0));
  const Var b = ag::parameter(std::move(b0));
  set.add("a", a);
  set.add("b", b);
  const Var probe = op(a, b);
  const ag::Mat w = oracle::random_matrix(probe.rows(), probe.cols(), rng);
  const auto errs = gradcheck::check(set, [&] { return readout(op(a, b), w); }, 64);
  CHECK(gradcheck::worst(errs) < tol);
}

}  // namespace

TEST_SUITE("autograd") {
  TEST_CASE("elementwise and reduction ops match finite differences") {
    std::mt19937_64 rng(1);
    const ag::Mat x = oracle::random_matrix(4, 5, rng);
    const ag::Mat pos = x.array().abs() + 0.5;
    check_unary([](const Var& v) { return ag::exp(v); }, x);
    check_unary([](const Var& v) { return ag::log(v); }, pos);
    check_unary([](const Var& v) { return ag::reciprocal(v); }, pos);
    check_unary([](const Var& v) { return ag::square(v); }, x);
    check_unary([](const Var& v) { return ag::gelu(v); }, x);
    check_unary([](const Var& v) { return ag::transpose(v); }, x);
    check_unary([](const Var& v) { return ag::scale(v, -2.5); }, x);
    check_unary([](const Var& v) { return ag::add_scalar(v, 3.0); }, x);
    check_unary([](const Var& v) { return ag::mean(v); }, x);
    check_unary([](const Var& v) { return ag::sq_norm_rows(v); }, x);
    check_unary([](const Var& v) { return ag::col_mean(v); }, x);
    check_unary([](const Var& v) { return ag::softmax_rows(v); }, x);
    check_unary([](const Var& v) { return ag::l2_normalize_rows(v); }, x);
    check_unary([](const Var& v) { return ag::layer_norm_rows(v); }, x);
    check_unary([](const Var& v) { return ag::slice_cols(v, 1, 3); }, x);
    check_unary([](const Var& v) { return ag::pairwise_distances(v); }, x);
    check_unary([](const Var& v) { return ag::block_mean_rows(v, 2); }, x);
    check_unary([](const Var& v) { return ag::cross_entropy_diag(ag::slice_cols(v, 0, 4)); }, x);
  }

  TEST_CASE("binary ops match finite differences") {
    std::mt19937_64 rng(2);
    const ag::Mat a = oracle::random_matrix(4, 3, rng);
    const ag::Mat b = oracle::random_matrix(4, 3, rng);
    check_binary([](const Var& x, const Var& y) { return ag::add(x, y); }, a, b);
    check_binary([](const Var& x, const Var& y) { return ag::sub(x, y); }, a, b);
    check_binary([](const Var& x, const Var& y) { return ag::mul(x, y); }, a, b);
    check_binary([](const Var& x, const Var& y) { return ag::matmul(x, ag::transpose(y)); }, a, b);
    check_binary([](const Var& x, const Var& y) { return ag::add_row(x, y); }, a, oracle::random_matrix(1, 3, rng));
    check_binary([](const Var& x, const Var& y) { return ag::mul_row(x, y); }, a, oracle::random_matrix(1, 3, rng));
    check_binary([](const Var& x, const Var& y) { return ag::mul_col(x, y); }, a, oracle::random_matrix(4, 1, rng));
    check_binary([](const Var& x, const Var& y) { return ag::mul_scalar(x, y); }, a, oracle::random_matrix(1, 1, rng));
    check_binary([](const Var& x, const Var& y) { return ag::block_left_matmul(x, y, 2); },
                 oracle::random_matrix(3, 2, rng), oracle::random_matrix(4, 3, rng));
    check_binary(
        [](const Var& x, const Var& y) {
          const Var parts[] = {x, y};
          return ag::concat_cols(parts);
        },
        a, b);
  }

  TEST_CASE("values of simple ops") {
    const Var v = ag::constant((ag::Mat(1, 2) << 3.0, 4.0).finished());
    CHECK(ag::l2_normalize_rows(v).value().isApprox((ag::Mat(1, 2) << 0.6, 0.8).finished()));
    CHECK(ag::softmax_rows(ag::constant(ag::Mat::Zero(2, 3))).value().isApprox(ag::Mat::Constant(2, 3, 1.0 / 3.0)));
    const ag::Mat l = (ag::Mat(2, 2) << 1.0, 0.0, 0.0, 1.0).finished();
    CHECK(ag::cross_entropy_diag(ag::constant(l)).item() == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0))));
    const ag::Mat d = ag::pairwise_distances(ag::constant((ag::Mat(2, 2) << 0, 0, 3, 4).finished())).value();
    CHECK(d(0, 1) == 5.0);
    CHECK(d(0, 0) == 0.0);
  }

  TEST_CASE("gradients accumulate and detach cuts the graph") {
    const Var x = ag::parameter(ag::Mat::Constant(1, 1, 2.0));
    ag::backward(ag::add(ag::square(x), ag::detach(ag::square(x))));
    CHECK(x.grad()(0, 0) == doctest::Approx(4.0));
    ag::backward(ag::square(x));
    CHECK(x.grad()(0, 0) == doctest::Approx(8.0));
    const Var c = ag::constant(ag::Mat::Constant(1, 1, 2.0));
    ag::backward(ag::square(c));
    CHECK(c.grad().size() == 0);
  }

  TEST_CASE("zero rows are rejected by l2 normalization") {
    CHECK_THROWS_AS(ag::l2_normalize_rows(ag::constant(ag::Mat::Zero(2, 3))), Error);
  }

  TEST_CASE("adamw decays matrices but not vectors") {
    nn::ParameterSet set;
    const Var w = ag::parameter(ag::Mat::Ones(2, 2));
    const Var b = ag::parameter(ag::Mat::Ones(1, 2));
    set.add("w", w);
    set.add("b", b);
    w.node()->grad = ag::Mat::Zero(2, 2);
    b.node()->grad = ag::Mat::Zero(1, 2);
    nn::AdamWConfig cfg;
    cfg.weight_decay = 0.5;
    nn::AdamW opt(cfg);
    opt.step(set, 0.1);
    CHECK(w.value()(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5));
    CHECK(b.value()(0, 0) == 1.0);
    CHECK(opt.step_count() == 1);
  }

  TEST_CASE("adamw first step moves each weight by lr against its gradient sign") {
    nn::ParameterSet set;
    const Var w = ag::parameter(ag::Mat::Zero(1, 3));
    set.add("w", w);
    w.node()->grad = (ag::Mat(1, 3) << 2.0, -0.5, 0.0).finished();
    nn::AdamW opt;
    opt.step(set, 0.01);
    CHECK(w.value()(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(w.value()(0, 1) == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(w.value()(0, 2) == 0.0);
  }

  TEST_CASE("gradient clipping rescales to the bound") {
    nn::ParameterSet set;
    const Var w = ag::parameter(ag::Mat::Zero(1, 2));
    set.add("w", w);
    w.node()->grad = (ag::Mat(1, 2) << 3.0, 4.0).finished();
    CHECK(nn::clip_grad_norm(set, 1.0) == doctest::Approx(5.0));
    CHECK(w.grad().norm() == doctest::Approx(1.0));
    CHECK(nn::clip_grad_norm(set, 2.0) == doctest::Approx(1.0));
    CHECK(w.grad().norm() == doctest::Approx(1.0));
  }

  TEST_CASE("mix_seed separates streams") {
    CHECK(nn::mix_seed(1, 2) != nn::mix_seed(1, 3));
    CHECK(nn::mix_seed(1, 2) != nn::mix_seed(2, 2));
    CHECK(nn::mix_seed(5, 9) == nn::mix_seed(5, 9));
  }
}
