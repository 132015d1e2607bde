// SPDX-License-Identifier: Apache-2.0
#include "geolink/nn.hpp"

#include <cmath>

#include "geolink/error.hpp"

namespace geolink::nn {

void ParameterSet::add(std::string name, const ag::Var& var) {
  require(!contains(name), ErrorCode::ConfigError, "duplicate parameter name " + name);
  entries_.emplace_back(std::move(name), var);
}

const ag::Var& ParameterSet::get(std::string_view name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  fail(ErrorCode::ConfigError, "no parameter named " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.second.value().size());
  return n;
}

void ParameterSet::zero_grad() const {
  for (const auto& e : entries_) e.second.node()->grad.resize(0, 0);
}

void ParameterSet::extend(const ParameterSet& other) {
  for (const auto& [n, v] : other.entries_) add(n, v);
}

double grad_sq_norm(const ParameterSet& params) {
  double s = 0.0;
  for (const auto& e : params.entries()) {
    const Mat& g = e.second.grad();
    if (g.size() != 0) s += g.squaredNorm();
  }
  return s;
}

double clip_grad_norm(const ParameterSet& params, double max_norm) {
  const double norm = std::sqrt(grad_sq_norm(params));
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (const auto& e : params.entries()) {
      Mat& g = e.second.node()->grad;
      if (g.size() != 0) g *= f;
    }
  }
  return norm;
}

void AdamW::step(const ParameterSet& params, double lr) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (const auto& [name, var] : params.entries()) {
    Mat& value = var.node()->value;
    const Mat& g = var.grad();
    auto [it, inserted] = slots_.try_emplace(name);
    Slot& slot = it->second;
    if (inserted || slot.m.size() == 0) {
      slot.m = Mat::Zero(value.rows(), value.cols());
      slot.v = Mat::Zero(value.rows(), value.cols());
    }
    if (value.rows() > 1 && value.cols() > 1 && cfg_.weight_decay > 0.0) {
      value *= (1.0 - lr * cfg_.weight_decay);
    }
    if (g.size() == 0) continue;
    slot.m = cfg_.beta1 * slot.m + (1.0 - cfg_.beta1) * g;
    slot.v = cfg_.beta2 * slot.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const double eps = cfg_.eps;
    value.array() -= lr * (slot.m.array() / bc1) / ((slot.v.array() / bc2).sqrt() + eps);
  }
}

Mat fan_in_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < fan_in; ++i) {
    for (Eigen::Index j = 0; j < fan_out; ++j) w(i, j) = dist(rng);
  }
  return w;
}

ag::Var linear(const ag::Var& x, const ag::Var& w, const ag::Var& b) {
  return ag::add_row(ag::matmul(x, w), b);
}

ag::Var frozen(const ag::Var& p) { return ag::constant(p.value()); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace geolink::nn
