// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geolink/autograd.hpp"

namespace geolink::nn {

using ag::Mat;

// Ordered collection of named trainable tensors. Entries share nodes with the
// module structs that registered them, so optimizer updates are visible there.
class ParameterSet {
 public:
  void add(std::string name, const ag::Var& var);
  const ag::Var& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::pair<std::string, ag::Var>>& entries() const { return entries_; }
  std::size_t tensor_count() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad() const;
  // Appends every entry of other (names must be unique).
  void extend(const ParameterSet& other);

 private:
  std::vector<std::pair<std::string, ag::Var>> entries_;
};

// Sum of squared gradient entries over the set (missing grads count as zero).
double grad_sq_norm(const ParameterSet& params);
// Rescales gradients so the global L2 norm is at most max_norm. Returns the
// pre-clip norm.
double clip_grad_norm(const ParameterSet& params, double max_norm);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay Adam. Decay applies to rank-2 weights only (tensors
// with more than one row and more than one column); biases, norms and scalars
// are not decayed.
class AdamW {
 public:
  struct Slot {
    Mat m;
    Mat v;
  };

  AdamW() = default;
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  void step(const ParameterSet& params, double lr);

  std::int64_t step_count() const { return steps_; }
  void set_step_count(std::int64_t s) { steps_ = s; }
  const std::map<std::string, Slot>& slots() const { return slots_; }
  std::map<std::string, Slot>& mutable_slots() { return slots_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::int64_t steps_ = 0;
  std::map<std::string, Slot> slots_;
};

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weight init.
Mat fan_in_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng);

// x * W + b with W stored (in x out) and b (1 x out).
ag::Var linear(const ag::Var& x, const ag::Var& w, const ag::Var& b);

// Copies every tensor as a constant leaf so a module can be evaluated frozen.
ag::Var frozen(const ag::Var& p);

// splitmix64 finalizer; used to derive independent seeds from (seed, stream).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace geolink::nn
