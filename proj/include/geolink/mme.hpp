// SPDX-License-Identifier: Apache-2.0
//
// Mixture-of-multi-expert fusion for the global point-cloud feature. A softmax
// gate weighs E two-layer experts; a shared linear expert is appended. The
// output columns are [g_1 E_1(f) | ... | g_E E_E(f) | E_h(f)], each block
// D/(E+1) wide.
#pragma once

#include <cstdint>
#include <vector>

#include "geolink/autograd.hpp"
#include "geolink/nn.hpp"

namespace geolink::mme {

struct MMEConfig {
  int input_dim = 0;
  int output_dim = 64;
  int experts = 3;
  std::uint64_t seed = 0;

  void validate() const;
  int block_dim() const { return output_dim / (experts + 1); }
  // Hidden width of expert i, cycling through {D/2, D, 2D}.
  int expert_hidden(int i) const;
};

struct Expert {
  ag::Var w1, b1, w2, b2;
};

struct MMEParams {
  MMEConfig cfg;
  ag::Var gate_w, gate_b;
  std::vector<Expert> experts;
  ag::Var shared_w, shared_b;

  void register_params(nn::ParameterSet& set, const std::string& prefix) const;
};

// Gate zero-initialized, experts fan-in uniform from cfg.seed.
MMEParams init_mme(const MMEConfig& cfg);

// B x E softmax weights. Throws NonFinite on NaN/Inf input.
ag::Var gate(const MMEParams& params, const ag::Var& f_pc);

// B x D fused feature. Throws DimMismatch when f_pc width != input_dim.
ag::Var mme_forward(const MMEParams& params, const ag::Var& f_pc);

// Calls to mme_forward since process start.
std::uint64_t invocation_count();

}  // namespace geolink::mme
