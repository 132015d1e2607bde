// SPDX-License-Identifier: Apache-2.0
#include "geolink/mme.hpp"

#include <atomic>
#include <random>

#include "geolink/error.hpp"

namespace geolink::mme {

namespace {
std::atomic<std::uint64_t> g_invocations{0};
}

void MMEConfig::validate() const {
  require(input_dim >= 1, ErrorCode::ConfigError, "MME input_dim must be positive");
  require(experts >= 1, ErrorCode::ConfigError, "MME needs at least one expert");
  require(output_dim % (experts + 1) == 0, ErrorCode::ConfigError,
          "feature dim " + std::to_string(output_dim) + " not divisible by experts+1=" + std::to_string(experts + 1));
  require(output_dim >= 2, ErrorCode::ConfigError, "MME output_dim too small");
}

int MMEConfig::expert_hidden(int i) const {
  switch (i % 3) {
    case 0: return std::max(1, output_dim / 2);
    case 1: return output_dim;
    default: return 2 * output_dim;
  }
}

void MMEParams::register_params(nn::ParameterSet& set, const std::string& prefix) const {
  set.add(prefix + "gate_w", gate_w);
  set.add(prefix + "gate_b", gate_b);
  for (std::size_t i = 0; i < experts.size(); ++i) {
    const std::string p = prefix + "expert" + std::to_string(i) + "/";
    set.add(p + "w1", experts[i].w1);
    set.add(p + "b1", experts[i].b1);
    set.add(p + "w2", experts[i].w2);
    set.add(p + "b2", experts[i].b2);
  }
  set.add(prefix + "shared_w", shared_w);
  set.add(prefix + "shared_b", shared_b);
}

MMEParams init_mme(const MMEConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int block = cfg.block_dim();
  MMEParams p;
  p.cfg = cfg;
  p.gate_w = ag::parameter(ag::Mat::Zero(cfg.input_dim, cfg.experts));
  p.gate_b = ag::parameter(ag::Mat::Zero(1, cfg.experts));
  for (int i = 0; i < cfg.experts; ++i) {
    const int h = cfg.expert_hidden(i);
    Expert e;
    e.w1 = ag::parameter(nn::fan_in_uniform(cfg.input_dim, h, rng));
    e.b1 = ag::parameter(ag::Mat::Zero(1, h));
    e.w2 = ag::parameter(nn::fan_in_uniform(h, block, rng));
    e.b2 = ag::parameter(ag::Mat::Zero(1, block));
    p.experts.push_back(std::move(e));
  }
  p.shared_w = ag::parameter(nn::fan_in_uniform(cfg.input_dim, block, rng));
  p.shared_b = ag::parameter(ag::Mat::Zero(1, block));
  return p;
}

ag::Var gate(const MMEParams& params, const ag::Var& f_pc) {
  require(f_pc.value().allFinite(), ErrorCode::NonFinite, "MME gate input has NaN/Inf");
  require(f_pc.cols() == params.gate_w.rows(), ErrorCode::DimMismatch,
          "MME input width " + std::to_string(f_pc.cols()) + " != " + std::to_string(params.gate_w.rows()));
  return ag::softmax_rows(nn::linear(f_pc, params.gate_w, params.gate_b));
}

ag::Var mme_forward(const MMEParams& params, const ag::Var& f_pc) {
  g_invocations.fetch_add(1, std::memory_order_relaxed);
  const ag::Var g = gate(params, f_pc);
  std::vector<ag::Var> blocks;
  blocks.reserve(params.experts.size() + 1);
  for (std::size_t i = 0; i < params.experts.size(); ++i) {
    const Expert& e = params.experts[i];
    const ag::Var hidden = ag::gelu(nn::linear(f_pc, e.w1, e.b1));
    const ag::Var out = nn::linear(hidden, e.w2, e.b2);
    blocks.push_back(ag::mul_col(out, ag::slice_cols(g, static_cast<Eigen::Index>(i), 1)));
  }
  blocks.push_back(nn::linear(f_pc, params.shared_w, params.shared_b));
  return ag::concat_cols(blocks);
}

std::uint64_t invocation_count() { return g_invocations.load(std::memory_order_relaxed); }

}  // namespace geolink::mme
