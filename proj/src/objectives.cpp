// SPDX-License-Identifier: Apache-2.0
#include "geolink/objectives.hpp"

#include <cmath>
#include <random>

#include "geolink/error.hpp"

namespace geolink::obj {

void LossConfig::validate() const {
  require(lambda_sc >= 0.0 && std::isfinite(lambda_sc), ErrorCode::ConfigError, "lambda_sc must be >= 0");
  require(init_tau > 0.0 && std::isfinite(init_tau), ErrorCode::ConfigError, "tau must be > 0");
}

Temperature Temperature::init(double tau) {
  require(tau > 0.0, ErrorCode::ConfigError, "tau must be > 0");
  return Temperature{ag::parameter(ag::Mat::Constant(1, 1, std::log(tau)))};
}

double Temperature::tau() const { return std::exp(log_tau.item()); }

ag::Var Temperature::inverse() const { return ag::exp(ag::scale(log_tau, -1.0)); }

VClubEstimator VClubEstimator::init(int in_dim, int hidden, int out_dim, std::uint64_t seed) {
  require(in_dim >= 1 && hidden >= 1 && out_dim >= 1, ErrorCode::ConfigError, "vCLUB dims must be positive");
  std::mt19937_64 rng(seed);
  VClubEstimator e;
  e.w1 = ag::parameter(nn::fan_in_uniform(in_dim, hidden, rng));
  e.b1 = ag::parameter(ag::Mat::Zero(1, hidden));
  e.w2 = ag::parameter(nn::fan_in_uniform(hidden, out_dim, rng));
  e.b2 = ag::parameter(ag::Mat::Zero(1, out_dim));
  return e;
}

void VClubEstimator::register_params(nn::ParameterSet& set, const std::string& prefix) const {
  set.add(prefix + "w1", w1);
  set.add(prefix + "b1", b1);
  set.add(prefix + "w2", w2);
  set.add(prefix + "b2", b2);
}

ag::Var VClubEstimator::mean_map(const ag::Var& x, bool frozen) const {
  require(x.cols() == w1.rows(), ErrorCode::DimMismatch,
          "vCLUB input width " + std::to_string(x.cols()) + " != " + std::to_string(w1.rows()));
  if (frozen) {
    const ag::Var h = ag::gelu(nn::linear(x, nn::frozen(w1), nn::frozen(b1)));
    return nn::linear(h, nn::frozen(w2), nn::frozen(b2));
  }
  return nn::linear(ag::gelu(nn::linear(x, w1, b1)), w2, b2);
}

namespace {

void check_pair(const FeatureBatch& a, const FeatureBatch& b) {
  require(a.size() >= 2 && b.size() >= 2, ErrorCode::BatchTooSmall,
          "batch size " + std::to_string(std::min(a.size(), b.size())) + " < 2");
  require(a.size() == b.size(), ErrorCode::AlignmentError, "batch sizes differ");
  require(a.dim() == b.dim(), ErrorCode::DimMismatch, "feature widths differ");
  if (!a.scene_ids.empty() && !b.scene_ids.empty()) {
    require(a.scene_ids == b.scene_ids, ErrorCode::AlignmentError,
            std::string("scene_id order differs between ") + std::string(to_string(a.view)) + " and " +
                std::string(to_string(b.view)));
  }
}

FeatureBatch wrap(const ag::Mat& m) { return FeatureBatch{ag::constant(m), ViewTag::Drone, {}}; }

}  // namespace

ag::Var info_nce(const FeatureBatch& q, const FeatureBatch& r, const ag::Var& inv_tau, bool symmetric) {
  check_pair(q, r);
  const ag::Var logits = ag::mul_scalar(ag::matmul(q.values, ag::transpose(r.values)), inv_tau);
  const ag::Var forward = ag::cross_entropy_diag(logits);
  if (!symmetric) return forward;
  return ag::scale(ag::add(forward, ag::cross_entropy_diag(ag::transpose(logits))), 0.5);
}

double info_nce(const ag::Mat& q, const ag::Mat& r, double tau) {
  return info_nce(wrap(q), wrap(r), ag::constant(ag::Mat::Constant(1, 1, 1.0 / tau))).item();
}

ag::Var cross_view_loss(const FeatureBatch& dro, const FeatureBatch& sat, const FeatureBatch& pc,
                        const ag::Var& inv_tau, bool symmetric) {
  check_pair(dro, sat);
  check_pair(dro, pc);
  return ag::add(ag::add(info_nce(dro, sat, inv_tau, symmetric), info_nce(dro, pc, inv_tau, symmetric)),
                 info_nce(sat, pc, inv_tau, symmetric));
}

ag::Var self_nce(const FeatureBatch& f, const ag::Var& inv_tau) {
  require(f.size() >= 2, ErrorCode::BatchTooSmall, "batch size " + std::to_string(f.size()) + " < 2");
  return ag::cross_entropy_diag(ag::mul_scalar(ag::matmul(f.values, ag::transpose(f.values)), inv_tau));
}

ag::Var intra_view_loss(const FeatureBatch& dro, const FeatureBatch& sat, const FeatureBatch& pc,
                        const ag::Var& inv_tau) {
  return ag::add(ag::add(self_nce(dro, inv_tau), self_nce(sat, inv_tau)), self_nce(pc, inv_tau));
}

ag::Var vclub_loglik(const VClubEstimator& est, const FeatureBatch& x, const FeatureBatch& y) {
  require(x.size() == y.size(), ErrorCode::DimMismatch, "vCLUB batches differ in size");
  require(y.dim() == est.w2.cols(), ErrorCode::DimMismatch, "vCLUB target width mismatch");
  const ag::Var mu = est.mean_map(ag::detach(x.values), false);
  return ag::scale(ag::mean(ag::sq_norm_rows(ag::sub(ag::detach(y.values), mu))), -0.5);
}

ag::Var vclub_mi_upper(const VClubEstimator& est, const FeatureBatch& x, const FeatureBatch& y, bool estimator_grad) {
  require(x.size() >= 2, ErrorCode::BatchTooSmall, "vCLUB needs B >= 2");
  require(x.size() == y.size(), ErrorCode::DimMismatch, "vCLUB batches differ in size");
  require(y.dim() == est.w2.cols(), ErrorCode::DimMismatch, "vCLUB target width mismatch");
  const ag::Var mu = est.mean_map(x.values, !estimator_grad);
  // Positive pairs: -1/2 mean_i ||y_i - mu_i||^2.
  const ag::Var pos = ag::scale(ag::mean(ag::sq_norm_rows(ag::sub(y.values, mu))), -0.5);
  // All pairs: -1/2 (mean ||y||^2 + mean ||mu||^2 - 2 <mean mu, mean y>).
  const ag::Var cross = ag::sum(ag::mul(ag::col_mean(mu), ag::col_mean(y.values)));
  const ag::Var all = ag::scale(
      ag::sub(ag::add(ag::mean(ag::sq_norm_rows(y.values)), ag::mean(ag::sq_norm_rows(mu))), ag::scale(cross, 2.0)),
      -0.5);
  return ag::sub(pos, all);
}

double vclub_mi_upper(const VClubEstimator& est, const ag::Mat& x, const ag::Mat& y) {
  return vclub_mi_upper(est, wrap(x), wrap(y)).item();
}

ag::Var geometric_refine_loss(const VClubEstimator& est_d, const VClubEstimator& est_s, const FeatureBatch& dro,
                              const FeatureBatch& sat, const FeatureBatch& pc, bool estimator_grad) {
  check_pair(dro, pc);
  check_pair(sat, pc);
  return ag::add(vclub_mi_upper(est_d, pc, dro, estimator_grad), vclub_mi_upper(est_s, pc, sat, estimator_grad));
}

ag::Var affinity(const ag::Var& features) {
  const Eigen::Index b = features.rows();
  require(b >= 2, ErrorCode::BatchTooSmall, "affinity needs B >= 2");
  const ag::Var d = ag::pairwise_distances(features);
  const double total = d.value().sum();
  if (!(total > 0.0)) {
    ag::Mat u = ag::Mat::Constant(b, b, 1.0 / static_cast<double>(b * (b - 1)));
    u.diagonal().setZero();
    return ag::constant(u);
  }
  return ag::mul_scalar(d, ag::reciprocal(ag::sum(d)));
}

ag::Mat affinity(const ag::Mat& features) { return affinity(ag::constant(features)).value(); }

ag::Var relation_distill_loss(const FeatureBatch& dro, const FeatureBatch& sat, const FeatureBatch& pc,
                              bool teacher_grad) {
  check_pair(dro, pc);
  check_pair(sat, pc);
  const Eigen::Index b = pc.size();
  const ag::Var teacher = affinity(teacher_grad ? pc.values : ag::detach(pc.values));
  const double norm = 1.0 / static_cast<double>(b * (b - 1));
  const ag::Var rd_sat = ag::scale(ag::sum(ag::square(ag::sub(affinity(sat.values), teacher))), norm);
  const ag::Var rd_dro = ag::scale(ag::sum(ag::square(ag::sub(affinity(dro.values), teacher))), norm);
  return ag::add(rd_sat, rd_dro);
}

double combine(double cc, double rd, double ga, double sc, double lambda_sc) { return cc + rd + ga + lambda_sc * sc; }

LossTerms total_loss(const FeatureBatch& dro, const FeatureBatch& sat, const FeatureBatch& pc,
                     const Temperature& temp, const VClubEstimator& est_d, const VClubEstimator& est_s,
                     const LossConfig& cfg) {
  cfg.validate();
  const ag::Var inv_tau = temp.inverse();
  LossTerms out;
  const ag::Var nce_ds = info_nce(dro, sat, inv_tau, cfg.symmetric_nce);
  const ag::Var nce_dp = info_nce(dro, pc, inv_tau, cfg.symmetric_nce);
  const ag::Var nce_sp = info_nce(sat, pc, inv_tau, cfg.symmetric_nce);
  ag::Var total = ag::add(ag::add(nce_ds, nce_dp), nce_sp);
  out.report.cc = total.item();
  out.report.nce_dro_pc = nce_dp.item();
  out.report.nce_sat_pc = nce_sp.item();
  if (cfg.enable_rd) {
    const ag::Var rd = relation_distill_loss(dro, sat, pc, cfg.rd_teacher_grad);
    out.report.rd = rd.item();
    total = ag::add(total, rd);
  }
  if (cfg.enable_ga) {
    const ag::Var ga = geometric_refine_loss(est_d, est_s, dro, sat, pc, cfg.estimator_grad_in_total);
    out.report.ga = ga.item();
    total = ag::add(total, ga);
  }
  if (cfg.enable_sc) {
    const ag::Var sc = intra_view_loss(dro, sat, pc, inv_tau);
    out.report.sc = sc.item();
    if (cfg.lambda_sc != 0.0) total = ag::add(total, ag::scale(sc, cfg.lambda_sc));
  }
  out.report.total = total.item();
  out.report.tau = temp.tau();
  out.total = total;
  return out;
}

}  // namespace geolink::obj
