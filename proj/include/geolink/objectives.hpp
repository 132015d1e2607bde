// SPDX-License-Identifier: Apache-2.0
//
// Training objectives: InfoNCE with a learnable temperature, cross-view and
// intra-view contrastive losses, the vCLUB mutual-information upper bound,
// affinity-based relational distillation and the weighted total.
#pragma once

#include <cstdint>
#include <string>

#include "geolink/autograd.hpp"
#include "geolink/features.hpp"
#include "geolink/nn.hpp"

namespace geolink::obj {

struct LossConfig {
  double lambda_sc = 4.0;
  double init_tau = 0.05;
  bool enable_sc = true;
  bool enable_ga = true;
  bool enable_rd = true;
  // Averages q->r and r->q InfoNCE instead of the one-directional form.
  bool symmetric_nce = false;
  // Lets L_rd push gradients into the teacher features.
  bool rd_teacher_grad = false;
  // Lets L_ga push gradients into the vCLUB estimators (gradient audits only).
  bool estimator_grad_in_total = false;

  void validate() const;
};

// Learnable temperature stored as log(tau).
struct Temperature {
  ag::Var log_tau;

  static Temperature init(double tau);
  double tau() const;
  // 1x1 Var holding 1/tau.
  ag::Var inverse() const;
};

// Gaussian variational family with identity covariance; the mean is a
// linear-GELU-linear map of the 3D feature.
struct VClubEstimator {
  ag::Var w1, b1, w2, b2;

  static VClubEstimator init(int in_dim, int hidden, int out_dim, std::uint64_t seed);
  int hidden() const { return static_cast<int>(w1.cols()); }
  void register_params(nn::ParameterSet& set, const std::string& prefix) const;
  ag::Var mean_map(const ag::Var& x, bool frozen) const;
};

// mean_i -log softmax_j(q_i . r_j * inv_tau)[i]. Throws BatchTooSmall (B < 2),
// DimMismatch or AlignmentError on size mismatch.
ag::Var info_nce(const FeatureBatch& q, const FeatureBatch& r, const ag::Var& inv_tau, bool symmetric = false);
double info_nce(const ag::Mat& q, const ag::Mat& r, double tau);

// nce(dro, sat) + nce(dro, pc) + nce(sat, pc). Throws AlignmentError when the
// scene_id orders differ.
ag::Var cross_view_loss(const FeatureBatch& dro, const FeatureBatch& sat, const FeatureBatch& pc,
                        const ag::Var& inv_tau, bool symmetric = false);

// Self-as-positive InfoNCE for one view.
ag::Var self_nce(const FeatureBatch& f, const ag::Var& inv_tau);
// Sum of self_nce over the three views.
ag::Var intra_view_loss(const FeatureBatch& dro, const FeatureBatch& sat, const FeatureBatch& pc,
                        const ag::Var& inv_tau);

// -1/2 mean_i ||y_i - mu(x_i)||^2 (constant omitted). Gradients reach the
// estimator only.
ag::Var vclub_loglik(const VClubEstimator& est, const FeatureBatch& x, const FeatureBatch& y);

// Sample vCLUB estimate: mean_i log v(y_i|x_i) - mean_{i,j} log v(y_j|x_i).
// The estimator is frozen unless estimator_grad is set.
ag::Var vclub_mi_upper(const VClubEstimator& est, const FeatureBatch& x, const FeatureBatch& y,
                       bool estimator_grad = false);
// Plain-matrix form used by estimator convergence studies.
double vclub_mi_upper(const VClubEstimator& est, const ag::Mat& x, const ag::Mat& y);

ag::Var geometric_refine_loss(const VClubEstimator& est_d, const VClubEstimator& est_s, const FeatureBatch& dro,
                              const FeatureBatch& sat, const FeatureBatch& pc, bool estimator_grad = false);

// B x B normalized distance matrix; uniform off-diagonal when all rows coincide.
ag::Var affinity(const ag::Var& features);
ag::Mat affinity(const ag::Mat& features);

// sum over v of mean_{i != j} (A_v(i,j) - A_T(i,j))^2.
ag::Var relation_distill_loss(const FeatureBatch& dro, const FeatureBatch& sat, const FeatureBatch& pc,
                              bool teacher_grad = false);

struct LossReport {
  double cc = 0.0;
  double sc = 0.0;
  double ga = 0.0;
  double rd = 0.0;
  double total = 0.0;
  double tau = 0.0;
  double nce_dro_pc = 0.0;
  double nce_sat_pc = 0.0;
};

struct LossTerms {
  ag::Var total;
  LossReport report;
};

// cc + rd + ga + lambda * sc with disabled terms contributing 0. All batches
// must already be L2-normalized.
LossTerms total_loss(const FeatureBatch& dro, const FeatureBatch& sat, const FeatureBatch& pc,
                     const Temperature& temp, const VClubEstimator& est_d, const VClubEstimator& est_s,
                     const LossConfig& cfg);

// Scalar combination used by report consumers.
double combine(double cc, double rd, double ga, double sc, double lambda_sc);

}  // namespace geolink::obj
