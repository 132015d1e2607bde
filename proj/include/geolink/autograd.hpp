// SPDX-License-Identifier: Apache-2.0
//
// Minimal tape-free reverse-mode differentiation over dense double matrices.
// Every op returns a Var holding its value and a closure that pushes the
// upstream gradient into its parents. backward() walks the graph in reverse
// topological order from a 1x1 root.
#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace geolink::ag {

using Mat = Eigen::MatrixXd;

struct Node {
  Mat value;
  Mat grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Mat& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Mat value, bool requires_grad = false);

  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }
  const Mat& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;

  void zero_grad();
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Constant leaf (no gradient tracking).
Var constant(Mat value);
// Trainable leaf.
Var parameter(Mat value);

// Runs reverse accumulation from a scalar root. Gradients accumulate into
// every reachable node that requires grad.
void backward(const Var& root);

// Same value, cut from the graph.
Var detach(const Var& a);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// a * s where s is 1x1.
Var mul_scalar(const Var& a, const Var& s);
Var add_scalar(const Var& a, double s);

// Broadcast a 1xN row over every row of a (BxN).
Var add_row(const Var& a, const Var& row);
Var mul_row(const Var& a, const Var& row);
// Broadcast a Bx1 column over every column of a (BxN).
Var mul_col(const Var& a, const Var& col);

Var exp(const Var& a);
Var log(const Var& a);
Var reciprocal(const Var& a);
Var square(const Var& a);
Var gelu(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
// Bx1 row sums of squares.
Var sq_norm_rows(const Var& a);
// 1xN column means.
Var col_mean(const Var& a);

Var softmax_rows(const Var& a);
// Throws ErrorCode::ZeroVector on an all-zero row.
Var l2_normalize_rows(const Var& a);
// Per-row standardization (zero mean, unit variance, eps inside the sqrt).
Var layer_norm_rows(const Var& a, double eps = 1e-5);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);

// mean_i [ logsumexp_j L(i,j) - L(i,i) ]; L must be square.
Var cross_entropy_diag(const Var& logits);

// BxB Euclidean distances between rows. The diagonal is held at 0 and a
// zero off-diagonal distance contributes zero gradient.
Var pairwise_distances(const Var& a);

// Row blocks of size block_rows: out_b = left * x_b. Used for token mixing.
Var block_left_matmul(const Var& left, const Var& x, Eigen::Index block_rows);
// Mean over each block of block_rows consecutive rows -> (rows/block_rows) x N.
Var block_mean_rows(const Var& x, Eigen::Index block_rows);

}  // namespace geolink::ag
