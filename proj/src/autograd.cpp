// SPDX-License-Identifier: Apache-2.0
#include "geolink/autograd.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "geolink/error.hpp"

namespace geolink::ag {

void Node::accumulate(const Mat& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Mat value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::item() const {
  require(rows() == 1 && cols() == 1, ErrorCode::ShapeError, "item() on non-scalar");
  return node_->value(0, 0);
}

void Var::zero_grad() {
  if (node_) node_->grad.resize(0, 0);
}

Var constant(Mat value) { return Var(std::move(value), false); }
Var parameter(Mat value) { return Var(std::move(value), true); }

namespace {

using Fn = std::function<void(Node&)>;

Var make(Mat value, std::vector<Var> parents, Fn fn) {
  Var out(std::move(value), false);
  auto& node = *out.node();
  for (const auto& p : parents) {
    if (p.requires_grad()) node.requires_grad = true;
  }
  if (node.requires_grad) {
    for (auto& p : parents) node.parents.push_back(p.node());
    node.backward_fn = std::move(fn);
  }
  return out;
}

inline Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

void check_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::DimMismatch,
          std::string(op) + ": shape mismatch");
}

}  // namespace

void backward(const Var& root) {
  require(root.rows() == 1 && root.cols() == 1, ErrorCode::ShapeError,
          "backward() requires a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* child = node->parents[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Mat::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
  // Interior grads are not needed after the pass; leaves keep theirs.
  for (Node* n : order) {
    if (n->backward_fn) n->grad.resize(0, 0);
  }
}

Var detach(const Var& a) { return constant(a.value()); }

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), ErrorCode::DimMismatch, "matmul: inner dimensions differ");
  return make(a.value() * b.value(), {a, b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * n.grad);
  });
}

Var transpose(const Var& a) {
  return make(a.value().transpose(), {a}, [](Node& n) {
    parent(n, 0).accumulate(n.grad.transpose());
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a, b}, [](Node& n) {
    for (auto& p : n.parents) {
      if (p->requires_grad) p->accumulate(n.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a, b}, [](Node& n) {
    if (parent(n, 0).requires_grad) parent(n, 0).accumulate(n.grad);
    if (parent(n, 1).requires_grad) parent(n, 1).accumulate(-n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(n.grad.cwiseProduct(pa.value));
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a}, [s](Node& n) { parent(n, 0).accumulate(n.grad * s); });
}

Var mul_scalar(const Var& a, const Var& s) {
  require(s.rows() == 1 && s.cols() == 1, ErrorCode::ShapeError, "mul_scalar: s must be 1x1");
  return make(a.value() * s.value()(0, 0), {a, s}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& ps = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad * ps.value(0, 0));
    if (ps.requires_grad) ps.accumulate(Mat::Constant(1, 1, n.grad.cwiseProduct(pa.value).sum()));
  });
}

Var add_scalar(const Var& a, double s) {
  return make(a.value().array() + s, {a}, [](Node& n) { parent(n, 0).accumulate(n.grad); });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorCode::DimMismatch,
          "add_row: row must be 1xN");
  Mat out = a.value().rowwise() + row.value().row(0);
  return make(std::move(out), {a, row}, [](Node& n) {
    if (parent(n, 0).requires_grad) parent(n, 0).accumulate(n.grad);
    if (parent(n, 1).requires_grad) parent(n, 1).accumulate(n.grad.colwise().sum());
  });
}

Var mul_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorCode::DimMismatch,
          "mul_row: row must be 1xN");
  Mat out = a.value().array().rowwise() * row.value().row(0).array();
  return make(std::move(out), {a, row}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pr = parent(n, 1);
    if (pa.requires_grad) {
      pa.accumulate((n.grad.array().rowwise() * pr.value.row(0).array()).matrix());
    }
    if (pr.requires_grad) pr.accumulate(n.grad.cwiseProduct(pa.value).colwise().sum());
  });
}

Var mul_col(const Var& a, const Var& col) {
  require(col.cols() == 1 && col.rows() == a.rows(), ErrorCode::DimMismatch,
          "mul_col: col must be Bx1");
  Mat out = a.value().array().colwise() * col.value().col(0).array();
  return make(std::move(out), {a, col}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pc = parent(n, 1);
    if (pa.requires_grad) {
      pa.accumulate((n.grad.array().colwise() * pc.value.col(0).array()).matrix());
    }
    if (pc.requires_grad) pc.accumulate(n.grad.cwiseProduct(pa.value).rowwise().sum());
  });
}

Var exp(const Var& a) {
  Mat out = a.value().array().exp();
  return make(out, {a}, [out](Node& n) { parent(n, 0).accumulate(n.grad.cwiseProduct(out)); });
}

Var log(const Var& a) {
  return make(a.value().array().log(), {a}, [](Node& n) {
    Node& pa = parent(n, 0);
    pa.accumulate(n.grad.cwiseQuotient(pa.value));
  });
}

Var reciprocal(const Var& a) {
  Mat out = a.value().cwiseInverse();
  return make(out, {a}, [out](Node& n) {
    parent(n, 0).accumulate(-n.grad.cwiseProduct(out.cwiseProduct(out)));
  });
}

Var square(const Var& a) {
  return make(a.value().array().square(), {a}, [](Node& n) {
    Node& pa = parent(n, 0);
    pa.accumulate(2.0 * n.grad.cwiseProduct(pa.value));
  });
}

Var gelu(const Var& a) {
  // Exact erf form: x * Phi(x).
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  Mat out = a.value().unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
  return make(std::move(out), {a}, [inv_sqrt2pi](Node& n) {
    Node& pa = parent(n, 0);
    Mat d = pa.value.unaryExpr([inv_sqrt2pi](double x) {
      return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
    });
    pa.accumulate(n.grad.cwiseProduct(d));
  });
}

Var sum(const Var& a) {
  return make(Mat::Constant(1, 1, a.value().sum()), {a}, [](Node& n) {
    Node& pa = parent(n, 0);
    pa.accumulate(Mat::Constant(pa.value.rows(), pa.value.cols(), n.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double count = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / count);
}

Var sq_norm_rows(const Var& a) {
  return make(a.value().rowwise().squaredNorm(), {a}, [](Node& n) {
    Node& pa = parent(n, 0);
    pa.accumulate(2.0 * (pa.value.array().colwise() * n.grad.col(0).array()).matrix());
  });
}

Var col_mean(const Var& a) {
  const double rows = static_cast<double>(a.rows());
  return make(a.value().colwise().mean(), {a}, [rows](Node& n) {
    Node& pa = parent(n, 0);
    Mat g = n.grad.replicate(pa.value.rows(), 1) / rows;
    pa.accumulate(g);
  });
}

Var softmax_rows(const Var& a) {
  Mat out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mx = a.value().row(i).maxCoeff();
    out.row(i) = (a.value().row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return make(out, {a}, [out](Node& n) {
    Mat g(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double dot = n.grad.row(i).dot(out.row(i));
      g.row(i) = out.row(i).array() * (n.grad.row(i).array() - dot);
    }
    parent(n, 0).accumulate(g);
  });
}

Var l2_normalize_rows(const Var& a) {
  Eigen::VectorXd norms = a.value().rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    require(norms(i) > 0.0, ErrorCode::ZeroVector, "l2_normalize: row " + std::to_string(i) + " is zero");
  }
  Mat out = a.value().array().colwise() / norms.array();
  return make(out, {a}, [out, norms](Node& n) {
    Mat g(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double dot = n.grad.row(i).dot(out.row(i));
      g.row(i) = (n.grad.row(i) - dot * out.row(i)) / norms(i);
    }
    parent(n, 0).accumulate(g);
  });
}

Var layer_norm_rows(const Var& a, double eps) {
  const Eigen::Index cols = a.cols();
  Mat out(a.rows(), cols);
  Eigen::VectorXd inv_std(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mu = a.value().row(i).mean();
    const double var = (a.value().row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    out.row(i) = (a.value().row(i).array() - mu) * inv_std(i);
  }
  return make(out, {a}, [out, inv_std, cols](Node& n) {
    Mat g(out.rows(), cols);
    const double c = static_cast<double>(cols);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double mean_g = n.grad.row(i).mean();
      const double mean_gx = n.grad.row(i).dot(out.row(i)) / c;
      g.row(i) = inv_std(i) * (n.grad.row(i).array() - mean_g - out.row(i).array() * mean_gx);
    }
    parent(n, 0).accumulate(g);
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::ShapeError, "concat_cols: no parts");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index total = 0;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    require(p.rows() == rows, ErrorCode::DimMismatch, "concat_cols: row counts differ");
    widths.push_back(p.cols());
    total += p.cols();
  }
  Mat out(rows, total);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return make(std::move(out), parents, [widths](Node& n) {
    Eigen::Index o = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      Node& p = parent(n, i);
      if (p.requires_grad) p.accumulate(n.grad.middleCols(o, widths[i]));
      o += widths[i];
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorCode::ShapeError,
          "slice_cols: out of range");
  return make(a.value().middleCols(start, count), {a}, [start, count](Node& n) {
    Node& pa = parent(n, 0);
    Mat g = Mat::Zero(pa.value.rows(), pa.value.cols());
    g.middleCols(start, count) = n.grad;
    pa.accumulate(g);
  });
}

Var cross_entropy_diag(const Var& logits) {
  require(logits.rows() == logits.cols(), ErrorCode::ShapeError, "cross_entropy_diag: logits must be square");
  const Eigen::Index b = logits.rows();
  Mat probs(b, b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double mx = logits.value().row(i).maxCoeff();
    probs.row(i) = (logits.value().row(i).array() - mx).exp();
    const double z = probs.row(i).sum();
    probs.row(i) /= z;
    total += (mx + std::log(z)) - logits.value()(i, i);
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  return make(Mat::Constant(1, 1, total * inv_b), {logits}, [probs, inv_b](Node& n) {
    Mat g = probs;
    g.diagonal().array() -= 1.0;
    parent(n, 0).accumulate(g * (n.grad(0, 0) * inv_b));
  });
}

Var pairwise_distances(const Var& a) {
  const Eigen::Index b = a.rows();
  Mat d = Mat::Zero(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = i + 1; j < b; ++j) {
      const double v = (a.value().row(i) - a.value().row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return make(d, {a}, [d](Node& n) {
    Node& pa = parent(n, 0);
    const Eigen::Index rows = pa.value.rows();
    Mat g = Mat::Zero(rows, pa.value.cols());
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = i + 1; j < rows; ++j) {
        if (d(i, j) == 0.0) continue;
        // d(i,j) and d(j,i) both depend on rows i and j.
        const double w = (n.grad(i, j) + n.grad(j, i)) / d(i, j);
        Eigen::RowVectorXd diff = pa.value.row(i) - pa.value.row(j);
        g.row(i) += w * diff;
        g.row(j) -= w * diff;
      }
    }
    pa.accumulate(g);
  });
}

Var block_left_matmul(const Var& left, const Var& x, Eigen::Index block_rows) {
  require(block_rows > 0 && x.rows() % block_rows == 0, ErrorCode::ShapeError,
          "block_left_matmul: rows not divisible by block size");
  require(left.cols() == block_rows, ErrorCode::DimMismatch, "block_left_matmul: left.cols != block size");
  const Eigen::Index blocks = x.rows() / block_rows;
  const Eigen::Index out_rows = left.rows();
  Mat out(blocks * out_rows, x.cols());
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.middleRows(b * out_rows, out_rows) = left.value() * x.value().middleRows(b * block_rows, block_rows);
  }
  return make(std::move(out), {left, x}, [blocks, block_rows, out_rows](Node& n) {
    Node& pl = parent(n, 0);
    Node& px = parent(n, 1);
    Mat gl = Mat::Zero(pl.value.rows(), pl.value.cols());
    Mat gx(px.value.rows(), px.value.cols());
    for (Eigen::Index b = 0; b < blocks; ++b) {
      const auto go = n.grad.middleRows(b * out_rows, out_rows);
      if (pl.requires_grad) gl += go * px.value.middleRows(b * block_rows, block_rows).transpose();
      if (px.requires_grad) gx.middleRows(b * block_rows, block_rows) = pl.value.transpose() * go;
    }
    if (pl.requires_grad) pl.accumulate(gl);
    if (px.requires_grad) px.accumulate(gx);
  });
}

Var block_mean_rows(const Var& x, Eigen::Index block_rows) {
  require(block_rows > 0 && x.rows() % block_rows == 0, ErrorCode::ShapeError,
          "block_mean_rows: rows not divisible by block size");
  const Eigen::Index blocks = x.rows() / block_rows;
  Mat out(blocks, x.cols());
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.row(b) = x.value().middleRows(b * block_rows, block_rows).colwise().mean();
  }
  return make(std::move(out), {x}, [blocks, block_rows](Node& n) {
    Node& px = parent(n, 0);
    Mat g(px.value.rows(), px.value.cols());
    const double inv = 1.0 / static_cast<double>(block_rows);
    for (Eigen::Index b = 0; b < blocks; ++b) {
      g.middleRows(b * block_rows, block_rows) = n.grad.row(b).replicate(block_rows, 1) * inv;
    }
    px.accumulate(g);
  });
}

}  // namespace geolink::ag
