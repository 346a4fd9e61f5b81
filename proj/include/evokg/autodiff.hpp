#pragma once

// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// A Var is a shared handle to a node holding a value and (lazily) a gradient.
// Ops build a DAG; backward() walks it in reverse topological order. Graph
// lifetime follows the handles: dropping every Var that references a node
// frees the lineage behind it, which is how truncated backpropagation is done.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace evokg::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // Adds g into grad, allocating on first use.
  void accumulate(const Matrix& g);
  template <typename Derived>
  void accumulate_block(Index row, Index col, const Eigen::MatrixBase<Derived>& g) {
    ensure_grad();
    grad.block(row, col, g.rows(), g.cols()) += g;
  }
  void ensure_grad();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Matrix value);
  static Var parameter(Matrix value);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->has_grad; }
  void zero_grad();
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool defined() const { return static_cast<bool>(node_); }

  // Same value, no lineage.
  Var detach() const { return constant(node_->value); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds an op node. The backward callback reads node.grad and accumulates
// into node.parents[i] (skipping parents without requires_grad); it must not
// capture the node itself. If no parent requires gradients the result is a
// constant and the callback is dropped.
Var make_op(Matrix value, std::vector<Var> parents,
            std::function<void(Node&)> backward);

// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node. Leaf
// gradients accumulate across calls; intermediate gradients are reset.
void backward(const Var& loss);

// Elementwise / shape ops.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_bias(const Var& a, const Var& bias);  // bias is rows x 1, broadcast over cols
Var matmul(const Var& a, const Var& b);
Var relu(const Var& a);
Var tanh(const Var& a);
Var mul_const(const Var& a, const Matrix& mask);
Var vcat(std::span<const Var> parts);
Var gather_cols(const Var& a, std::span<const int> cols);
Var broadcast_cols(const Var& column, Index n);
Var rowwise_max(const Var& a);
Var sum(const Var& a);

// Per column j: log_softmax(logits.col(j))[pick[j]]. Result is 1 x n.
Var log_softmax_pick(const Var& logits, std::span<const int> pick);

// Block-diagonal product. `blocks` stores the B diagonal blocks side by side,
// shape (out/B) x in; x is in x n. Result is out x n.
Var block_diag_matmul(const Var& blocks, const Var& x, int num_blocks);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace evokg::ad
