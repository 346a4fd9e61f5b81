#include "evokg/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace evokg::ad {

void Node::ensure_grad() {
  if (!has_grad || grad.rows() != value.rows() || grad.cols() != value.cols()) {
    grad = Matrix::Zero(value.rows(), value.cols());
    has_grad = true;
  }
}

void Node::accumulate(const Matrix& g) {
  ensure_grad();
  grad += g;
}

Var Var::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void Var::zero_grad() {
  node_->grad.resize(0, 0);
  node_->has_grad = false;
}

Var make_op(Matrix value, std::vector<Var> parents,
            std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1x1");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; `order` ends up parents-before-children.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->backward) {
      n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
      n->has_grad = true;
    }
  }
  loss.node()->ensure_grad();
  loss.node()->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& n) {
    for (auto& p : n.parents)
      if (p->requires_grad) p->accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(-n.grad);
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a},
                 [s](Node& n) { n.parents[0]->accumulate(n.grad * s); });
}

Var add_bias(const Var& a, const Var& bias) {
  if (bias.cols() != 1 || bias.rows() != a.rows())
    throw std::invalid_argument("add_bias: bias must be rows x 1");
  Matrix out = a.value().colwise() + bias.value().col(0);
  return make_op(std::move(out), {a, bias}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(n.grad.rowwise().sum());
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix out = a.value() * b.value();
  return make_op(std::move(out), {a, b}, [](Node& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) pa->accumulate(n.grad * pb->value.transpose());
    if (pb->requires_grad) pb->accumulate(pa->value.transpose() * n.grad);
  });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_op(std::move(out), {a}, [](Node& n) {
    const Matrix& x = n.parents[0]->value;
    n.parents[0]->accumulate((x.array() > 0.0).select(n.grad, 0.0));
  });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  return make_op(std::move(out), {a}, [](Node& n) {
    n.parents[0]->accumulate((n.grad.array() * (1.0 - n.value.array().square())).matrix());
  });
}

Var mul_const(const Var& a, const Matrix& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols())
    throw std::invalid_argument("mul_const: shape mismatch");
  Matrix out = a.value().cwiseProduct(mask);
  return make_op(std::move(out), {a},
                 [mask](Node& n) { n.parents[0]->accumulate(n.grad.cwiseProduct(mask)); });
}

Var vcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: no parts");
  Index cols = parts[0].cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("vcat: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    offsets.push_back(r);
    r += p.rows();
  }
  return make_op(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                 [offsets](Node& n) {
                   for (std::size_t i = 0; i < n.parents.size(); ++i) {
                     auto& p = n.parents[i];
                     if (p->requires_grad)
                       p->accumulate(n.grad.middleRows(offsets[i], p->value.rows()));
                   }
                 });
}

Var gather_cols(const Var& a, std::span<const int> cols) {
  Matrix out(a.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= a.cols())
      throw std::out_of_range("gather_cols: column index out of range");
    out.col(static_cast<Index>(j)) = a.value().col(cols[j]);
  }
  std::vector<int> idx(cols.begin(), cols.end());
  return make_op(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (std::size_t j = 0; j < idx.size(); ++j)
      p->grad.col(idx[j]) += n.grad.col(static_cast<Index>(j));
  });
}

Var broadcast_cols(const Var& column, Index n) {
  if (column.cols() != 1) throw std::invalid_argument("broadcast_cols: expects a column");
  Matrix out = column.value().replicate(1, n);
  return make_op(std::move(out), {column},
                 [](Node& node) { node.parents[0]->accumulate(node.grad.rowwise().sum()); });
}

Var rowwise_max(const Var& a) {
  if (a.cols() == 0) throw std::invalid_argument("rowwise_max: empty matrix");
  Matrix out(a.rows(), 1);
  std::vector<Index> arg(static_cast<std::size_t>(a.rows()));
  for (Index i = 0; i < a.rows(); ++i) {
    Index j = 0;
    out(i, 0) = a.value().row(i).maxCoeff(&j);
    arg[static_cast<std::size_t>(i)] = j;
  }
  return make_op(std::move(out), {a}, [arg = std::move(arg)](Node& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (std::size_t i = 0; i < arg.size(); ++i)
      p->grad(static_cast<Index>(i), arg[i]) += n.grad(static_cast<Index>(i), 0);
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_op(std::move(out), {a}, [](Node& n) {
    auto& p = n.parents[0];
    p->accumulate(Matrix::Constant(p->value.rows(), p->value.cols(), n.grad(0, 0)));
  });
}

Var log_softmax_pick(const Var& logits, std::span<const int> pick) {
  if (static_cast<Index>(pick.size()) != logits.cols())
    throw std::invalid_argument("log_softmax_pick: one index per column required");
  const Matrix& z = logits.value();
  Matrix probs(z.rows(), z.cols());
  Matrix out(1, z.cols());
  for (Index j = 0; j < z.cols(); ++j) {
    const int k = pick[static_cast<std::size_t>(j)];
    if (k < 0 || k >= z.rows()) throw std::out_of_range("log_softmax_pick: index out of range");
    const double m = z.col(j).maxCoeff();
    const double lse = m + std::log((z.col(j).array() - m).exp().sum());
    probs.col(j) = (z.col(j).array() - lse).exp().matrix();
    out(0, j) = z(k, j) - lse;
  }
  std::vector<int> idx(pick.begin(), pick.end());
  return make_op(std::move(out), {logits},
                 [probs = std::move(probs), idx = std::move(idx)](Node& n) {
                   Matrix g = -probs;
                   for (Index j = 0; j < g.cols(); ++j) {
                     g(idx[static_cast<std::size_t>(j)], j) += 1.0;
                     g.col(j) *= n.grad(0, j);
                   }
                   n.parents[0]->accumulate(g);
                 });
}

Var block_diag_matmul(const Var& blocks, const Var& x, int num_blocks) {
  const Index in = x.rows();
  if (num_blocks < 1 || in % num_blocks != 0 || blocks.cols() != in)
    throw std::invalid_argument("block_diag_matmul: input size not divisible into blocks");
  const Index bi = in / num_blocks;
  const Index bo = blocks.rows();
  Matrix out(bo * num_blocks, x.cols());
  for (int b = 0; b < num_blocks; ++b)
    out.middleRows(b * bo, bo).noalias() =
        blocks.value().middleCols(b * bi, bi) * x.value().middleRows(b * bi, bi);
  return make_op(std::move(out), {blocks, x}, [num_blocks, bi, bo](Node& n) {
    auto& pw = n.parents[0];
    auto& px = n.parents[1];
    for (int b = 0; b < num_blocks; ++b) {
      auto gout = n.grad.middleRows(b * bo, bo);
      if (pw->requires_grad)
        pw->accumulate_block(0, b * bi, gout * px->value.middleRows(b * bi, bi).transpose());
      if (px->requires_grad)
        px->accumulate_block(b * bi, 0, pw->value.middleCols(b * bi, bi).transpose() * gout);
    }
  });
}

}  // namespace evokg::ad
