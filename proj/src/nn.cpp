#include "evokg/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace evokg {

ad::Matrix glorot_uniform(ad::Index rows, ad::Index cols, std::mt19937_64& rng, double fan_in,
                          double fan_out) {
  if (fan_in <= 0) fan_in = static_cast<double>(cols);
  if (fan_out <= 0) fan_out = static_cast<double>(rows);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  ad::Matrix m(rows, cols);
  for (ad::Index j = 0; j < cols; ++j)
    for (ad::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

ad::Var Dropout::apply(const ad::Var& x) const {
  if (!active()) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  ad::Matrix mask(x.rows(), x.cols());
  for (ad::Index j = 0; j < mask.cols(); ++j)
    for (ad::Index i = 0; i < mask.rows(); ++i) mask(i, j) = keep(*rng) ? s : 0.0;
  return ad::mul_const(x, mask);
}

Perceptron Perceptron::glorot(int in_dim, int hidden_dim, int out_dim, std::mt19937_64& rng) {
  Perceptron p;
  p.hidden_weight = ad::Var::parameter(glorot_uniform(hidden_dim, in_dim, rng));
  p.hidden_bias = ad::Var::parameter(ad::Matrix::Zero(hidden_dim, 1));
  p.out_weight = ad::Var::parameter(glorot_uniform(out_dim, hidden_dim, rng));
  p.out_bias = ad::Var::parameter(ad::Matrix::Zero(out_dim, 1));
  return p;
}

ad::Var Perceptron::forward(const ad::Var& x, const Dropout* dropout) const {
  if (x.rows() != in_dim())
    throw std::invalid_argument("perceptron: input dimension " + std::to_string(x.rows()) +
                                " != " + std::to_string(in_dim()));
  ad::Var h = ad::relu(ad::add_bias(ad::matmul(hidden_weight, x), hidden_bias));
  if (dropout) h = dropout->apply(h);
  return ad::add_bias(ad::matmul(out_weight, h), out_bias);
}

ad::Matrix Perceptron::eval(const ad::Matrix& x) const {
  if (x.rows() != in_dim())
    throw std::invalid_argument("perceptron: input dimension " + std::to_string(x.rows()) +
                                " != " + std::to_string(in_dim()));
  ad::Matrix h = ((hidden_weight.value() * x).colwise() + hidden_bias.value().col(0)).cwiseMax(0.0);
  return (out_weight.value() * h).colwise() + out_bias.value().col(0);
}

}  // namespace evokg
