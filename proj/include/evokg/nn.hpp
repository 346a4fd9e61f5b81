#pragma once

#include <random>

#include "evokg/autodiff.hpp"

namespace evokg {

// Uniform in +-sqrt(6 / (fan_in + fan_out)); defaults to cols/rows fans.
ad::Matrix glorot_uniform(ad::Index rows, ad::Index cols, std::mt19937_64& rng,
                          double fan_in = 0, double fan_out = 0);

// Inverted dropout. A null pointer or rate 0 means evaluation mode.
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  bool active() const { return rng != nullptr && rate > 0.0; }
  ad::Var apply(const ad::Var& x) const;
};

// Linear -> ReLU -> (dropout) -> Linear.
struct Perceptron {
  ad::Var hidden_weight;  // hidden x in
  ad::Var hidden_bias;    // hidden x 1
  ad::Var out_weight;     // out x hidden
  ad::Var out_bias;       // out x 1

  static Perceptron glorot(int in_dim, int hidden_dim, int out_dim, std::mt19937_64& rng);

  ad::Var forward(const ad::Var& x, const Dropout* dropout = nullptr) const;
  // Value-only evaluation, no graph.
  ad::Matrix eval(const ad::Matrix& x) const;

  int in_dim() const { return static_cast<int>(hidden_weight.cols()); }
  int out_dim() const { return static_cast<int>(out_bias.rows()); }
};

}  // namespace evokg
