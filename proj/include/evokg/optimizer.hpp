#pragma once

#include <vector>

#include "evokg/autodiff.hpp"
#include "evokg/model.hpp"

namespace evokg {

struct AdamWOptions {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with decoupled weight decay. Parameters without a gradient in a step
// are left untouched, moments included.
class AdamW {
 public:
  AdamW(std::vector<NamedParameter> params, AdamWOptions options);

  void step();
  void zero_grad();
  const std::vector<NamedParameter>& parameters() const { return params_; }

 private:
  struct Slot {
    ad::Matrix m, v;
    long steps = 0;
  };
  std::vector<NamedParameter> params_;
  std::vector<Slot> slots_;
  AdamWOptions opt_;
};

// Rescales gradients so their joint L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(std::span<const NamedParameter> params, double max_norm);

}  // namespace evokg
