#include "evokg/optimizer.hpp"

#include <cmath>

namespace evokg {

AdamW::AdamW(std::vector<NamedParameter> params, AdamWOptions options)
    : params_(std::move(params)), slots_(params_.size()), opt_(options) {}

void AdamW::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& var = params_[i].var;
    if (!var.has_grad()) continue;
    auto& s = slots_[i];
    if (s.steps == 0) {
      s.m = ad::Matrix::Zero(var.rows(), var.cols());
      s.v = ad::Matrix::Zero(var.rows(), var.cols());
    }
    ++s.steps;
    const ad::Matrix& g = var.grad();
    s.m = opt_.beta1 * s.m + (1.0 - opt_.beta1) * g;
    s.v = opt_.beta2 * s.v + (1.0 - opt_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(s.steps));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(s.steps));
    auto& w = var.mutable_value();
    w *= 1.0 - opt_.learning_rate * opt_.weight_decay;
    w.array() -= opt_.learning_rate * (s.m.array() / c1) /
                 ((s.v.array() / c2).sqrt() + opt_.epsilon);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

double clip_grad_norm(std::span<const NamedParameter> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.var.has_grad()) sq += p.var.grad().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / (norm + 1e-6);
    for (const auto& p : params)
      if (p.var.has_grad()) p.var.node()->grad *= f;
  }
  return norm;
}

}  // namespace evokg
