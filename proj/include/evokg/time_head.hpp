#pragma once

// Inter-event time densities as log-normal mixtures.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "evokg/autodiff.hpp"
#include "evokg/nn.hpp"
#include "evokg/tkg_store.hpp"

namespace evokg {

template <typename Scalar = double>
struct MixtureParams {
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
  Vector weight;  // simplex
  Vector mean;    // of log tau
  Vector stddev;  // > 0

  Eigen::Index size() const { return weight.size(); }

  bool valid(Scalar tolerance = Scalar(1e-6)) const {
    using std::abs;
    return weight.size() == mean.size() && weight.size() == stddev.size() && weight.size() > 0 &&
           abs(weight.sum() - Scalar(1)) <= tolerance && (weight.array() >= Scalar(0)).all() &&
           (stddev.array() > Scalar(0)).all();
  }
};

// log sum_k w_k LogNormal(tau; mu_k, sigma_k), stabilised with log-sum-exp.
template <typename Scalar>
Scalar log_density(Scalar tau, const MixtureParams<Scalar>& p) {
  using std::exp;
  using std::log;
  if (!(tau > Scalar(0))) throw std::domain_error("log_density: tau must be positive");
  const Scalar log_tau = log(tau);
  const Scalar half_log_2pi = Scalar(0.5) * log(Scalar(2) * Scalar(std::numbers::pi));
  typename MixtureParams<Scalar>::Vector terms(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const Scalar z = (log_tau - p.mean[k]) / p.stddev[k];
    terms[k] = log(p.weight[k]) - log_tau - log(p.stddev[k]) - half_log_2pi - Scalar(0.5) * z * z;
  }
  const Scalar m = terms.maxCoeff();
  if (!std::isfinite(static_cast<double>(m))) return m;
  return m + log((terms.array() - m).exp().sum());
}

template <typename Scalar>
Scalar density(Scalar tau, const MixtureParams<Scalar>& p) {
  using std::exp;
  return exp(log_density(tau, p));
}

// E[tau] = sum_k w_k exp(mu_k + sigma_k^2 / 2).
template <typename Scalar>
Scalar expectation(const MixtureParams<Scalar>& p) {
  return (p.weight.array() * (p.mean.array() + Scalar(0.5) * p.stddev.array().square()).exp())
      .sum();
}

// Component k ~ w, then tau = exp(mu_k + sigma_k z). Deterministic per seed.
std::vector<double> sample(const MixtureParams<double>& p, std::size_t n, std::uint64_t seed);

inline constexpr double kSigmaFloor = 1e-3;
inline constexpr double kSigmaCeiling = 2.0;

// Standard deviations are exp(raw) clamped into [floor, ceiling]; the
// gradient w.r.t. raw vanishes where a bound is active. Without a ceiling,
// components that carry almost no weight may drift to huge sigma, which the
// likelihood barely notices but the closed-form mean (exp(sigma^2 / 2)) does.
struct SigmaBounds {
  double floor = kSigmaFloor;
  double ceiling = kSigmaCeiling;

  double apply(double s) const { return std::min(std::max(s, floor), ceiling); }
  bool inside(double s) const { return s >= floor && s <= ceiling; }
};

// Raw head outputs for a batch of contexts (columns).
struct MixtureOutputs {
  ad::Var weight_logits;  // K x n
  ad::Var mean;           // K x n
  ad::Var log_stddev;     // K x n; stddev = clamp(exp(.))
};

// Perceptrons producing w (via softmax), mu, and sigma (via exp).
struct MixtureHead {
  Perceptron weight;
  Perceptron mean;
  Perceptron log_stddev;

  static MixtureHead glorot(int context_dim, int hidden_dim, int components, std::mt19937_64& rng);
  MixtureOutputs forward(const ad::Var& contexts, const Dropout* dropout = nullptr) const;
  int components() const { return weight.out_dim(); }
};

enum class TimeBranch { kPair, kMin };

struct TimeHeadParams {
  MixtureHead pair;  // density of tau_eo
  MixtureHead min;   // density of tau_min
  double alpha = 1.0;
  SigmaBounds sigma;

  const MixtureHead& branch(TimeBranch b) const { return b == TimeBranch::kPair ? pair : min; }
};

// Concrete parameters for column `col` of evaluated head outputs.
MixtureParams<double> to_params(const ad::Matrix& weight_logits, const ad::Matrix& mean,
                                const ad::Matrix& log_stddev, Eigen::Index col,
                                SigmaBounds sigma = {});

// Single context (column vector of length 3d).
MixtureParams<double> mixture_params(const ad::Matrix& context, const TimeHeadParams& head,
                                     TimeBranch which);

// Differentiable per-column log density, 1 x n.
ad::Var mixture_log_density(const MixtureOutputs& outputs, std::span<const double> tau,
                            SigmaBounds sigma = {});

// Branch weights after dropping absent branches and renormalising.
struct BranchWeights {
  double pair = 0.0;
  double min = 0.0;
  bool skip() const { return pair == 0.0 && min == 0.0; }
};
BranchWeights branch_weights(const InterEventTimes& tau, double alpha);

struct TimeLoss {
  ad::Var total;                 // 1 x 1, sum over used events (undefined if none)
  ad::Var per_event;             // 1 x used
  std::vector<std::size_t> used;  // event indices contributing
  std::size_t skipped = 0;
};

// -log(w_eo p_eo(tau_eo) + w_min p_min(tau_min)) per event; events without
// any history are skipped.
TimeLoss nll_time(const ad::Var& contexts, std::span<const InterEventTimes> taus,
                  const TimeHeadParams& head, const Dropout* dropout = nullptr);

// Value-only log of the combined density for each context column.
std::vector<double> combined_log_density(const ad::Matrix& contexts,
                                         std::span<const InterEventTimes> taus,
                                         const TimeHeadParams& head);

// Expected inter-event time per branch for each context column.
ad::Matrix branch_expectations(const ad::Matrix& contexts, const TimeHeadParams& head,
                               TimeBranch which);

}  // namespace evokg
