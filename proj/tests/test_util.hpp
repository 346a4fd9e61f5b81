#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "evokg/autodiff.hpp"
#include "evokg/model.hpp"
#include "evokg/time_head.hpp"

namespace evokg::testing {

struct GradCheck {
  double relative_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
};

// Central differences of a scalar loss w.r.t. every entry of `param`.
// `loss` must rebuild the graph from current parameter values.
inline GradCheck check_gradient(const std::function<ad::Var()>& loss, ad::Var param,
                                double h = 1e-6) {
  param.zero_grad();
  const ad::Var l = loss();
  ad::backward(l);
  ad::Matrix analytic = param.has_grad() ? param.grad()
                                         : ad::Matrix::Zero(param.rows(), param.cols());
  param.zero_grad();
  ad::Matrix numeric(param.rows(), param.cols());
  auto& w = param.mutable_value();
  for (ad::Index i = 0; i < w.size(); ++i) {
    const double keep = w.data()[i];
    w.data()[i] = keep + h;
    const double up = loss().scalar();
    w.data()[i] = keep - h;
    const double down = loss().scalar();
    w.data()[i] = keep;
    numeric.data()[i] = (up - down) / (2 * h);
  }
  GradCheck out;
  out.analytic_norm = analytic.norm();
  out.numeric_norm = numeric.norm();
  const double denom = std::max({out.analytic_norm, out.numeric_norm, 1e-12});
  out.relative_error = (analytic - numeric).norm() / denom;
  return out;
}

// Central differences over every parameter, pooled by group (the first
// dotted component of the parameter name).
inline std::map<std::string, GradCheck> group_gradient_check(
    const Model& model, const std::function<ad::Var()>& loss, double h = 1e-6) {
  auto params = model.parameters();
  for (auto& p : params) p.var.zero_grad();
  ad::backward(loss());
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> pooled;
  for (auto& p : params) {
    auto& [analytic, numeric] = pooled[p.name.substr(0, p.name.find('.'))];
    ad::Matrix g = p.var.has_grad() ? p.var.grad() : ad::Matrix::Zero(p.var.rows(), p.var.cols());
    auto& w = p.var.mutable_value();
    for (ad::Index i = 0; i < w.size(); ++i) {
      const double keep = w.data()[i];
      w.data()[i] = keep + h;
      const double up = loss().scalar();
      w.data()[i] = keep - h;
      const double down = loss().scalar();
      w.data()[i] = keep;
      analytic.push_back(g.data()[i]);
      numeric.push_back((up - down) / (2 * h));
    }
  }
  for (auto& p : params) p.var.zero_grad();
  std::map<std::string, GradCheck> out;
  for (auto& [group, an] : pooled) {
    const Eigen::Map<const Eigen::VectorXd> a(an.first.data(), static_cast<ad::Index>(an.first.size()));
    const Eigen::Map<const Eigen::VectorXd> n(an.second.data(), static_cast<ad::Index>(an.second.size()));
    GradCheck c;
    c.analytic_norm = a.norm();
    c.numeric_norm = n.norm();
    c.relative_error = (a - n).norm() / std::max({c.analytic_norm, c.numeric_norm, 1e-12});
    out[group] = c;
  }
  return out;
}

// Summed tick losses over a stream without truncation, so gradients reach
// every recurrence step.
inline ad::Var sequence_loss(const Model& model, const TemporalKG& g, LossWeights weights) {
  auto state = model.initial_state();
  ad::Var total;
  for (const auto& snap : g.snapshots()) {
    if (state.tracker.latest_tick()) {
      const auto tl = model.tick_loss(state, snap, weights);
      if (tl.total.defined()) total = total.defined() ? total + tl.total : tl.total;
    }
    model.advance(state, snap);
  }
  return total;
}

inline ad::Matrix random_matrix(ad::Index rows, ad::Index cols, std::mt19937_64& rng,
                                double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  ad::Matrix m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Random valid mixture; sigma drawn uniformly in [sigma_lo, sigma_hi].
inline MixtureParams<double> random_mixture(int k, std::mt19937_64& rng, double sigma_lo,
                                            double sigma_hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0), mu(-1.5, 2.5), sd(sigma_lo, sigma_hi);
  MixtureParams<double> p;
  p.weight.resize(k);
  p.mean.resize(k);
  p.stddev.resize(k);
  for (int i = 0; i < k; ++i) {
    p.weight[i] = -std::log(1.0 - u(rng));  // Dirichlet(1) via normalised exponentials
    p.mean[i] = mu(rng);
    p.stddev[i] = sd(rng);
  }
  p.weight /= p.weight.sum();
  return p;
}

// Mass of the density over (0, inf): composite Simpson in u = log tau, where
// the integrand is p(e^u) e^u, with a span of 12 sigma around every mean.
inline double quadrature_mass(const MixtureParams<double>& p) {
  const double lo = (p.mean.array() - 12.0 * p.stddev.array()).minCoeff();
  const double hi = (p.mean.array() + 12.0 * p.stddev.array()).maxCoeff();
  const double step = p.stddev.minCoeff() / 16.0;
  long n = static_cast<long>(std::ceil((hi - lo) / step));
  if (n % 2) ++n;
  const double h = (hi - lo) / static_cast<double>(n);
  auto f = [&](double u) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double z = (u - p.mean[k]) / p.stddev[k];
      s += p.weight[k] * std::exp(-0.5 * z * z) / (p.stddev[k] * std::sqrt(2.0 * M_PI));
    }
    return s;  // p(e^u) e^u: the 1/tau factor cancels the Jacobian
  };
  double acc = f(lo) + f(hi);
  for (long i = 1; i < n; ++i) acc += f(lo + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Sample mean with an RNG independent of the library sampler.
inline double monte_carlo_mean(const MixtureParams<double>& p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd cdf(p.size());
  double c = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) cdf[k] = (c += p.weight[k]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = u(rng) * c;
    Eigen::Index k = 0;
    while (k + 1 < p.size() && cdf[k] < r) ++k;
    sum += std::exp(p.mean[k] + p.stddev[k] * z(rng));
  }
  return sum / static_cast<double>(n);
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("evokg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace evokg::testing
