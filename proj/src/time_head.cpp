#include "evokg/time_head.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "evokg/errors.hpp"

namespace evokg {

std::vector<double> sample(const MixtureParams<double>& p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(p.weight.data(), p.weight.data() + p.weight.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& x : out) {
    const int k = pick(rng);
    x = std::exp(p.mean[k] + p.stddev[k] * normal(rng));
  }
  return out;
}

MixtureHead MixtureHead::glorot(int context_dim, int hidden_dim, int components,
                                std::mt19937_64& rng) {
  MixtureHead h;
  h.weight = Perceptron::glorot(context_dim, hidden_dim, components, rng);
  h.mean = Perceptron::glorot(context_dim, hidden_dim, components, rng);
  h.log_stddev = Perceptron::glorot(context_dim, hidden_dim, components, rng);
  return h;
}

MixtureOutputs MixtureHead::forward(const ad::Var& contexts, const Dropout* dropout) const {
  return {weight.forward(contexts, dropout), mean.forward(contexts, dropout),
          log_stddev.forward(contexts, dropout)};
}

MixtureParams<double> to_params(const ad::Matrix& weight_logits, const ad::Matrix& mean,
                                const ad::Matrix& log_stddev, Eigen::Index col,
                                SigmaBounds sigma) {
  MixtureParams<double> p;
  const Eigen::VectorXd z = weight_logits.col(col);
  const double m = z.maxCoeff();
  const Eigen::VectorXd e = (z.array() - m).exp();
  p.weight = e / e.sum();
  p.mean = mean.col(col);
  p.stddev = log_stddev.col(col).array().exp().max(sigma.floor).min(sigma.ceiling);
  return p;
}

MixtureParams<double> mixture_params(const ad::Matrix& context, const TimeHeadParams& head,
                                     TimeBranch which) {
  const auto& h = head.branch(which);
  if (context.cols() != 1 || context.rows() != h.weight.in_dim())
    throw std::invalid_argument("mixture_params: context must be a column of length " +
                                std::to_string(h.weight.in_dim()));
  return to_params(h.weight.eval(context), h.mean.eval(context), h.log_stddev.eval(context), 0,
                   head.sigma);
}

ad::Var mixture_log_density(const MixtureOutputs& outputs, std::span<const double> tau,
                            SigmaBounds bounds) {
  const ad::Matrix& z = outputs.weight_logits.value();
  const ad::Matrix& mu = outputs.mean.value();
  const ad::Matrix& raw = outputs.log_stddev.value();
  const auto k = z.rows();
  const auto n = z.cols();
  if (static_cast<ad::Index>(tau.size()) != n || mu.rows() != k || raw.rows() != k)
    throw std::invalid_argument("mixture_log_density: shape mismatch");

  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  ad::Matrix out(1, n);
  ad::Matrix weights(k, n), resp(k, n), zscore(k, n);
  ad::Matrix unclamped(k, n), sigmas(k, n);
  for (ad::Index j = 0; j < n; ++j) {
    const double t = tau[static_cast<std::size_t>(j)];
    if (!(t > 0.0)) throw std::domain_error("mixture_log_density: tau must be positive");
    const double log_t = std::log(t);
    const double zm = z.col(j).maxCoeff();
    const double lse_z = zm + std::log((z.col(j).array() - zm).exp().sum());
    Eigen::VectorXd terms(k);
    for (ad::Index c = 0; c < k; ++c) {
      const double e = std::exp(raw(c, j));
      const double sigma = bounds.apply(e);
      unclamped(c, j) = bounds.inside(e) ? 1.0 : 0.0;
      sigmas(c, j) = sigma;
      const double zs = (log_t - mu(c, j)) / sigma;
      zscore(c, j) = zs;
      weights(c, j) = std::exp(z(c, j) - lse_z);
      terms[c] = (z(c, j) - lse_z) - log_t - std::log(sigma) - half_log_2pi - 0.5 * zs * zs;
    }
    const double m = terms.maxCoeff();
    const double lse = m + std::log((terms.array() - m).exp().sum());
    out(0, j) = lse;
    resp.col(j) = (terms.array() - lse).exp();
  }

  return ad::make_op(
      std::move(out), {outputs.weight_logits, outputs.mean, outputs.log_stddev},
      [weights = std::move(weights), resp = std::move(resp), zscore = std::move(zscore),
       unclamped = std::move(unclamped), sigmas = std::move(sigmas)](ad::Node& node) {
        const auto g = node.grad.row(0).replicate(weights.rows(), 1).array();
        auto& pz = node.parents[0];
        auto& pmu = node.parents[1];
        auto& ps = node.parents[2];
        if (pz->requires_grad) pz->accumulate(((resp - weights).array() * g).matrix());
        if (pmu->requires_grad)
          pmu->accumulate((resp.array() * zscore.array() / sigmas.array() * g).matrix());
        if (ps->requires_grad)
          ps->accumulate(
              (resp.array() * (zscore.array().square() - 1.0) * unclamped.array() * g).matrix());
      });
}

BranchWeights branch_weights(const InterEventTimes& tau, double alpha) {
  BranchWeights w;
  if (tau.pair) w.pair = alpha;
  if (tau.min) w.min = 1.0 - alpha;
  const double total = w.pair + w.min;
  if (total > 0.0) {
    w.pair /= total;
    w.min /= total;
  } else if (tau.pair) {
    w.pair = 1.0;
  } else if (tau.min) {
    w.min = 1.0;
  }
  return w;
}

namespace {

// log(wa e^a + wb e^b) per column of the used events; zero-weight terms drop out.
ad::Var mix_two(const ad::Var& la, std::vector<ad::Index> a_pos, const ad::Var& lb,
                std::vector<ad::Index> b_pos, std::vector<double> wa, std::vector<double> wb,
                ad::Index n) {
  ad::Matrix out(1, n);
  ad::Matrix ra = ad::Matrix::Zero(1, n), rb = ad::Matrix::Zero(1, n);
  for (ad::Index j = 0; j < n; ++j) {
    const auto sj = static_cast<std::size_t>(j);
    const bool has_a = a_pos[sj] >= 0;
    const bool has_b = b_pos[sj] >= 0;
    const double xa = has_a ? std::log(wa[sj]) + la.value()(0, a_pos[sj]) : -INFINITY;
    const double xb = has_b ? std::log(wb[sj]) + lb.value()(0, b_pos[sj]) : -INFINITY;
    const double m = std::max(xa, xb);
    const double lse = m + std::log(std::exp(xa - m) + std::exp(xb - m));
    out(0, j) = lse;
    if (has_a) ra(0, j) = std::exp(xa - lse);
    if (has_b) rb(0, j) = std::exp(xb - lse);
  }
  std::vector<ad::Var> parents;
  parents.push_back(la.defined() ? la : ad::Var::constant(ad::Matrix(1, 0)));
  parents.push_back(lb.defined() ? lb : ad::Var::constant(ad::Matrix(1, 0)));
  return ad::make_op(std::move(out), std::move(parents),
                     [ra = std::move(ra), rb = std::move(rb), a_pos = std::move(a_pos),
                      b_pos = std::move(b_pos)](ad::Node& node) {
                       auto& pa = node.parents[0];
                       auto& pb = node.parents[1];
                       for (std::size_t j = 0; j < a_pos.size(); ++j) {
                         const auto col = static_cast<ad::Index>(j);
                         const double g = node.grad(0, col);
                         if (a_pos[j] >= 0 && pa->requires_grad) {
                           pa->ensure_grad();
                           pa->grad(0, a_pos[j]) += g * ra(0, col);
                         }
                         if (b_pos[j] >= 0 && pb->requires_grad) {
                           pb->ensure_grad();
                           pb->grad(0, b_pos[j]) += g * rb(0, col);
                         }
                       }
                     });
}

}  // namespace

TimeLoss nll_time(const ad::Var& contexts, std::span<const InterEventTimes> taus,
                  const TimeHeadParams& head, const Dropout* dropout) {
  if (static_cast<ad::Index>(taus.size()) != contexts.cols())
    throw std::invalid_argument("nll_time: one tau pair per context column required");
  TimeLoss loss;
  std::vector<int> pair_cols, min_cols;
  std::vector<double> pair_tau, min_tau, wa, wb;
  std::vector<ad::Index> a_pos, b_pos;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const auto w = branch_weights(taus[i], head.alpha);
    if (w.skip()) {
      ++loss.skipped;
      continue;
    }
    loss.used.push_back(i);
    wa.push_back(w.pair);
    wb.push_back(w.min);
    if (w.pair > 0.0) {
      a_pos.push_back(static_cast<ad::Index>(pair_cols.size()));
      pair_cols.push_back(static_cast<int>(i));
      pair_tau.push_back(static_cast<double>(*taus[i].pair));
    } else {
      a_pos.push_back(-1);
    }
    if (w.min > 0.0) {
      b_pos.push_back(static_cast<ad::Index>(min_cols.size()));
      min_cols.push_back(static_cast<int>(i));
      min_tau.push_back(static_cast<double>(*taus[i].min));
    } else {
      b_pos.push_back(-1);
    }
  }
  if (loss.used.empty()) return loss;

  ad::Var la, lb;
  if (!pair_cols.empty())
    la = mixture_log_density(head.pair.forward(ad::gather_cols(contexts, pair_cols), dropout),
                             pair_tau, head.sigma);
  if (!min_cols.empty())
    lb = mixture_log_density(head.min.forward(ad::gather_cols(contexts, min_cols), dropout),
                             min_tau, head.sigma);
  const auto n = static_cast<ad::Index>(loss.used.size());
  loss.per_event = ad::scale(
      mix_two(la, std::move(a_pos), lb, std::move(b_pos), std::move(wa), std::move(wb), n), -1.0);
  loss.total = ad::sum(loss.per_event);
  return loss;
}

namespace {

ad::Matrix branch_log_density(const ad::Matrix& contexts, const MixtureHead& head,
                              std::span<const double> tau, SigmaBounds sigma) {
  const ad::Matrix z = head.weight.eval(contexts);
  const ad::Matrix mu = head.mean.eval(contexts);
  const ad::Matrix s = head.log_stddev.eval(contexts);
  ad::Matrix out(1, contexts.cols());
  for (ad::Index j = 0; j < contexts.cols(); ++j)
    out(0, j) = log_density(tau[static_cast<std::size_t>(j)], to_params(z, mu, s, j, sigma));
  return out;
}

}  // namespace

std::vector<double> combined_log_density(const ad::Matrix& contexts,
                                         std::span<const InterEventTimes> taus,
                                         const TimeHeadParams& head) {
  const auto n = contexts.cols();
  std::vector<double> pair_tau(static_cast<std::size_t>(n), 1.0);
  std::vector<double> min_tau(static_cast<std::size_t>(n), 1.0);
  std::vector<BranchWeights> w(static_cast<std::size_t>(n));
  bool any_pair = false, any_min = false;
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = branch_weights(taus[j], head.alpha);
    if (w[j].skip()) throw ContractViolation("combined_log_density: event without history");
    if (taus[j].pair) pair_tau[j] = static_cast<double>(*taus[j].pair);
    if (taus[j].min) min_tau[j] = static_cast<double>(*taus[j].min);
    any_pair = any_pair || w[j].pair > 0.0;
    any_min = any_min || w[j].min > 0.0;
  }
  ad::Matrix la, lb;
  if (any_pair) la = branch_log_density(contexts, head.pair, pair_tau, head.sigma);
  if (any_min) lb = branch_log_density(contexts, head.min, min_tau, head.sigma);
  std::vector<double> out(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const auto c = static_cast<ad::Index>(j);
    const double xa = w[j].pair > 0.0 ? std::log(w[j].pair) + la(0, c) : -INFINITY;
    const double xb = w[j].min > 0.0 ? std::log(w[j].min) + lb(0, c) : -INFINITY;
    const double m = std::max(xa, xb);
    out[j] = m + std::log(std::exp(xa - m) + std::exp(xb - m));
  }
  return out;
}

ad::Matrix branch_expectations(const ad::Matrix& contexts, const TimeHeadParams& head,
                               TimeBranch which) {
  const auto& h = head.branch(which);
  const ad::Matrix z = h.weight.eval(contexts);
  const ad::Matrix mu = h.mean.eval(contexts);
  const ad::Matrix s = h.log_stddev.eval(contexts);
  ad::Matrix out(1, contexts.cols());
  for (ad::Index j = 0; j < contexts.cols(); ++j)
    out(0, j) = expectation(to_params(z, mu, s, j, head.sigma));
  return out;
}

}  // namespace evokg
