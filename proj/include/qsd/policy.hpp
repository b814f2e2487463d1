#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>

#include "qsd/kernel.hpp"

namespace qsd {

/// Softmax logits for alpha_theta. Holds the N-1 free logits; the logit of
/// the last state is pinned to zero.
template <typename Scalar = double>
struct SoftmaxPolicy {
  Vec<Scalar> theta;

  SoftmaxPolicy() = default;
  explicit SoftmaxPolicy(Vec<Scalar> logits) : theta(std::move(logits)) {}

  static SoftmaxPolicy zeros(Index n_states) {
    return SoftmaxPolicy(Vec<Scalar>::Zero(n_states - 1));
  }

  Index n_states() const noexcept { return theta.size() + 1; }
};

/// Tabular critic: V_psi(x) = psi(x), plus the running average-reward estimate.
template <typename Scalar = double>
struct ValueTable {
  Vec<Scalar> psi;
  Scalar r_estimate = Scalar(0);

  static ValueTable zeros(Index n_states) { return {Vec<Scalar>::Zero(n_states), Scalar(0)}; }
};

enum class BetaMode { Exact, Stochastic };

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

template <typename Scalar>
Distribution<Scalar> alpha_of(const SoftmaxPolicy<Scalar>& policy) {
  const Index n = policy.n_states();
  Vec<Scalar> logits(n);
  logits.head(n - 1) = policy.theta;
  logits[n - 1] = Scalar(0);
  const Scalar top = logits.maxCoeff();
  Vec<Scalar> w = (logits.array() - top).exp().matrix();
  w /= w.sum();
  return Distribution<Scalar>(std::move(w));
}

/// Logits reproducing a full-support distribution exactly (up to rounding).
template <typename Scalar>
SoftmaxPolicy<Scalar> policy_from(const Distribution<Scalar>& alpha) {
  const Index n = alpha.size();
  Vec<Scalar> theta(n - 1);
  for (Index i = 0; i + 1 < n; ++i) theta[i] = std::log(alpha[i] / alpha[n - 1]);
  return SoftmaxPolicy<Scalar>(std::move(theta));
}

/// d/dtheta ln alpha_theta(x): component j is 1{x=j} - alpha(j).
template <typename Scalar>
Vec<Scalar> grad_log_alpha(const Vec<Scalar>& alpha, Index x) {
  const Index m = alpha.size() - 1;
  Vec<Scalar> g = -alpha.head(m);
  if (x < m) g[x] += Scalar(1);
  return g;
}

template <typename Scalar>
Vec<Scalar> grad_log_alpha(const SoftmaxPolicy<Scalar>& policy, Index x) {
  return grad_log_alpha(alpha_of(policy).weights(), x);
}

/// d/dtheta alpha_theta(x).
template <typename Scalar>
Vec<Scalar> grad_alpha(const Vec<Scalar>& alpha, Index x) {
  return alpha[x] * grad_log_alpha(alpha, x);
}

// ---------------------------------------------------------------------------
// Policy evaluated at one theta: alpha, beta and sum_x alpha(x) exit(x).
// Gradients and rewards below all take this to avoid recomputing the O(N^2)
// one-step distribution per transition.
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct PolicyEval {
  Vec<Scalar> alpha;
  Vec<Scalar> beta;
  Scalar killed = Scalar(0);  // alpha . exit_mass

  static PolicyEval exact(const SubMarkovKernel<Scalar>& kernel,
                          const SoftmaxPolicy<Scalar>& policy) {
    return exact(kernel, alpha_of(policy));
  }

  static PolicyEval exact(const SubMarkovKernel<Scalar>& kernel,
                          const Distribution<Scalar>& alpha) {
    PolicyEval e;
    e.alpha = alpha.weights();
    e.killed = e.alpha.dot(kernel.exit_mass());
    e.beta = one_step_distribution(kernel, alpha).weights();
    return e;
  }
};

namespace detail {

inline void require_positive(double k, const char* what) {
  if (!(k > 0.0)) throw std::domain_error(std::string(what) + ": transition has zero probability");
}

}  // namespace detail

/// Reward for a transition x -> y given the beta(y) to use in K_beta.
template <typename Scalar>
Scalar reward(const SubMarkovKernel<Scalar>& kernel, const Vec<Scalar>& alpha, Scalar beta_y,
              Index x, Index y) {
  const Scalar ka = k_alpha(kernel, alpha, x, y);
  detail::require_positive(static_cast<double>(ka), "reward");
  const Scalar e = kernel.exit(x);
  if (e == Scalar(0)) return Scalar(0);
  const Scalar kb = kernel(x, y) + e * beta_y;
  return -std::log(ka / kb);
}

template <typename Scalar>
Scalar reward(const SubMarkovKernel<Scalar>& kernel, const PolicyEval<Scalar>& eval, Index x,
              Index y) {
  return reward(kernel, eval.alpha, eval.beta[y], x, y);
}

template <typename Scalar>
Scalar reward(const SubMarkovKernel<Scalar>& kernel, const SoftmaxPolicy<Scalar>& policy, Index x,
              Index y) {
  return reward(kernel, PolicyEval<Scalar>::exact(kernel, policy), x, y);
}

/// d/dtheta ln K_alpha(x, y) = exit(x) / K_alpha(x, y) * d alpha(y).
template <typename Scalar>
Vec<Scalar> grad_log_k_alpha(const SubMarkovKernel<Scalar>& kernel, const Vec<Scalar>& alpha,
                             Index x, Index y) {
  const Scalar ka = k_alpha(kernel, alpha, x, y);
  detail::require_positive(static_cast<double>(ka), "grad_log_k_alpha");
  const Scalar e = kernel.exit(x);
  if (e == Scalar(0)) return Vec<Scalar>::Zero(alpha.size() - 1);
  return (e / ka) * grad_alpha(alpha, y);
}

template <typename Scalar>
Vec<Scalar> grad_log_k_alpha(const SubMarkovKernel<Scalar>& kernel,
                             const SoftmaxPolicy<Scalar>& policy, Index x, Index y) {
  return grad_log_k_alpha(kernel, alpha_of(policy).weights(), x, y);
}

/// Exact d/dtheta beta_theta(y), in O(N) given alpha.
///
/// With c_x = K(x,y) + exit(x) alpha(y), the first sum
///   sum_x d alpha(x) c_x
/// collapses to alpha_j c_j - alpha_j beta(y) in component j.
template <typename Scalar>
Vec<Scalar> grad_beta_exact(const SubMarkovKernel<Scalar>& kernel, const Vec<Scalar>& alpha,
                            Scalar killed, Index y) {
  const Index m = alpha.size() - 1;
  const Vec<Scalar> c = kernel.entries().col(y) + kernel.exit_mass() * alpha[y];
  const Scalar beta_y = alpha.dot(c);
  Vec<Scalar> g = alpha.head(m).cwiseProduct(c.head(m)) - beta_y * alpha.head(m);
  g += killed * grad_alpha(alpha, y);
  return g;
}

template <typename Scalar>
Vec<Scalar> grad_beta_exact(const SubMarkovKernel<Scalar>& kernel,
                            const SoftmaxPolicy<Scalar>& policy, Index y) {
  const Vec<Scalar> alpha = alpha_of(policy).weights();
  return grad_beta_exact(kernel, alpha, alpha.dot(kernel.exit_mass()), y);
}

/// n-sample estimates of beta(y) and d beta(y) from draws Z_i.
template <typename Scalar = double>
struct BetaEstimate {
  Scalar beta_y;
  Vec<Scalar> grad_beta_y;
};

template <typename Scalar>
BetaEstimate<Scalar> estimate_beta(const SubMarkovKernel<Scalar>& kernel, const Vec<Scalar>& alpha,
                                   Index y, std::span<const Index> samples) {
  if (samples.empty()) throw std::invalid_argument("estimate_beta: no samples");
  const Index m = alpha.size() - 1;
  const Vec<Scalar> d_alpha_y = grad_alpha(alpha, y);
  BetaEstimate<Scalar> est{Scalar(0), Vec<Scalar>::Zero(m)};
  for (const Index z : samples) {
    const Scalar c = kernel(z, y) + kernel.exit(z) * alpha[y];
    est.beta_y += c;
    est.grad_beta_y += c * grad_log_alpha(alpha, z) + kernel.exit(z) * d_alpha_y;
  }
  const auto n = static_cast<Scalar>(samples.size());
  est.beta_y /= n;
  est.grad_beta_y /= n;
  return est;
}

/// d/dtheta ln K_beta(x, y) = exit(x) / K_beta(x, y) * d beta(y), with the
/// caller supplying beta(y) and d beta(y) (exact or estimated).
template <typename Scalar>
Vec<Scalar> grad_log_k_beta(const SubMarkovKernel<Scalar>& kernel, Index x, Index y,
                            Scalar beta_y, const Vec<Scalar>& grad_beta_y) {
  const Scalar e = kernel.exit(x);
  if (e == Scalar(0)) return Vec<Scalar>::Zero(grad_beta_y.size());
  const Scalar kb = kernel(x, y) + e * beta_y;
  detail::require_positive(static_cast<double>(kb), "grad_log_k_beta");
  return (e / kb) * grad_beta_y;
}

template <typename Scalar>
Vec<Scalar> grad_log_k_beta(const SubMarkovKernel<Scalar>& kernel,
                            const PolicyEval<Scalar>& eval, Index x, Index y) {
  if (kernel.exit(x) == Scalar(0)) return Vec<Scalar>::Zero(eval.alpha.size() - 1);
  return grad_log_k_beta(kernel, x, y, eval.beta[y],
                         grad_beta_exact(kernel, eval.alpha, eval.killed, y));
}

template <typename Scalar>
Vec<Scalar> grad_log_k_beta(const SubMarkovKernel<Scalar>& kernel,
                            const SoftmaxPolicy<Scalar>& policy, Index x, Index y) {
  return grad_log_k_beta(kernel, PolicyEval<Scalar>::exact(kernel, policy), x, y);
}

/// beta_theta, exact.
template <typename Scalar>
Distribution<Scalar> beta_of(const SubMarkovKernel<Scalar>& kernel,
                             const SoftmaxPolicy<Scalar>& policy) {
  return one_step_distribution(kernel, alpha_of(policy));
}

/// beta_theta estimated from draws Z_i:
///   beta(y) ~ (1/n) sum_i K(Z_i, y) + exit(Z_i) alpha(y).
/// The estimate is a probability vector for any set of draws.
template <typename Scalar>
Distribution<Scalar> beta_of(const SubMarkovKernel<Scalar>& kernel,
                             const SoftmaxPolicy<Scalar>& policy,
                             std::span<const Index> samples) {
  if (samples.empty()) throw std::invalid_argument("beta_of: no samples");
  const Vec<Scalar> alpha = alpha_of(policy).weights();
  Vec<Scalar> beta = Vec<Scalar>::Zero(alpha.size());
  for (const Index z : samples)
    beta += kernel.entries().row(z).transpose() + kernel.exit(z) * alpha;
  beta /= static_cast<Scalar>(samples.size());
  return Distribution<Scalar>(std::move(beta));
}

}  // namespace qsd
