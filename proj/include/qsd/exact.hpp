#pragma once

#include <Eigen/LU>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "qsd/kernel.hpp"
#include "qsd/policy.hpp"

namespace qsd {

/// Raised when a power iteration fails to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PowerOptions {
  double tol = 1e-12;  // L1 residual
  long max_iter = 1'000'000;
};

/// Quasi-stationary distribution by power iteration on I + K.
///
/// The identity shift leaves the principal left eigenvector unchanged and
/// makes the Perron root strictly dominant in modulus, which plain K does not
/// guarantee for periodic chains (birth-death chains with empty diagonal).
/// Stops when ||v - vK / (vK 1)||_1 <= tol.
template <typename Scalar>
Distribution<Scalar> qsd_power(const SubMarkovKernel<Scalar>& kernel, PowerOptions opts = {}) {
  const Index n = kernel.size();
  const auto& k = kernel.entries();
  Vec<Scalar> v = Vec<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  Vec<Scalar> w(n);
  for (long it = 0; it < opts.max_iter; ++it) {
    w.noalias() = k.transpose() * v;
    const Scalar mass = w.sum();
    if (!(mass > Scalar(0))) throw ConvergenceError("qsd_power: iterate lost all mass");
    const Scalar residual = (v - w / mass).template lpNorm<1>();
    if (residual <= Scalar(opts.tol)) return Distribution<Scalar>::normalized(v);
    v += w;
    v /= v.sum();
  }
  throw ConvergenceError("qsd_power: no convergence after " + std::to_string(opts.max_iter) +
                         " iterations");
}

/// Stationary distribution of K_alpha by power iteration on (I + K_alpha) / 2.
template <typename Scalar>
Distribution<Scalar> stationary(const SubMarkovKernel<Scalar>& kernel,
                                const Distribution<Scalar>& alpha, PowerOptions opts = {}) {
  const Index n = kernel.size();
  const auto& k = kernel.entries();
  const Vec<Scalar>& a = alpha.weights();
  Vec<Scalar> mu = Vec<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  Vec<Scalar> next(n);
  for (long it = 0; it < opts.max_iter; ++it) {
    next.noalias() = k.transpose() * mu;
    next += mu.dot(kernel.exit_mass()) * a;
    const Scalar residual = (mu - next).template lpNorm<1>();
    if (residual <= Scalar(opts.tol)) return Distribution<Scalar>::normalized(mu);
    mu = Scalar(0.5) * (mu + next);
    mu /= mu.sum();
  }
  throw ConvergenceError("stationary: no convergence after " + std::to_string(opts.max_iter) +
                         " iterations");
}

/// Everything the exact oracles share at one theta.
template <typename Scalar = double>
struct ExactPoint {
  PolicyEval<Scalar> eval;
  Vec<Scalar> mu;
  Mat<Scalar> k_alpha;  // dense K_alpha
  Mat<Scalar> reward;   // R_theta(x, y); zero where K_alpha(x, y) = 0
  Scalar average_reward = Scalar(0);

  static ExactPoint at(const SubMarkovKernel<Scalar>& kernel, const SoftmaxPolicy<Scalar>& policy,
                       PowerOptions opts = {}) {
    ExactPoint p;
    const Distribution<Scalar> alpha = alpha_of(policy);
    p.eval = PolicyEval<Scalar>::exact(kernel, alpha);
    p.mu = stationary(kernel, alpha, opts).weights();
    p.k_alpha = k_alpha_matrix(kernel, p.eval.alpha);
    const Index n = kernel.size();
    p.reward = Mat<Scalar>::Zero(n, n);
    Scalar r(0);
    for (Index x = 0; x < n; ++x) {
      if (kernel.exit(x) == Scalar(0)) continue;
      Scalar row(0);
      for (Index y = 0; y < n; ++y) {
        if (p.k_alpha(x, y) > Scalar(0)) {
          p.reward(x, y) = qsd::reward(kernel, p.eval, x, y);
          row += p.k_alpha(x, y) * p.reward(x, y);
        }
      }
      r += p.mu[x] * row;
    }
    p.average_reward = r;
    return p;
  }
};

/// r(theta) = -sum_x mu(x) KL(K_alpha(x,.) || K_beta(x,.)).
template <typename Scalar>
Scalar exact_average_reward(const SubMarkovKernel<Scalar>& kernel,
                            const SoftmaxPolicy<Scalar>& policy, PowerOptions opts = {}) {
  return ExactPoint<Scalar>::at(kernel, policy, opts).average_reward;
}

/// Per-state residual of the Bellman equation
///   V(x) = sum_y K_alpha(x,y) [V(y) + R(x,y) - r].
template <typename Scalar>
Vec<Scalar> bellman_residual(const ExactPoint<Scalar>& p, const Vec<Scalar>& values, Scalar r) {
  const Index n = values.size();
  Vec<Scalar> res(n);
  for (Index x = 0; x < n; ++x) {
    Scalar acc(0);
    for (Index y = 0; y < n; ++y) acc += p.k_alpha(x, y) * (values[y] + p.reward(x, y) - r);
    res[x] = acc - values[x];
  }
  return res;
}

template <typename Scalar>
ValueTable<Scalar> exact_value_function(const ExactPoint<Scalar>& p) {
  const Index n = p.mu.size();
  // (I - K_alpha) V = Rbar - r, pinned at V(N-1) = 0. Dropping the last row
  // and column leaves I - (substochastic block), which is invertible.
  const Vec<Scalar> rbar = p.k_alpha.cwiseProduct(p.reward).rowwise().sum();
  ValueTable<Scalar> out{Vec<Scalar>::Zero(n), p.average_reward};
  if (n == 1) return out;
  const Index m = n - 1;
  Mat<Scalar> a = Mat<Scalar>::Identity(m, m) - p.k_alpha.topLeftCorner(m, m);
  const Vec<Scalar> rhs = rbar.head(m) - Vec<Scalar>::Constant(m, p.average_reward);
  Eigen::FullPivLU<Mat<Scalar>> lu(a);
  if (!lu.isInvertible()) throw std::runtime_error("exact_value_function: singular Bellman system");
  out.psi.head(m) = lu.solve(rhs);
  return out;
}

template <typename Scalar>
ValueTable<Scalar> exact_value_function(const SubMarkovKernel<Scalar>& kernel,
                                        const SoftmaxPolicy<Scalar>& policy,
                                        PowerOptions opts = {}) {
  return exact_value_function(ExactPoint<Scalar>::at(kernel, policy, opts));
}

/// Policy gradient by dense sums over (x, y) ~ mu(x) K_alpha(x, y), using the
/// exact value function. `baseline` replaces r(theta) inside the bracket.
template <typename Scalar>
Vec<Scalar> exact_policy_gradient(const SubMarkovKernel<Scalar>& kernel, const ExactPoint<Scalar>& p,
                                  const Vec<Scalar>& values, Scalar baseline) {
  const Index n = kernel.size();
  const Index m = n - 1;
  const Vec<Scalar>& alpha = p.eval.alpha;
  // Coefficients per destination y of d alpha(y) and d beta(y).
  Vec<Scalar> coef_alpha = Vec<Scalar>::Zero(n);
  Vec<Scalar> coef_beta = Vec<Scalar>::Zero(n);
  for (Index x = 0; x < n; ++x) {
    const Scalar e = kernel.exit(x);
    if (e == Scalar(0)) continue;
    for (Index y = 0; y < n; ++y) {
      const Scalar ka = p.k_alpha(x, y);
      if (!(ka > Scalar(0))) continue;
      const Scalar w = p.mu[x] * ka;
      const Scalar advantage = values[y] - values[x] + p.reward(x, y) - baseline;
      const Scalar kb = kernel(x, y) + e * p.eval.beta[y];
      coef_alpha[y] += w * advantage * e / ka;
      coef_beta[y] += w * e / kb;
    }
  }
  Vec<Scalar> g = Vec<Scalar>::Zero(m);
  for (Index y = 0; y < n; ++y) {
    if (coef_alpha[y] != Scalar(0)) g += coef_alpha[y] * grad_alpha(alpha, y);
    if (coef_beta[y] != Scalar(0))
      g += coef_beta[y] * grad_beta_exact(kernel, alpha, p.eval.killed, y);
  }
  return g;
}

template <typename Scalar>
Vec<Scalar> exact_policy_gradient(const SubMarkovKernel<Scalar>& kernel,
                                  const SoftmaxPolicy<Scalar>& policy,
                                  std::optional<Scalar> baseline = std::nullopt,
                                  PowerOptions opts = {}) {
  const auto p = ExactPoint<Scalar>::at(kernel, policy, opts);
  const auto v = exact_value_function(p);
  return exact_policy_gradient(kernel, p, v.psi, baseline.value_or(p.average_reward));
}

/// Central differences of exact_average_reward.
template <typename Scalar>
Vec<Scalar> finite_difference_gradient(const SubMarkovKernel<Scalar>& kernel,
                                       const SoftmaxPolicy<Scalar>& policy, Scalar h,
                                       PowerOptions opts = {1e-14, 10'000'000}) {
  if (!(h > Scalar(0))) throw std::invalid_argument("finite_difference_gradient: h must be > 0");
  const Index m = policy.theta.size();
  Vec<Scalar> g(m);
  for (Index j = 0; j < m; ++j) {
    SoftmaxPolicy<Scalar> plus = policy;
    SoftmaxPolicy<Scalar> minus = policy;
    plus.theta[j] += h;
    minus.theta[j] -= h;
    g[j] = (exact_average_reward(kernel, plus, opts) - exact_average_reward(kernel, minus, opts)) /
           (Scalar(2) * h);
  }
  return g;
}

}  // namespace qsd
