#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qsd/exact.hpp"
#include "qsd/kernel.hpp"
#include "qsd/policy.hpp"
#include "qsd/rng.hpp"
#include "qsd/schedule.hpp"
#include "qsd/trace.hpp"

namespace qsd {

struct TrainerConfig {
  Schedule eta_theta = Schedule::constant(0.01);
  Schedule eta_psi = Schedule::constant(1e-4);
  Schedule eta_r = Schedule::constant(1e-4);
  int batch_size = 1;
  int burn_in = 1;            // warm-start steps per chain before each transition
  int initial_burn_in = 100;  // steps from a uniform start to approximate mu_theta0
  long max_iters = 10'000;
  std::uint64_t seed = 0;
  BetaMode beta_mode = BetaMode::Exact;
  // Stochastic mode only: number of draws Z_i ~ alpha per transition; 0 uses
  // the chain's current state as the single draw.
  int beta_samples = 0;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("trainer: batch_size must be >= 1");
    if (burn_in < 0 || initial_burn_in < 0)
      throw std::invalid_argument("trainer: burn-in must be >= 0");
    if (max_iters < 0) throw std::invalid_argument("trainer: max_iters must be >= 0");
    if (beta_samples < 0) throw std::invalid_argument("trainer: beta_samples must be >= 0");
    for (long n : {1L, 2L, max_iters > 0 ? max_iters : 1L})
      if (!(eta_theta(n) > 0.0 && eta_psi(n) > 0.0 && eta_r(n) > 0.0))
        throw std::invalid_argument("trainer: step sizes must be positive");
  }
};

template <typename Scalar = double>
struct TrainerState {
  SoftmaxPolicy<Scalar> policy;
  ValueTable<Scalar> values;
  std::vector<Index> chain_states;
  long iteration = 0;
};

/// delta = R(x, y) - r + V(y) - V(x), with beta(y) supplied by the caller.
template <typename Scalar>
Scalar td_error(const SubMarkovKernel<Scalar>& kernel, const Vec<Scalar>& alpha, Scalar beta_y,
                const ValueTable<Scalar>& values, Index x, Index y) {
  return reward(kernel, alpha, beta_y, x, y) - values.r_estimate + values.psi[y] - values.psi[x];
}

template <typename Scalar>
Scalar td_error(const SubMarkovKernel<Scalar>& kernel, const TrainerState<Scalar>& state, Index x,
                Index y) {
  const auto eval = PolicyEval<Scalar>::exact(kernel, state.policy);
  return td_error(kernel, eval.alpha, eval.beta[y], state.values, x, y);
}

/// Per-chain random streams derived from the trainer seed.
inline std::vector<RandomStream> chain_streams(const TrainerConfig& config) {
  std::vector<RandomStream> rngs;
  rngs.reserve(static_cast<std::size_t>(config.batch_size));
  for (int b = 0; b < config.batch_size; ++b)
    rngs.emplace_back(config.seed, static_cast<std::uint64_t>(b) + 1);
  return rngs;
}

/// One actor-critic iteration over the batch of persistent chains.
template <typename Scalar>
TrainerState<Scalar> step(const SubMarkovKernel<Scalar>& kernel, TrainerState<Scalar> state,
                          const TrainerConfig& config, std::span<RandomStream> rngs) {
  const std::size_t batch = state.chain_states.size();
  if (batch == 0 || rngs.size() != batch)
    throw std::invalid_argument("step: need one random stream per chain");
  const Index m = state.policy.theta.size();
  const Distribution<Scalar> alpha_dist = alpha_of(state.policy);
  const Vec<Scalar>& alpha = alpha_dist.weights();
  const bool exact = config.beta_mode == BetaMode::Exact;
  PolicyEval<Scalar> eval;
  if (exact) eval = PolicyEval<Scalar>::exact(kernel, alpha_dist);

  Vec<Scalar> d_theta = Vec<Scalar>::Zero(m);
  Vec<Scalar> d_psi = Vec<Scalar>::Zero(state.values.psi.size());
  Scalar d_r(0);
  std::vector<Index> z;

  for (std::size_t b = 0; b < batch; ++b) {
    RandomStream& rng = rngs[b];
    Index x = state.chain_states[b];
    for (int k = 0; k < config.burn_in; ++k) x = sample_transition(kernel, alpha_dist, x, rng);
    const Index y = sample_transition(kernel, alpha_dist, x, rng);

    Scalar delta;
    if (kernel.exit(x) == Scalar(0)) {
      // K_alpha and K_beta share this row: zero reward and zero score.
      delta = -state.values.r_estimate + state.values.psi[y] - state.values.psi[x];
    } else if (exact) {
      delta = td_error(kernel, alpha, eval.beta[y], state.values, x, y);
      d_theta += delta * grad_log_k_alpha(kernel, alpha, x, y) +
                 grad_log_k_beta(kernel, eval, x, y);
    } else {
      z.clear();
      if (config.beta_samples == 0) {
        z.push_back(x);
      } else {
        for (int i = 0; i < config.beta_samples; ++i)
          z.push_back(sample_index(alpha, rng.uniform()));
      }
      const auto est = estimate_beta(kernel, alpha, y, std::span<const Index>(z));
      delta = td_error(kernel, alpha, est.beta_y, state.values, x, y);
      d_theta += delta * grad_log_k_alpha(kernel, alpha, x, y) +
                 grad_log_k_beta(kernel, x, y, est.beta_y, est.grad_beta_y);
    }
    d_psi[x] += delta;
    d_r += delta;
    state.chain_states[b] = y;
  }

  const auto inv = Scalar(1) / static_cast<Scalar>(batch);
  const long n = state.iteration + 1;
  state.policy.theta += Scalar(config.eta_theta(n)) * inv * d_theta;
  state.values.psi += Scalar(config.eta_psi(n)) * inv * d_psi;
  state.values.r_estimate += Scalar(config.eta_r(n)) * inv * d_r;
  state.iteration = n;
  return state;
}

/// Initial trainer state: each chain starts uniformly and is run
/// `initial_burn_in` steps under K_{alpha_theta0} to approximate mu_theta0.
template <typename Scalar>
TrainerState<Scalar> initial_state(const SubMarkovKernel<Scalar>& kernel,
                                   const TrainerConfig& config, SoftmaxPolicy<Scalar> policy,
                                   ValueTable<Scalar> values, std::span<RandomStream> rngs) {
  if (policy.n_states() != kernel.size() || values.psi.size() != kernel.size())
    throw std::invalid_argument("trainer: parameter sizes do not match the kernel");
  TrainerState<Scalar> state{std::move(policy), std::move(values), {}, 0};
  const Distribution<Scalar> alpha = alpha_of(state.policy);
  const Vec<Scalar> flat = Vec<Scalar>::Ones(kernel.size());
  for (auto& rng : rngs) {
    Index x = sample_index(flat, rng.uniform());
    for (int k = 0; k < config.initial_burn_in; ++k) x = sample_transition(kernel, alpha, x, rng);
    state.chain_states.push_back(x);
  }
  return state;
}

template <typename Scalar = double>
struct TrainResult {
  Trace trace;
  TrainerState<Scalar> state;
  std::optional<ThresholdHit> hit;
};

/// Runs the actor-critic algorithm for config.max_iters iterations (or until a
/// stop condition in `opts` fires).
template <typename Scalar>
TrainResult<Scalar> train(const SubMarkovKernel<Scalar>& kernel, const TrainerConfig& config,
                          SoftmaxPolicy<Scalar> theta0, ValueTable<Scalar> values0,
                          const RunOptions& opts = {}) {
  config.validate();
  detail::RunRecorder recorder(opts);
  auto rngs = chain_streams(config);
  TrainResult<Scalar> result;
  result.state = initial_state(kernel, config, std::move(theta0), std::move(values0),
                               std::span<RandomStream>(rngs));
  result.trace.reserve(static_cast<std::size_t>(
      std::min<long>(config.max_iters / std::max(opts.record_every, 1L) + 1, 1'000'000)));
  for (long t = 0; t < config.max_iters; ++t) {
    result.state = step(kernel, std::move(result.state), config, std::span<RandomStream>(rngs));
    const bool last = t + 1 == config.max_iters;
    const auto alpha = alpha_of(result.state.policy);
    if (recorder.record(result.trace, t + 1, last, alpha.weights(),
                        static_cast<double>(result.state.values.r_estimate)))
      break;
  }
  result.hit = recorder.hit();
  return result;
}

/// Expected per-iteration increments (divided by their step sizes) under
/// (X, Y) ~ mu_theta(x) K_alpha(x, y), computed by dense sums.
template <typename Scalar = double>
struct ExpectedIncrements {
  Vec<Scalar> theta;
  Vec<Scalar> psi;
  Scalar r;
};

template <typename Scalar>
ExpectedIncrements<Scalar> expected_increments(const SubMarkovKernel<Scalar>& kernel,
                                               const SoftmaxPolicy<Scalar>& policy,
                                               const ValueTable<Scalar>& values,
                                               PowerOptions opts = {}) {
  const auto p = ExactPoint<Scalar>::at(kernel, policy, opts);
  const Index n = kernel.size();
  ExpectedIncrements<Scalar> inc;
  inc.theta = exact_policy_gradient(kernel, p, values.psi, values.r_estimate);
  inc.psi = Vec<Scalar>::Zero(n);
  for (Index x = 0; x < n; ++x) {
    Scalar acc(0);
    for (Index y = 0; y < n; ++y) {
      const Scalar ka = p.k_alpha(x, y);
      if (ka > Scalar(0))
        acc += ka * (p.reward(x, y) - values.r_estimate + values.psi[y] - values.psi[x]);
    }
    inc.psi[x] = p.mu[x] * acc;
  }
  inc.r = inc.psi.sum();
  return inc;
}

}  // namespace qsd
