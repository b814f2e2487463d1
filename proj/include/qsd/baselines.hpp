#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsd/kernel.hpp"
#include "qsd/rng.hpp"
#include "qsd/schedule.hpp"
#include "qsd/trace.hpp"

namespace qsd {

/// Occupation counts of one killed trajectory X_0..X_{tau-1}.
struct EpisodeTrace {
  std::vector<std::int64_t> visits;
  std::int64_t extinction_time = 0;
};

/// Thrown when an episode exceeds its step budget without being absorbed.
class RunawayEpisode : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::int64_t kDefaultEpisodeGuard = 1'000'000'000;

template <typename Scalar, typename Rng>
EpisodeTrace simulate_episode(const SubMarkovKernel<Scalar>& kernel,
                              const Distribution<Scalar>& start, Rng& rng,
                              std::int64_t max_steps = kDefaultEpisodeGuard) {
  EpisodeTrace ep;
  ep.visits.assign(static_cast<std::size_t>(kernel.size()), 0);
  Index x = sample_index(start.weights(), rng.uniform());
  while (x >= 0) {
    if (ep.extinction_time >= max_steps)
      throw RunawayEpisode("simulate_episode: no absorption within " + std::to_string(max_steps) +
                           " steps");
    ++ep.visits[static_cast<std::size_t>(x)];
    ++ep.extinction_time;
    x = kernel.step_killed(x, rng);
  }
  return ep;
}

template <typename Scalar>
Vec<Scalar> visits_vector(const EpisodeTrace& ep) {
  Vec<Scalar> v(static_cast<Index>(ep.visits.size()));
  for (std::size_t i = 0; i < ep.visits.size(); ++i)
    v[static_cast<Index>(i)] = static_cast<Scalar>(ep.visits[i]);
  return v;
}

template <typename Scalar = double>
struct VanillaStep {
  Distribution<Scalar> alpha;
  std::int64_t tau_sum;
};

/// Weighted empirical-occupation update. The denominator is the mean
/// extinction time over all episodes including the new one, so n cancels:
///   alpha' = alpha + (visits - tau alpha) / sum_j tau_j.
template <typename Scalar>
VanillaStep<Scalar> vanilla_update(const Distribution<Scalar>& alpha, const EpisodeTrace& ep,
                                   long n, std::int64_t tau_sum) {
  if (n < 0) throw std::invalid_argument("vanilla_update: n must be >= 0");
  const std::int64_t total = tau_sum + ep.extinction_time;
  if (total <= 0) throw std::invalid_argument("vanilla_update: empty episode");
  const Scalar tau = static_cast<Scalar>(ep.extinction_time);
  Vec<Scalar> next =
      alpha.weights() + (visits_vector<Scalar>(ep) - tau * alpha.weights()) / Scalar(total);
  return {Distribution<Scalar>(std::move(next)), total};
}

/// Euclidean projection onto the probability simplex by sort and threshold.
template <typename Derived>
Distribution<typename Derived::Scalar> project_simplex(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Index n = v.size();
  if (n == 0) throw std::invalid_argument("project_simplex: empty vector");
  const Vec<Scalar> values = v;
  std::vector<Scalar> u(values.data(), values.data() + n);
  for (const Scalar s : u)
    if (!std::isfinite(s)) throw std::invalid_argument("project_simplex: non-finite entry");
  std::sort(u.begin(), u.end(), std::greater<>());
  Scalar cumsum(0);
  Scalar lambda(0);
  for (Index j = 0; j < n; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const Scalar candidate = (cumsum - Scalar(1)) / Scalar(j + 1);
    if (u[static_cast<std::size_t>(j)] - candidate > Scalar(0)) lambda = candidate;
  }
  Vec<Scalar> w = (values.array() - lambda).max(Scalar(0)).matrix();
  w /= w.sum();
  return Distribution<Scalar>(std::move(w));
}

template <typename Scalar>
Distribution<Scalar> projection_update(const Distribution<Scalar>& alpha, const EpisodeTrace& ep,
                                       double step) {
  if (!(step > 0.0)) throw std::invalid_argument("projection_update: step must be > 0");
  const Scalar tau = static_cast<Scalar>(ep.extinction_time);
  const Vec<Scalar> moved =
      alpha.weights() + Scalar(step) * (visits_vector<Scalar>(ep) - tau * alpha.weights());
  return project_simplex(moved);
}

/// Streaming mean: nu_n = nu_{n-1} + (alpha_n - nu_{n-1}) / n.
template <typename Scalar>
Vec<Scalar> polyak_average(const Vec<Scalar>& running_mean, const Vec<Scalar>& alpha, long n) {
  if (n < 1) throw std::invalid_argument("polyak_average: n must be >= 1");
  if (n == 1) return alpha;
  return running_mean + (alpha - running_mean) / Scalar(n);
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

enum class BaselineMethod { Vanilla, Projection, Polyak };

inline std::string to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::Vanilla:
      return "vanilla";
    case BaselineMethod::Projection:
      return "projection";
    case BaselineMethod::Polyak:
      return "polyak";
  }
  return {};
}

inline BaselineMethod parse_baseline_method(const std::string& s) {
  if (s == "vanilla") return BaselineMethod::Vanilla;
  if (s == "projection") return BaselineMethod::Projection;
  if (s == "polyak") return BaselineMethod::Polyak;
  throw std::invalid_argument("unknown baseline method '" + s + "'");
}

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::Vanilla;
  Schedule step = Schedule::power(0.99);  // projection / polyak epsilon_n
  long max_iters = 10'000;
  std::uint64_t seed = 0;
  std::int64_t max_episode_steps = kDefaultEpisodeGuard;
};

template <typename Scalar = double>
struct BaselineResult {
  Trace trace;
  Vec<Scalar> alpha;  // final estimate (the running mean for polyak)
  std::optional<ThresholdHit> hit;
};

/// Runs one of the episode-based baselines from alpha0. Episode n+1 starts
/// from alpha_n; projection and polyak use step epsilon_{n+1}.
template <typename Scalar>
BaselineResult<Scalar> run_baseline(const SubMarkovKernel<Scalar>& kernel,
                                    const BaselineConfig& config, Distribution<Scalar> alpha0,
                                    const RunOptions& opts = {}) {
  if (alpha0.size() != kernel.size())
    throw std::invalid_argument("run_baseline: initial distribution size mismatch");
  detail::RunRecorder recorder(opts);
  RandomStream rng(config.seed, 0);
  BaselineResult<Scalar> result;
  Distribution<Scalar> alpha = std::move(alpha0);
  Vec<Scalar> mean = alpha.weights();
  std::int64_t tau_sum = 0;
  for (long n = 0; n < config.max_iters; ++n) {
    const EpisodeTrace ep = simulate_episode(kernel, alpha, rng, config.max_episode_steps);
    if (config.method == BaselineMethod::Vanilla) {
      auto next = vanilla_update(alpha, ep, n, tau_sum);
      alpha = std::move(next.alpha);
      tau_sum = next.tau_sum;
    } else {
      alpha = projection_update(alpha, ep, config.step(n + 1));
    }
    const Vec<Scalar>* estimate = &alpha.weights();
    if (config.method == BaselineMethod::Polyak) {
      mean = polyak_average(mean, alpha.weights(), n + 1);
      estimate = &mean;
    }
    if (recorder.record(result.trace, n + 1, n + 1 == config.max_iters, *estimate, std::nullopt))
      break;
  }
  result.alpha = config.method == BaselineMethod::Polyak ? mean : alpha.weights();
  result.hit = recorder.hit();
  return result;
}

}  // namespace qsd
