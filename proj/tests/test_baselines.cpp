#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qsd/baselines.hpp"
#include "qsd/bench.hpp"
#include "qsd/exact.hpp"
#include "test_util.hpp"

using namespace qsd;

namespace {

EpisodeTrace episode(std::vector<std::int64_t> visits) {
  EpisodeTrace ep;
  ep.extinction_time = 0;
  for (auto v : visits) ep.extinction_time += v;
  ep.visits = std::move(visits);
  return ep;
}

// Best point of a simplex grid with the given resolution (N = 3).
Vec<double> grid_projection3(const Vec<double>& v, int steps) {
  Vec<double> best(3);
  double best_d = INFINITY;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; i + j <= steps; ++j) {
      const Vec<double> w{{double(i) / steps, double(j) / steps, double(steps - i - j) / steps}};
      const double d = (w - v).squaredNorm();
      if (d < best_d) best_d = d, best = w;
    }
  return best;
}

}  // namespace

TEST(ProjectSimplex, WorkedExample) {
  const auto w = project_simplex(Vec<double>{{0.9, 0.5}});
  EXPECT_NEAR(w[0], 0.7, 1e-15);
  EXPECT_NEAR(w[1], 0.3, 1e-15);
}

TEST(ProjectSimplex, ClipsNegativeMass) {
  const auto w = project_simplex(Vec<double>{{2.0, -1.0, 0.0}});
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], 0.0);
  EXPECT_EQ(w[2], 0.0);
}

TEST(ProjectSimplex, IdempotentOnSimplex) {
  std::mt19937_64 gen(1);
  std::gamma_distribution<double> g(1.0);
  for (int t = 0; t < 100; ++t) {
    Vec<double> v(4);
    for (auto& x : v) x = g(gen);
    v /= v.sum();
    EXPECT_LT((project_simplex(v).weights() - v).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(ProjectSimplex, KktConditions) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    Vec<double> v(5);
    for (auto& x : v) x = normal(gen);
    const Vec<double> w = project_simplex(v).weights();
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    // One threshold lambda with w_i = max(v_i - lambda, 0).
    double lambda = NAN;
    for (Index i = 0; i < 5; ++i)
      if (w[i] > 0) lambda = v[i] - w[i];
    ASSERT_FALSE(std::isnan(lambda));
    for (Index i = 0; i < 5; ++i) EXPECT_NEAR(w[i], std::max(v[i] - lambda, 0.0), 1e-12);
  }
}

TEST(ProjectSimplex, MatchesGridSearch) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unif(-0.5, 1.5);
  constexpr int kSteps = 400;
  for (int t = 0; t < 20; ++t) {
    Vec<double> v(3);
    for (auto& x : v) x = unif(gen);
    const Vec<double> w = project_simplex(v).weights();
    const Vec<double> grid = grid_projection3(v, kSteps);
    EXPECT_LE((w - grid).lpNorm<Eigen::Infinity>(), 2.0 / kSteps);
    EXPECT_LE((w - v).squaredNorm(), (grid - v).squaredNorm() + 1e-15);
  }
}

TEST(SimulateEpisode, VisitsSumToTau) {
  const auto k = loopy_chain(0.3);
  RandomStream rng(1, 0);
  for (int t = 0; t < 100; ++t) {
    const auto ep = simulate_episode(k, Distribution<double>::uniform(3), rng);
    std::int64_t s = 0;
    for (auto v : ep.visits) s += v;
    EXPECT_EQ(s, ep.extinction_time);
    EXPECT_GE(ep.extinction_time, 1);
  }
}

TEST(SimulateEpisode, FullExitMassGivesTauOne) {
  const SubMarkovKernel<double> k(Mat<double>::Zero(3, 3));
  RandomStream rng(2, 0);
  for (int t = 0; t < 100; ++t)
    EXPECT_EQ(simulate_episode(k, Distribution<double>::uniform(3), rng).extinction_time, 1);
}

TEST(SimulateEpisode, GeometricMeanExtinctionTime) {
  const auto k = loopy_chain(0.9);
  RandomStream rng(3, 0);
  constexpr int kEpisodes = 100'000;
  double sum = 0.0;
  for (int t = 0; t < kEpisodes; ++t)
    sum += static_cast<double>(simulate_episode(k, Distribution<double>::uniform(3), rng).extinction_time);
  const double p = 0.9;
  const double sd = std::sqrt((1 - p) / (p * p) / kEpisodes);
  EXPECT_NEAR(sum / kEpisodes, 1.0 / p, 3.0 * sd);
}

TEST(SimulateEpisode, RunawayGuard) {
  Mat<double> m(2, 2);
  m << 0.0, 1.0, 1.0 - 1e-12, 0.0;
  const SubMarkovKernel<double> k(m);
  RandomStream rng(4, 0);
  EXPECT_THROW(simulate_episode(k, Distribution<double>::uniform(2), rng, 1000), RunawayEpisode);
}

TEST(VanillaUpdate, ZeroInnovationAndSimplex) {
  const Distribution<double> alpha(Vec<double>{{0.25, 0.5, 0.25}});
  const auto same = vanilla_update(alpha, episode({1, 2, 1}), 3, 10);
  EXPECT_LT((same.alpha.weights() - alpha.weights()).norm(), 1e-15);
  EXPECT_EQ(same.tau_sum, 14);
  const auto moved = vanilla_update(alpha, episode({5, 0, 2}), 0, 0);
  EXPECT_NEAR(moved.alpha.weights().sum(), 1.0, 1e-12);
}

TEST(VanillaUpdate, HandTrace) {
  // Three episodes from uniform: tau = 1, 3, 2. The iterate is the pooled
  // occupation measure, so alpha_3 = (2, 3, 1) / 6.
  auto s = VanillaStep<double>{Distribution<double>::uniform(3), 0};
  s = vanilla_update(s.alpha, episode({1, 0, 0}), 0, s.tau_sum);
  EXPECT_NEAR(s.alpha[0], 1.0, 1e-15);
  s = vanilla_update(s.alpha, episode({0, 2, 1}), 1, s.tau_sum);
  EXPECT_NEAR(s.alpha[1], 0.5, 1e-15);
  s = vanilla_update(s.alpha, episode({1, 1, 0}), 2, s.tau_sum);
  EXPECT_NEAR(s.alpha[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.alpha[1], 1.0 / 2.0, 1e-15);
  EXPECT_NEAR(s.alpha[2], 1.0 / 6.0, 1e-15);
  EXPECT_EQ(s.tau_sum, 6);
}

TEST(VanillaUpdate, SimulatedHandTraceOnLoopy) {
  const auto k = loopy_chain(0.5);
  RandomStream rng(99, 0);
  auto s = VanillaStep<double>{Distribution<double>::uniform(3), 0};
  Vec<double> pooled = Vec<double>::Zero(3);
  for (long n = 0; n < 3; ++n) {
    const auto ep = simulate_episode(k, s.alpha, rng);
    pooled += visits_vector<double>(ep);
    s = vanilla_update(s.alpha, ep, n, s.tau_sum);
  }
  EXPECT_LT((s.alpha.weights() - pooled / pooled.sum()).norm(), 1e-14);
}

TEST(ProjectionUpdate, ZeroInnovationAndSimplex) {
  const Distribution<double> alpha(Vec<double>{{0.25, 0.5, 0.25}});
  EXPECT_LT((projection_update(alpha, episode({1, 2, 1}), 0.3).weights() - alpha.weights()).norm(),
            1e-15);
  const auto w = projection_update(alpha, episode({40, 0, 0}), 0.5);
  EXPECT_NEAR(w.weights().sum(), 1.0, 1e-12);
  EXPECT_GE(w.weights().minCoeff(), 0.0);
}

TEST(Polyak, StreamingMeanMatchesBatchMean) {
  std::mt19937_64 gen(5);
  Vec<double> mean = Vec<double>::Zero(3);
  Vec<double> total = Vec<double>::Zero(3);
  constexpr long kN = 10'000;
  for (long n = 1; n <= kN; ++n) {
    const Vec<double> a = alpha_of(fixtures::random_policy(3, gen)).weights();
    mean = polyak_average(mean, a, n);
    total += a;
  }
  EXPECT_LT((mean - total / kN).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Polyak, SmallCases) {
  const Vec<double> a1{{0.2, 0.8}}, a2{{0.6, 0.4}};
  const Vec<double> m1 = polyak_average(Vec<double>(Vec<double>::Zero(2)), a1, 1);
  EXPECT_EQ(m1, a1);
  EXPECT_LT((polyak_average(m1, a2, 2) - Vec<double>{{0.4, 0.6}}).norm(), 1e-15);
  EXPECT_EQ(polyak_average(a1, a1, 7), a1);
}

TEST(RunBaseline, AllMethodsApproachQsdOnLoopy) {
  const auto k = loopy_chain(0.1);
  RunOptions opts;
  opts.reference = qsd_power(k).weights();
  for (auto m : {BaselineMethod::Vanilla, BaselineMethod::Projection, BaselineMethod::Polyak}) {
    BaselineConfig cfg;
    cfg.method = m;
    cfg.max_iters = 5000;
    cfg.seed = 2;
    const auto res = run_baseline(k, cfg, Distribution<double>(Vec<double>{{0.8, 0.1, 0.1}}), opts);
    ASSERT_EQ(res.trace.size(), 5000u);
    EXPECT_LT(*res.trace.back().l2_error, 0.05) << to_string(m);
  }
}

TEST(RunBaseline, Deterministic) {
  const auto k = loopy_chain(0.5);
  BaselineConfig cfg;
  cfg.method = BaselineMethod::Polyak;
  cfg.max_iters = 300;
  cfg.seed = 11;
  const auto a = run_baseline(k, cfg, Distribution<double>::uniform(3));
  const auto b = run_baseline(k, cfg, Distribution<double>::uniform(3));
  EXPECT_EQ(a.alpha, b.alpha);
}

TEST(BaselineMethod, ParseRoundTrip) {
  for (auto m : {BaselineMethod::Vanilla, BaselineMethod::Projection, BaselineMethod::Polyak})
    EXPECT_EQ(parse_baseline_method(to_string(m)), m);
  EXPECT_THROW(parse_baseline_method("sgd"), std::invalid_argument);
}
