// Acceptance criteria: one PASS/FAIL line each, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "qsd/actor_critic.hpp"
#include "qsd/baselines.hpp"
#include "qsd/bench.hpp"
#include "qsd/exact.hpp"
#include "qsd/policy.hpp"

using namespace qsd;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SoftmaxPolicy<double> random_policy(Index n, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec<double> theta(n - 1);
  for (auto& t : theta) t = normal(gen);
  return SoftmaxPolicy<double>(theta);
}

SubMarkovKernel<double> queue(int n, double rho) {
  return mm1n_queue(n, [rho](int) { return rho; });
}

// 1. Exact QSD of the loopy chain is uniform.
Verdict qsd_uniform() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (double eps : {0.1, 0.5, 0.9}) {
    const auto a = qsd_power(loopy_chain(eps));
    worst = std::max(worst, (a.weights().array() - 1.0 / 3.0).abs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 1.0, "max deviation " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 2. Exact gradient vs central differences; Bellman residual.
Verdict gradient_oracle() {
  std::mt19937_64 gen(2024);
  double worst_rel = 0.0, worst_res = 0.0;
  for (const auto& k : {loopy_chain(0.1), queue(10, 1.25)}) {
    for (int i = 0; i < 20; ++i) {
      const auto p = random_policy(k.size(), gen);
      const Vec<double> g = exact_policy_gradient(k, p);
      const Vec<double> fd = finite_difference_gradient(k, p, 1e-5);
      worst_rel = std::max(worst_rel, (g - fd).norm() / std::max(g.norm(), 1e-300));
      const auto point = ExactPoint<double>::at(k, p);
      const auto v = exact_value_function(point);
      worst_res = std::max(worst_res,
                           bellman_residual(point, v.psi, v.r_estimate).lpNorm<Eigen::Infinity>());
    }
  }
  return {worst_rel <= 1e-5 && worst_res <= 1e-9,
          "max relative error " + fmt(worst_rel) + ", max Bellman residual " + fmt(worst_res)};
}

// 3. The QSD is a fixed point of the learning dynamics.
Verdict fixed_point() {
  double r_abs = 0.0, rew = 0.0, inc = 0.0;
  for (const auto& k : {loopy_chain(0.1), loopy_chain(0.9), queue(10, 1.25)}) {
    const auto star = policy_from(qsd_power(k));
    const auto point = ExactPoint<double>::at(k, star);
    r_abs = std::max(r_abs, std::abs(point.average_reward));
    rew = std::max(rew, point.reward.cwiseAbs().maxCoeff());
    const auto e = expected_increments(k, star, ValueTable<double>::zeros(k.size()));
    inc = std::max({inc, e.theta.lpNorm<Eigen::Infinity>(), e.psi.lpNorm<Eigen::Infinity>(),
                    std::abs(e.r)});
  }
  return {r_abs <= 1e-9 && rew <= 1e-8 && inc <= 1e-8,
          "|r| " + fmt(r_abs) + ", max|R| " + fmt(rew) + ", max increment " + fmt(inc)};
}

Experiment ac_experiment(const std::string& preset_name, long iters) {
  const Preset preset = find_preset(preset_name);
  Experiment ex;
  ex.label = preset.name;
  ex.chain = preset.chain;
  ex.method = Method::ActorCritic;
  ex.trainer = preset.trainer;
  ex.theta0 = make_theta0(preset.theta0, 3);
  ex.seeds = {0, 1, 2, 3, 4};
  ex.iters = iters;
  ex.record_every = iters;
  return ex;
}

// 4 and 5. Actor-critic accuracy on the loopy presets.
Verdict loopy_accuracy(const std::string& preset_name, double tol) {
  const auto res = run_experiment(ac_experiment(preset_name, 10'000));
  int ok = 0;
  std::string errs;
  for (const auto& s : res.seeds) {
    const double e = s.final_error.value_or(INFINITY);
    ok += e <= tol;
    errs += (errs.empty() ? "" : " ") + fmt(e);
  }
  return {ok >= 4, std::to_string(ok) + "/5 seeds within " + fmt(tol) + " (" + errs + ")"};
}

// 6. Queue presets: all methods reach 0.2 and actor-critic beats vanilla on time.
Verdict queue_comparison() {
  constexpr double kThreshold = 0.2;
  constexpr double kWallCap = 180.0;  // seconds per method and preset; guards runaway runs
  bool pass = true;
  std::string detail;
  for (const std::string name : {"queue-const", "queue-linear"}) {
    const Preset preset = find_preset(name);
    const Vec<double> ref = qsd_power(preset.chain.build()).weights();
    std::map<Method, std::optional<double>> wall;
    for (auto ex : preset_experiments(preset, {0})) {
      ex.threshold = kThreshold;
      ex.stop_at_threshold = true;
      ex.max_wall_seconds = kWallCap;
      ex.timing = true;
      ex.record_every = ex.method == Method::ActorCritic ? 100 : 1;
      const auto res = run_experiment(ex, ref);
      const auto& s = res.seeds.front();
      const bool hit = s.hit.has_value();
      wall[ex.method] = hit ? std::optional<double>(s.hit->wall_seconds) : std::nullopt;
      pass = pass && hit;
      detail += " " + name + "/" + to_string(ex.method) + ":" +
                (hit ? "hit@" + fmt(s.hit->wall_seconds) + "s"
                     : (s.failure.empty() ? "err=" + fmt(s.final_error.value_or(NAN))
                                          : std::string("aborted")));
    }
    const auto& ac = wall[Method::ActorCritic];
    const auto& va = wall[Method::Vanilla];
    pass = pass && ac && va && *ac < *va;
  }
  return {pass, detail.substr(1)};
}

// 7. Vanilla convergence rate on loopy 0.1.
Verdict vanilla_rate() {
  Experiment ex;
  ex.chain.kind = ChainSpec::Kind::Loopy;
  ex.chain.eps = 0.1;
  ex.method = Method::Vanilla;
  for (std::uint64_t s = 0; s < 10; ++s) ex.seeds.push_back(s);
  ex.iters = 100'000;
  const auto res = run_experiment(ex);
  std::vector<Trace> traces;
  for (const auto& s : res.seeds) traces.push_back(s.trace);
  const double slope = fit_loglog_slope(mean_error_curve(traces), 100, 100'000);
  return {slope >= -0.7 && slope <= -0.35, "slope " + fmt(slope)};
}

// Simplex projection by enumerating candidate supports and checking KKT.
Vec<double> projection_oracle(const Vec<double>& v) {
  const Index n = v.size();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    double sum = 0.0;
    int count = 0;
    for (Index i = 0; i < n; ++i)
      if (mask & (1u << i)) sum += v[i], ++count;
    const double tau = (sum - 1.0) / count;
    bool kkt = true;
    Vec<double> x = Vec<double>::Zero(n);
    for (Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        x[i] = v[i] - tau;
        kkt = kkt && x[i] > 0.0;
      } else {
        kkt = kkt && v[i] - tau <= 0.0;
      }
    }
    if (kkt) return x;
  }
  return {};
}

// 8. Simplex projection vs the support-enumeration oracle; idempotence.
Verdict projection() {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_int_distribution<int> size(1, 4);
  std::exponential_distribution<double> expo(1.0);
  double worst = 0.0, worst_idem = 0.0;
  for (int i = 0; i < 100; ++i) {
    Vec<double> v(size(gen));
    for (auto& c : v) c = normal(gen);
    const Vec<double> oracle = projection_oracle(v);
    if (oracle.size() != v.size()) return {false, "oracle found no KKT point"};
    worst = std::max(worst, (project_simplex(v).weights() - oracle).lpNorm<Eigen::Infinity>());
  }
  for (int i = 0; i < 100; ++i) {
    Vec<double> p(size(gen));
    for (auto& c : p) c = expo(gen);
    p /= p.sum();
    worst_idem = std::max(worst_idem, (project_simplex(p).weights() - p).lpNorm<Eigen::Infinity>());
  }
  return {worst <= 1e-6 && worst_idem <= 1e-12,
          "max oracle gap " + fmt(worst) + ", max idempotence gap " + fmt(worst_idem)};
}

// 9. n-sample beta and grad-beta estimators with Z ~ alpha are unbiased.
Verdict beta_estimator() {
  std::mt19937_64 gen(9);
  const auto k = loopy_chain(0.1);
  const auto p = random_policy(3, gen);
  const auto eval = PolicyEval<double>::exact(k, p);
  const Vec<double>& alpha = eval.alpha;
  RandomStream rng(9, 0);
  constexpr int kReps = 100'000;
  double worst_z = 0.0;
  for (int n_samples : {1, 4}) {
    std::vector<Index> z(static_cast<std::size_t>(n_samples));
    for (Index y = 0; y < 3; ++y) {
      const Vec<double> grad = grad_beta_exact(k, alpha, eval.killed, y);
      const Index m = grad.size();
      Vec<double> sum = Vec<double>::Zero(m + 1), sumsq = Vec<double>::Zero(m + 1);
      for (int r = 0; r < kReps; ++r) {
        for (auto& zi : z) zi = sample_index(alpha, rng.uniform());
        const auto est = estimate_beta(k, alpha, y, std::span<const Index>(z));
        Vec<double> row(m + 1);
        row << est.beta_y, est.grad_beta_y;
        sum += row;
        sumsq += row.cwiseAbs2();
      }
      Vec<double> truth(m + 1);
      truth << eval.beta[y], grad;
      const Vec<double> mean = sum / kReps;
      const Vec<double> var = (sumsq / kReps - mean.cwiseAbs2()).cwiseMax(0.0);
      for (Index j = 0; j <= m; ++j) {
        const double se = std::sqrt(var[j] / kReps);
        const double gap = std::abs(mean[j] - truth[j]);
        worst_z = std::max(worst_z, se > 0.0 ? gap / se : (gap > 1e-12 ? INFINITY : 0.0));
      }
    }
  }
  return {worst_z <= 3.0, "n = 1 and 4, max |z| " + fmt(worst_z)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// All CSV files in `dir` except wall-clock timing.
std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.path().extension() == ".csv" && name != "timing.csv") out[name] = slurp(e.path());
  }
  return out;
}

// 10. Every subcommand reproduces its CSV output byte for byte.
Verdict cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "qsd_acceptance_cli";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"exact", {"exact", "--chain", "mm1n", "--n-states", "20"}},
      {"validate", {"validate", "--chain", "loopy", "--eps", "0.5"}},
      {"train", {"train", "--preset", "loopy-01", "--iters", "500", "--seed", "3"}},
      {"baseline", {"baseline", "--method", "projection", "--chain", "loopy", "--iters", "500"}},
      {"bench", {"bench", "loopy-09", "--seeds", "2", "--iters", "200", "--baseline-iters", "200"}},
  };
  std::string bad;
  for (const auto& [name, args] : commands) {
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
      const fs::path dir = root / (name + std::to_string(run));
      fs::create_directories(dir);
      auto a = args;
      if (name == "bench") a.insert(a.end(), {"--out-dir", dir.string()});
      if (name == "train" || name == "baseline") a.insert(a.end(), {"--out", (dir / "out.csv").string()});
      std::ostringstream out, err;
      const int code = cli::run(a, out, err);
      if (code != 0) return {false, name + " exited " + std::to_string(code) + ": " + err.str()};
      std::string all = name == "bench" ? "" : out.str();
      for (const auto& [file, body] : csv_files(dir)) all += file + "\n" + body;
      outputs[run] = all;
    }
    if (outputs[0].empty() || outputs[0] != outputs[1]) bad += " " + name;
  }
  fs::remove_all(root);
  return {bad.empty(), bad.empty() ? "exact, validate, train, baseline, bench identical"
                                   : "differs:" + bad};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Verdict (*check)();
    double budget_seconds;
  };
  const Criterion criteria[] = {
      {1, "loopy QSD uniform", qsd_uniform, 1},
      {2, "exact gradient and Bellman oracle", gradient_oracle, 10},
      {3, "QSD is a fixed point", fixed_point, INFINITY},
      {4, "loopy eps=0.1 accuracy", [] { return loopy_accuracy("loopy-01", 1e-2); }, 30},
      {5, "loopy eps=0.9 accuracy", [] { return loopy_accuracy("loopy-09", 2e-2); }, 60},
      {6, "queue N=500 comparison", queue_comparison, 1800},
      {7, "vanilla convergence rate", vanilla_rate, 300},
      {8, "simplex projection", projection, 5},
      {9, "beta estimator unbiased", beta_estimator, 30},
      {10, "CLI determinism", cli_determinism, INFINITY},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v{false, ""};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (secs >= c.budget_seconds) {
      v.pass = false;
      v.detail += " (over time budget)";
    }
    v.detail += " [" + fmt(secs) + " s]";
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << v.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
