#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qsd/actor_critic.hpp"
#include "qsd/baselines.hpp"
#include "qsd/kernel.hpp"
#include "qsd/schedule.hpp"
#include "qsd/trace.hpp"

namespace qsd {

// ---------------------------------------------------------------------------
// Benchmark chains
// ---------------------------------------------------------------------------

/// Three states; every entry of K is (1 - eps) / 3 and every state exits with
/// probability eps. The QSD is uniform for every eps.
SubMarkovKernel<double> loopy_chain(double eps);

/// M/M/1/N queue with absorption below state 1. `rho(i)` is the 1-based
/// per-state traffic ratio; up-probability rho/(rho+1), down 1/(rho+1).
/// Only state 1 (index 0) can exit; state N always steps down.
SubMarkovKernel<double> mm1n_queue(int n_states, const std::function<double(int)>& rho);

/// Parsed `--rho` value: "const:<v>" or "linear" (rho_i = 2 - 3(i-1)/(2N-4)).
struct RhoProfile {
  enum class Kind { Constant, Linear } kind = Kind::Constant;
  double value = 1.25;

  static RhoProfile parse(const std::string& text);
  std::string to_string() const;
  std::function<double(int)> for_size(int n_states) const;
};

/// What to build a kernel from.
struct ChainSpec {
  enum class Kind { Loopy, Queue, File } kind = Kind::Loopy;
  double eps = 0.1;
  int n_states = 500;
  RhoProfile rho;
  std::filesystem::path path;

  SubMarkovKernel<double> build() const;
  std::string describe() const;
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Least-squares slope of ln(error) against ln(iteration) for rows with
/// lo <= iteration <= hi and positive error. Needs at least 10 such rows.
double fit_loglog_slope(const Trace& trace, long lo, long hi);

/// Pointwise mean of l2_error across traces that share iteration indices.
Trace mean_error_curve(const std::vector<Trace>& traces);

// ---------------------------------------------------------------------------
// Presets for the benchmark experiments
// ---------------------------------------------------------------------------

struct Preset {
  std::string name;
  ChainSpec chain;
  TrainerConfig trainer;
  std::string theta0;       // "zeros", "queue-const", "queue-linear" or a comma list
  Schedule projection_step = Schedule::power(0.99);
  long ac_iters = 10'000;
  long baseline_iters = 100'000;
  double threshold = 1e-2;  // accuracy reported in the timing summary
};

std::vector<std::string> preset_names();
/// `small` shrinks the queue presets to N = 50 with reduced iteration budgets.
Preset find_preset(const std::string& name, bool small = false);

/// Initial logits by name (see Preset::theta0) for an n-state chain.
Vec<double> make_theta0(const std::string& spec, int n_states);

/// theta0 for the constant-rho queue:
///   theta_i = -35 + 35 (i-1)/(N-2) for i <= N-2, theta_{N-1} = 3.
Vec<double> queue_const_theta0(int n_states);
/// theta0 for the linear-rho queue, defined for N = 500 and resampled by
/// relative position for other sizes.
Vec<double> queue_linear_theta0(int n_states);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

enum class Method { ActorCritic, Vanilla, Projection, Polyak };

std::string to_string(Method m);
Method parse_method(const std::string& text);

struct Experiment {
  std::string label;
  ChainSpec chain;
  Method method = Method::ActorCritic;
  TrainerConfig trainer;
  Vec<double> theta0;
  BaselineConfig baseline;
  std::vector<std::uint64_t> seeds{0};
  long iters = 1000;
  std::optional<double> threshold;  // report iterations and time to reach
  bool stop_at_threshold = false;
  std::optional<double> max_wall_seconds;
  long record_every = 1;
  bool timing = false;
  std::filesystem::path out_dir;    // empty: no files
  bool svg = false;
  int jobs = 1;  // seeds run concurrently
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  Trace trace;
  std::optional<double> final_error;
  std::optional<ThresholdHit> hit;
  std::string failure;  // non-empty when the run aborted
  std::filesystem::path csv;
};

struct TimingRow {
  std::string method;
  double threshold = 0.0;
  int seeds_hit = 0;
  int seeds_total = 0;
  std::optional<double> mean_iterations;
  std::optional<double> mean_wall_seconds;
  std::string status;
};

struct ExperimentResult {
  std::vector<SeedOutcome> seeds;
  TimingRow timing;
};

/// Runs every seed of one method on one chain. `reference` is the exact QSD;
/// computed when absent.
ExperimentResult run_experiment(const Experiment& ex,
                                const std::optional<Vec<double>>& reference = std::nullopt);

/// Experiments for all four methods of a preset, sharing seeds and budgets.
std::vector<Experiment> preset_experiments(const Preset& preset,
                                           const std::vector<std::uint64_t>& seeds);

}  // namespace qsd
