#include "qsd/bench.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>
#include <stdexcept>

#include "qsd/exact.hpp"
#include "qsd/io.hpp"

namespace qsd {

SubMarkovKernel<double> loopy_chain(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("loopy_chain: eps must lie in (0,1)");
  return SubMarkovKernel<double>(Mat<double>::Constant(3, 3, (1.0 - eps) / 3.0));
}

SubMarkovKernel<double> mm1n_queue(int n_states, const std::function<double(int)>& rho) {
  if (n_states < 3) throw std::invalid_argument("mm1n_queue: need at least 3 states");
  Mat<double> k = Mat<double>::Zero(n_states, n_states);
  for (int i = 1; i < n_states; ++i) {
    const double r = rho(i);
    if (!(r > 0.0) || !std::isfinite(r))
      throw std::invalid_argument("mm1n_queue: rho must be positive at state " + std::to_string(i));
    const double up = r / (r + 1.0);
    const double down = 1.0 / (r + 1.0);
    k(i - 1, i) = up;
    if (i > 1) k(i - 1, i - 2) = down;  // state 1 exits with probability `down`
  }
  k(n_states - 1, n_states - 2) = 1.0;
  return SubMarkovKernel<double>(std::move(k));
}

RhoProfile RhoProfile::parse(const std::string& text) {
  if (text == "linear") return {Kind::Linear, 0.0};
  if (text.rfind("const:", 0) == 0) {
    std::size_t used = 0;
    const double v = std::stod(text.substr(6), &used);
    if (used != text.size() - 6 || !(v > 0.0))
      throw std::invalid_argument("rho: bad constant in '" + text + "'");
    return {Kind::Constant, v};
  }
  throw std::invalid_argument("rho: expected const:<v> or linear, got '" + text + "'");
}

std::string RhoProfile::to_string() const {
  return kind == Kind::Linear ? "linear" : "const:" + io::format_number(value);
}

std::function<double(int)> RhoProfile::for_size(int n_states) const {
  if (kind == Kind::Constant) return [v = value](int) { return v; };
  const double denom = 2.0 * n_states - 4.0;
  return [denom](int i) { return 2.0 - 3.0 * (i - 1) / denom; };
}

SubMarkovKernel<double> ChainSpec::build() const {
  switch (kind) {
    case Kind::Loopy:
      return loopy_chain(eps);
    case Kind::Queue:
      return mm1n_queue(n_states, rho.for_size(n_states));
    case Kind::File:
      return io::read_kernel_file(path);
  }
  throw std::logic_error("unreachable");
}

std::string ChainSpec::describe() const {
  switch (kind) {
    case Kind::Loopy:
      return "loopy(eps=" + io::format_number(eps) + ")";
    case Kind::Queue:
      return "mm1n(N=" + std::to_string(n_states) + ", rho=" + rho.to_string() + ")";
    case Kind::File:
      return "file(" + path.string() + ")";
  }
  return {};
}

double fit_loglog_slope(const Trace& trace, long lo, long hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long count = 0;
  for (const auto& row : trace) {
    if (row.iteration < lo || row.iteration > hi) continue;
    if (!row.l2_error || !(*row.l2_error > 0.0)) continue;
    const double x = std::log(static_cast<double>(row.iteration));
    const double y = std::log(*row.l2_error);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++count;
  }
  if (count < 10) throw std::invalid_argument("fit_loglog_slope: fewer than 10 usable points");
  const double n = static_cast<double>(count);
  const double var = sxx - sx * sx / n;
  if (!(var > 0.0)) throw std::invalid_argument("fit_loglog_slope: degenerate window");
  return (sxy - sx * sy / n) / var;
}

Trace mean_error_curve(const std::vector<Trace>& traces) {
  if (traces.empty()) return {};
  const std::size_t len = traces.front().size();
  for (const auto& t : traces)
    if (t.size() != len) throw std::invalid_argument("mean_error_curve: traces differ in length");
  Trace mean(len);
  for (std::size_t i = 0; i < len; ++i) {
    double acc = 0.0;
    for (const auto& t : traces) {
      if (t[i].iteration != traces.front()[i].iteration || !t[i].l2_error)
        throw std::invalid_argument("mean_error_curve: misaligned traces");
      acc += *t[i].l2_error;
    }
    mean[i].iteration = traces.front()[i].iteration;
    mean[i].l2_error = acc / static_cast<double>(traces.size());
  }
  return mean;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::ActorCritic:
      return "ac";
    case Method::Vanilla:
      return "vanilla";
    case Method::Projection:
      return "projection";
    case Method::Polyak:
      return "polyak";
  }
  return {};
}

Method parse_method(const std::string& text) {
  if (text == "ac" || text == "actor-critic") return Method::ActorCritic;
  if (text == "vanilla") return Method::Vanilla;
  if (text == "projection") return Method::Projection;
  if (text == "polyak") return Method::Polyak;
  throw std::invalid_argument("unknown method '" + text + "'");
}

namespace {

SeedOutcome run_seed(const Experiment& ex, const SubMarkovKernel<double>& kernel,
                     const Vec<double>& reference, std::uint64_t seed) {
  RunOptions opts;
  opts.reference = reference;
  opts.record_every = ex.record_every;
  opts.timing = ex.timing;
  opts.threshold = ex.threshold;
  opts.stop_at_threshold = ex.stop_at_threshold;
  opts.max_wall_seconds = ex.max_wall_seconds;

  SeedOutcome out;
  out.seed = seed;
  try {
    if (ex.method == Method::ActorCritic) {
      TrainerConfig cfg = ex.trainer;
      cfg.seed = seed;
      cfg.max_iters = ex.iters;
      auto res = train(kernel, cfg, SoftmaxPolicy<double>(ex.theta0),
                       ValueTable<double>::zeros(kernel.size()), opts);
      out.trace = std::move(res.trace);
      out.hit = res.hit;
    } else {
      BaselineConfig cfg = ex.baseline;
      cfg.method = ex.method == Method::Vanilla      ? BaselineMethod::Vanilla
                   : ex.method == Method::Projection ? BaselineMethod::Projection
                                                     : BaselineMethod::Polyak;
      cfg.seed = seed;
      cfg.max_iters = ex.iters;
      auto res = run_baseline(kernel, cfg, Distribution<double>::uniform(kernel.size()), opts);
      out.trace = std::move(res.trace);
      out.hit = res.hit;
    }
  } catch (const std::exception& e) {
    out.failure = e.what();
  }
  if (!out.trace.empty()) out.final_error = out.trace.back().l2_error;
  if (!ex.out_dir.empty()) {
    out.csv = ex.out_dir / (ex.label + "_" + to_string(ex.method) + "_seed" +
                            std::to_string(seed) + ".csv");
    io::write_trace_file(out.csv, out.trace);
  }
  return out;
}

TimingRow summarize(const Experiment& ex, const std::vector<SeedOutcome>& seeds) {
  TimingRow row;
  row.method = to_string(ex.method);
  row.threshold = ex.threshold.value_or(0.0);
  row.seeds_total = static_cast<int>(seeds.size());
  double iters = 0.0, secs = 0.0;
  std::string failure;
  for (const auto& s : seeds) {
    if (!s.failure.empty() && failure.empty()) failure = s.failure;
    if (!s.hit) continue;
    ++row.seeds_hit;
    iters += static_cast<double>(s.hit->iteration);
    secs += s.hit->wall_seconds;
  }
  if (row.seeds_hit > 0) {
    row.mean_iterations = iters / row.seeds_hit;
    row.mean_wall_seconds = secs / row.seeds_hit;
  }
  if (!failure.empty())
    row.status = "failed: " + failure;
  else if (!ex.threshold)
    row.status = "no threshold";
  else if (row.seeds_hit == row.seeds_total)
    row.status = "reached";
  else if (row.seeds_hit > 0)
    row.status = "partial";
  else
    row.status = "not reached";
  return row;
}

}  // namespace

ExperimentResult run_experiment(const Experiment& ex, const std::optional<Vec<double>>& reference) {
  const SubMarkovKernel<double> kernel = ex.chain.build();
  const Vec<double> ref = reference ? *reference : qsd_power(kernel).weights();
  if (ex.method == Method::ActorCritic && ex.theta0.size() != kernel.size() - 1)
    throw std::invalid_argument("run_experiment: theta0 has the wrong length");

  ExperimentResult result;
  std::vector<std::future<SeedOutcome>> pending;
  const std::size_t jobs = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(ex.jobs, 1)), ex.seeds.size()));
  for (std::size_t i = 0; i < ex.seeds.size(); ++i) {
    if (jobs == 1) {
      result.seeds.push_back(run_seed(ex, kernel, ref, ex.seeds[i]));
      continue;
    }
    pending.push_back(std::async(std::launch::async, run_seed, std::cref(ex), std::cref(kernel),
                                 std::cref(ref), ex.seeds[i]));
    if (pending.size() == jobs || i + 1 == ex.seeds.size()) {
      for (auto& f : pending) result.seeds.push_back(f.get());
      pending.clear();
    }
  }
  result.timing = summarize(ex, result.seeds);

  if (ex.svg && !ex.out_dir.empty()) {
    std::vector<io::PlotSeries> series;
    std::vector<std::string> labels;
    for (const auto& s : result.seeds) labels.push_back("seed " + std::to_string(s.seed));
    for (std::size_t i = 0; i < result.seeds.size(); ++i)
      series.push_back({labels[i], &result.seeds[i].trace});
    io::write_loglog_svg(ex.out_dir / (ex.label + "_" + to_string(ex.method) + ".svg"),
                         ex.label + ": " + to_string(ex.method) + " on " + ex.chain.describe(),
                         series);
  }
  return result;
}

std::vector<Experiment> preset_experiments(const Preset& preset,
                                           const std::vector<std::uint64_t>& seeds) {
  std::vector<Experiment> out;
  const Vec<double> theta0 = make_theta0(
      preset.theta0, preset.chain.kind == ChainSpec::Kind::Loopy ? 3 : preset.chain.n_states);
  for (Method m : {Method::Vanilla, Method::Projection, Method::Polyak, Method::ActorCritic}) {
    Experiment ex;
    ex.label = preset.name;
    ex.chain = preset.chain;
    ex.method = m;
    ex.trainer = preset.trainer;
    ex.theta0 = theta0;
    ex.baseline.step = preset.projection_step;
    ex.seeds = seeds;
    ex.iters = m == Method::ActorCritic ? preset.ac_iters : preset.baseline_iters;
    ex.threshold = preset.threshold;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace qsd
