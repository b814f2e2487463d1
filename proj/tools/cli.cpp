#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "qsd/actor_critic.hpp"
#include "qsd/baselines.hpp"
#include "qsd/bench.hpp"
#include "qsd/exact.hpp"
#include "qsd/io.hpp"

namespace qsd::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kBoolKeys = {"small", "timing", "stop-at-threshold"};

bool is_bool_key(const std::string& key) {
  return std::find(kBoolKeys.begin(), kBoolKeys.end(), key) != kBoolKeys.end();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// ---------------------------------------------------------------------------
// Typed access to settings
// ---------------------------------------------------------------------------

class View {
 public:
  explicit View(const Settings& s) : s_(s) {}

  const std::string& str(const std::string& key) const {
    const auto it = s_.find(key);
    if (it == s_.end()) throw std::logic_error("missing setting '" + key + "'");
    return it->second;
  }

  bool has(const std::string& key) const { return !str(key).empty(); }

  double real(const std::string& key) const {
    const std::string& v = str(key);
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
      throw UsageError("invalid number for '" + key + "': '" + v + "'");
    return out;
  }

  long integer(const std::string& key) const {
    const std::string& v = str(key);
    long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw UsageError("invalid integer for '" + key + "': '" + v + "'");
    return out;
  }

  std::uint64_t seed(const std::string& key) const {
    const std::string& v = str(key);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw UsageError("invalid seed for '" + key + "': '" + v + "'");
    return out;
  }

  bool flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0" || v.empty()) return false;
    throw UsageError("invalid boolean for '" + key + "': '" + v + "'");
  }

  std::optional<double> maybe_real(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return real(key);
  }

  Schedule schedule(const std::string& key) const {
    try {
      return Schedule::parse(str(key));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string(e.what()) + " (" + key + ")");
    }
  }

 private:
  const Settings& s_;
};

// ---------------------------------------------------------------------------
// Presets as settings
// ---------------------------------------------------------------------------

std::string resolve_preset_name(const View& v) {
  const std::string& name = v.str("preset");
  if (name != "paper") return name;
  const std::string& chain = v.str("chain");
  if (chain == "loopy") {
    const double eps = v.real("eps");
    if (eps == 0.1) return "loopy-01";
    if (eps == 0.9) return "loopy-09";
    throw UsageError("--preset paper: no preset for loopy eps=" + v.str("eps"));
  }
  if (chain == "mm1n") {
    const RhoProfile rho = RhoProfile::parse(v.str("rho"));
    if (rho.kind == RhoProfile::Kind::Linear) return "queue-linear";
    if (rho.value == 1.25) return "queue-const";
    throw UsageError("--preset paper: no preset for rho=" + v.str("rho"));
  }
  throw UsageError("--preset paper needs --chain loopy or --chain mm1n");
}

void apply_preset(Settings& s, const Preset& p, const std::string& command) {
  s["preset"] = p.name;
  if (p.chain.kind == ChainSpec::Kind::Loopy) {
    s["chain"] = "loopy";
    s["eps"] = io::format_number(p.chain.eps);
  } else {
    s["chain"] = "mm1n";
    s["n-states"] = std::to_string(p.chain.n_states);
    s["rho"] = p.chain.rho.to_string();
  }
  s["batch"] = std::to_string(p.trainer.batch_size);
  s["burn-in"] = std::to_string(p.trainer.burn_in);
  s["eta-theta"] = p.trainer.eta_theta.to_string();
  s["eta-psi"] = p.trainer.eta_psi.to_string();
  s["eta-r"] = p.trainer.eta_r.to_string();
  s["theta0"] = p.theta0;
  s["step"] = p.projection_step.to_string();
  s["iters"] = std::to_string(command == "baseline" ? p.baseline_iters : p.ac_iters);
  s["baseline-iters"] = std::to_string(p.baseline_iters);
  s["threshold"] = io::format_number(p.threshold);
}

// ---------------------------------------------------------------------------
// Building library objects from settings
// ---------------------------------------------------------------------------

ChainSpec chain_spec(const View& v) {
  ChainSpec c;
  const std::string& chain = v.str("chain");
  if (chain == "loopy") {
    c.kind = ChainSpec::Kind::Loopy;
    c.eps = v.real("eps");
  } else if (chain == "mm1n") {
    c.kind = ChainSpec::Kind::Queue;
    c.n_states = static_cast<int>(v.integer("n-states"));
    c.rho = RhoProfile::parse(v.str("rho"));
  } else if (chain == "file") {
    if (!v.has("kernel")) throw UsageError("--chain file needs --kernel <path>");
    c.kind = ChainSpec::Kind::File;
    c.path = v.str("kernel");
  } else {
    throw UsageError("unknown chain '" + chain + "' (expected loopy, mm1n or file)");
  }
  return c;
}

TrainerConfig trainer_config(const View& v) {
  TrainerConfig cfg;
  cfg.eta_theta = v.schedule("eta-theta");
  cfg.eta_psi = v.schedule("eta-psi");
  cfg.eta_r = v.schedule("eta-r");
  cfg.batch_size = static_cast<int>(v.integer("batch"));
  cfg.burn_in = static_cast<int>(v.integer("burn-in"));
  cfg.initial_burn_in = static_cast<int>(v.integer("initial-burn-in"));
  cfg.max_iters = v.integer("iters");
  cfg.seed = v.seed("seed");
  const std::string& mode = v.str("beta-mode");
  if (mode == "exact")
    cfg.beta_mode = BetaMode::Exact;
  else if (mode == "stochastic")
    cfg.beta_mode = BetaMode::Stochastic;
  else
    throw UsageError("unknown beta mode '" + mode + "' (expected exact or stochastic)");
  cfg.beta_samples = static_cast<int>(v.integer("beta-samples"));
  cfg.validate();
  return cfg;
}

RunOptions run_options(const View& v, const Vec<double>& reference) {
  RunOptions opts;
  opts.reference = reference;
  opts.record_every = v.integer("record-every");
  if (opts.record_every < 1) throw UsageError("record-every must be >= 1");
  opts.timing = v.flag("timing");
  opts.threshold = v.maybe_real("threshold");
  opts.stop_at_threshold = v.flag("stop-at-threshold");
  opts.max_wall_seconds = v.maybe_real("max-seconds");
  return opts;
}

fs::path svg_path(const View& v) {
  const std::string& svg = v.str("svg");
  if (svg.empty() || svg == "false") return {};
  if (svg != "true") return svg;
  if (!v.has("out")) throw UsageError("--svg without a path needs --out");
  return fs::path(v.str("out")).replace_extension(".svg");
}

void emit_trace(const View& v, const Trace& trace, std::ostream& out) {
  if (v.has("out"))
    io::write_trace_file(v.str("out"), trace);
  else
    io::write_trace(out, trace);
  if (const fs::path svg = svg_path(v); !svg.empty())
    io::write_loglog_svg(svg, "l2 error", {{"run", &trace}});
}

void report_run(std::ostream& err, const Trace& trace, const std::optional<ThresholdHit>& hit) {
  if (!trace.empty() && trace.back().l2_error)
    err << "final l2_error " << io::format_number(*trace.back().l2_error) << " after "
        << trace.back().iteration << " iterations\n";
  if (hit) err << "threshold reached at iteration " << hit->iteration << "\n";
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_exact(const View& v, std::ostream& out) {
  const auto kernel = chain_spec(v).build();
  PowerOptions opts;
  opts.tol = v.real("tol");
  const auto alpha = qsd_power(kernel, opts);
  std::ostringstream csv;
  csv << "state,weight\n";
  for (Index i = 0; i < alpha.size(); ++i) csv << i << ',' << io::format_number(alpha[i]) << '\n';
  if (v.has("out")) {
    std::ofstream f(v.str("out"), std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + v.str("out") + "' for writing");
    f << csv.str();
  } else {
    out << csv.str();
  }
  return 0;
}

int cmd_train(const View& v, std::ostream& out, std::ostream& err) {
  const auto kernel = chain_spec(v).build();
  const TrainerConfig cfg = trainer_config(v);
  Vec<double> theta0;
  try {
    theta0 = make_theta0(v.str("theta0"), static_cast<int>(kernel.size()));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Vec<double> reference = qsd_power(kernel).weights();
  const auto res = train(kernel, cfg, SoftmaxPolicy<double>(theta0),
                         ValueTable<double>::zeros(kernel.size()), run_options(v, reference));
  emit_trace(v, res.trace, out);
  if (v.has("checkpoint")) io::write_checkpoint(v.str("checkpoint"), res.state.policy, res.state.values);
  report_run(err, res.trace, res.hit);
  return 0;
}

int cmd_baseline(const View& v, std::ostream& out, std::ostream& err) {
  const auto kernel = chain_spec(v).build();
  BaselineConfig cfg;
  cfg.method = parse_baseline_method(v.str("method"));
  cfg.step = v.schedule("step");
  cfg.max_iters = v.integer("iters");
  if (cfg.max_iters < 0) throw UsageError("iters must be >= 0");
  cfg.seed = v.seed("seed");
  cfg.max_episode_steps = v.integer("max-episode-steps");
  const Vec<double> reference = qsd_power(kernel).weights();
  const auto res = run_baseline(kernel, cfg, Distribution<double>::uniform(kernel.size()),
                                run_options(v, reference));
  emit_trace(v, res.trace, out);
  report_run(err, res.trace, res.hit);
  return 0;
}

int cmd_bench(const View& v, std::ostream& out) {
  const long n_seeds = v.integer("seeds");
  if (n_seeds < 1) throw UsageError("seeds must be >= 1");
  const std::uint64_t first = v.seed("seed");
  std::vector<std::uint64_t> seeds;
  for (long i = 0; i < n_seeds; ++i) seeds.push_back(first + static_cast<std::uint64_t>(i));

  const ChainSpec chain = chain_spec(v);
  const auto kernel = chain.build();
  const Vec<double> reference = qsd_power(kernel).weights();
  const std::string label = v.str("preset");
  const fs::path dir = v.has("out-dir") ? fs::path(v.str("out-dir")) : fs::path("bench-out") / label;
  fs::create_directories(dir);

  TrainerConfig trainer = trainer_config(v);
  Vec<double> theta0;
  try {
    theta0 = make_theta0(v.str("theta0"), static_cast<int>(kernel.size()));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::ostringstream summary, timing;
  summary << "method,threshold,seeds_hit,seeds_total,mean_iterations,mean_final_error,status\n";
  timing << "method,threshold,mean_wall_seconds\n";
  for (Method m : {Method::Vanilla, Method::Projection, Method::Polyak, Method::ActorCritic}) {
    Experiment ex;
    ex.label = label;
    ex.chain = chain;
    ex.method = m;
    ex.trainer = trainer;
    ex.theta0 = theta0;
    ex.baseline.step = v.schedule("step");
    ex.baseline.max_episode_steps = v.integer("max-episode-steps");
    ex.seeds = seeds;
    ex.iters = m == Method::ActorCritic ? v.integer("iters") : v.integer("baseline-iters");
    ex.threshold = v.maybe_real("threshold");
    ex.stop_at_threshold = v.flag("stop-at-threshold");
    ex.max_wall_seconds = v.maybe_real("max-seconds");
    ex.record_every = v.integer("record-every");
    ex.timing = v.flag("timing");
    ex.out_dir = dir;
    ex.svg = !v.str("svg").empty() && v.str("svg") != "false";
    ex.jobs = static_cast<int>(v.integer("jobs"));
    const auto res = run_experiment(ex, reference);

    double err_sum = 0.0;
    int err_count = 0;
    for (const auto& s : res.seeds)
      if (s.final_error) err_sum += *s.final_error, ++err_count;
    const auto& t = res.timing;
    summary << t.method << ',' << io::format_number(t.threshold) << ',' << t.seeds_hit << ','
            << t.seeds_total << ','
            << (t.mean_iterations ? io::format_number(*t.mean_iterations) : "") << ','
            << (err_count ? io::format_number(err_sum / err_count) : "") << ',' << t.status
            << '\n';
    timing << t.method << ',' << io::format_number(t.threshold) << ','
           << (t.mean_wall_seconds ? io::format_number(*t.mean_wall_seconds) : "") << '\n';
  }
  {
    std::ofstream f(dir / "summary.csv", std::ios::binary);
    f << summary.str();
  }
  {
    std::ofstream f(dir / "timing.csv", std::ios::binary);
    f << timing.str();
  }
  out << "# " << label << " on " << chain.describe() << ", " << n_seeds << " seed(s), output in "
      << dir.string() << "\n";
  out << summary.str();
  out << "# wall clock\n" << timing.str();
  return 0;
}

int cmd_validate(const View& v, std::ostream& out) {
  const ChainSpec spec = chain_spec(v);
  const Mat<double> m =
      spec.kind == ChainSpec::Kind::File ? io::read_matrix_file(spec.path) : spec.build().entries();
  const KernelReport report = validate(m);
  for (const auto& c : report.checks)
    out << (c.passed ? "ok    " : "FAIL  ") << c.name << (c.detail.empty() ? "" : ": " + c.detail)
        << '\n';
  out << (report.irreducible ? "ok    " : "note  ") << "irreducible"
      << (report.irreducible ? "" : ": K is reducible; the QSD may not be unique") << '\n';
  return report.ok() ? 0 : 1;
}

}  // namespace

// ---------------------------------------------------------------------------

Settings default_settings() {
  return {
      {"chain", "loopy"},
      {"eps", "0.1"},
      {"n-states", "500"},
      {"rho", "const:1.25"},
      {"kernel", ""},
      {"method", "vanilla"},
      {"preset", ""},
      {"seed", "0"},
      {"seeds", "5"},
      {"iters", "10000"},
      {"baseline-iters", "10000"},
      {"batch", "1"},
      {"burn-in", "1"},
      {"initial-burn-in", "100"},
      {"beta-mode", "exact"},
      {"beta-samples", "0"},
      {"eta-theta", "const:0.01"},
      {"eta-psi", "const:0.0001"},
      {"eta-r", "const:0.0001"},
      {"theta0", "zeros"},
      {"step", "power:0.99"},
      {"out", ""},
      {"out-dir", ""},
      {"svg", ""},
      {"small", "false"},
      {"timing", "false"},
      {"record-every", "1"},
      {"threshold", ""},
      {"stop-at-threshold", "false"},
      {"max-seconds", ""},
      {"max-episode-steps", std::to_string(kDefaultEpisodeGuard)},
      {"jobs", "1"},
      {"checkpoint", ""},
      {"tol", "1e-12"},
  };
}

Settings parse_config(std::istream& in) {
  const Settings known = default_settings();
  Settings out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!known.count(key))
      throw UsageError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    out[key] = value;
  }
  return out;
}

void dump_config(std::ostream& out, const Settings& settings) {
  for (const auto& [key, value] : settings) out << key << " = " << value << '\n';
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quasi-stationary distributions of absorbing Markov chains", "qsd"};
  app.require_subcommand(1);

  const Settings defaults = default_settings();
  Settings flags;  // values as typed on the command line
  std::map<std::string, CLI::Option*> given;
  std::string config_path;
  bool dump = false;
  std::string bench_preset;

  struct Command {
    std::string name;
    std::string help;
  };
  const std::vector<Command> commands = {
      {"exact", "print the exact QSD as CSV (state,weight)"},
      {"train", "run the actor-critic learner"},
      {"baseline", "run the vanilla, projection or polyak baseline"},
      {"bench", "run all four methods on a named preset"},
      {"validate", "print kernel diagnostics"},
  };
  std::map<std::string, std::map<std::string, CLI::Option*>> per_command;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    auto& opts = per_command[c.name];
    for (const auto& [key, _] : defaults) {
      if (c.name == "bench" && key == "preset") continue;  // positional there
      if (is_bool_key(key)) {
        opts[key] = sub->add_flag("--" + key);
      } else if (key == "svg") {
        opts[key] = sub->add_option("--svg", flags["svg"], "write a log-log plot (optional path)")
                        ->expected(0, 1);
      } else {
        opts[key] = sub->add_option("--" + key, flags[key]);
      }
    }
    sub->add_option("--config", config_path, "key = value settings file");
    sub->add_flag("--dump-config", dump, "print effective settings and exit");
    if (c.name == "bench")
      sub->add_option("name", bench_preset, "loopy-01, loopy-09, queue-const or queue-linear")
          ->required();
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "qsd: " << e.what() << "\n";
    return 2;
  }

  std::string command;
  for (const auto& c : commands)
    if (app.got_subcommand(c.name)) command = c.name;

  try {
    // Explicit flags, then the config file beneath them.
    Settings explicit_flags;
    for (const auto& [key, opt] : per_command[command]) {
      if (opt->count() == 0) continue;
      if (is_bool_key(key))
        explicit_flags[key] = "true";
      else if (key == "svg")
        explicit_flags[key] = flags[key].empty() ? "true" : flags[key];
      else
        explicit_flags[key] = flags[key];
    }
    Settings from_config;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw UsageError("cannot read config file '" + config_path + "'");
      from_config = parse_config(f);
    }
    auto layered = [&](Settings base) {
      for (const auto& [k, val] : from_config) base[k] = val;
      for (const auto& [k, val] : explicit_flags) base[k] = val;
      return base;
    };

    Settings settings = layered(defaults);
    if (command == "bench") settings["preset"] = bench_preset;
    if (!settings["preset"].empty()) {
      const std::string name = resolve_preset_name(View(settings));
      Preset preset;
      try {
        preset = find_preset(name, View(settings).flag("small"));
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      Settings base = defaults;
      apply_preset(base, preset, command);
      settings = layered(base);
      settings["preset"] = name;
    }

    const View view(settings);
    if (dump) {
      dump_config(out, settings);
      return 0;
    }
    if (command == "exact") return cmd_exact(view, out);
    if (command == "train") return cmd_train(view, out, err);
    if (command == "baseline") return cmd_baseline(view, out, err);
    if (command == "bench") return cmd_bench(view, out);
    if (command == "validate") return cmd_validate(view, out);
    throw UsageError("unknown subcommand");
  } catch (const UsageError& e) {
    err << "qsd: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "qsd: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace qsd::cli
