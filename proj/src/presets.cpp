#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qsd/bench.hpp"

namespace qsd {

namespace {

Preset loopy_preset(std::string name, double eps) {
  Preset p;
  p.name = std::move(name);
  p.chain.kind = ChainSpec::Kind::Loopy;
  p.chain.eps = eps;
  p.trainer.eta_psi = Schedule::constant(1e-4);
  p.trainer.eta_r = Schedule::constant(1e-4);
  p.trainer.burn_in = 1;
  p.projection_step = Schedule::power(0.99);
  p.ac_iters = 10'000;
  p.baseline_iters = 100'000;
  return p;
}

Preset queue_preset(std::string name, RhoProfile rho, bool small) {
  Preset p;
  p.name = std::move(name);
  p.chain.kind = ChainSpec::Kind::Queue;
  p.chain.n_states = small ? 50 : 500;
  p.chain.rho = rho;
  p.trainer.eta_psi = Schedule::constant(1e-4);
  p.trainer.eta_r = Schedule::constant(1e-4);
  p.trainer.burn_in = 1;
  p.projection_step = Schedule::power(0.95);
  p.ac_iters = small ? 20'000 : 200'000;
  p.baseline_iters = small ? 100 : 100'000;  // small-queue episodes run ~1e6 steps
  p.threshold = 0.2;
  return p;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"loopy-01", "loopy-09", "queue-const", "queue-linear"};
}

Preset find_preset(const std::string& name, bool small) {
  if (name == "loopy-01") {
    Preset p = loopy_preset(name, 0.1);
    p.theta0 = "-1,1";
    p.trainer.eta_theta = Schedule::loopy_01();
    p.trainer.batch_size = 4;
    p.threshold = 1e-2;
    return p;
  }
  if (name == "loopy-09") {
    Preset p = loopy_preset(name, 0.9);
    p.theta0 = "4,-2";
    p.trainer.eta_theta = Schedule::constant(0.04);
    p.trainer.batch_size = 32;
    p.threshold = 2e-2;
    return p;
  }
  if (name == "queue-const") {
    Preset p = queue_preset(name, RhoProfile{RhoProfile::Kind::Constant, 1.25}, small);
    p.theta0 = "queue-const";
    p.trainer.eta_theta = Schedule::constant(3e-4);
    p.trainer.batch_size = 64;
    return p;
  }
  if (name == "queue-linear") {
    Preset p = queue_preset(name, RhoProfile{RhoProfile::Kind::Linear, 0.0}, small);
    p.theta0 = "queue-linear";
    p.trainer.eta_theta = Schedule::constant(2e-4);
    p.trainer.batch_size = 128;
    return p;
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

Vec<double> queue_const_theta0(int n_states) {
  if (n_states < 3) throw std::invalid_argument("queue_const_theta0: need at least 3 states");
  const int m = n_states - 1;
  Vec<double> theta(m);
  for (int i = 1; i <= m - 1; ++i) theta[i - 1] = -35.0 + 35.0 / (n_states - 2) * (i - 1);
  theta[m - 1] = 3.0;
  return theta;
}

Vec<double> queue_linear_theta0(int n_states) {
  if (n_states < 3) throw std::invalid_argument("queue_linear_theta0: need at least 3 states");
  constexpr int kBase = 499;
  Vec<double> base(kBase);
  for (int i = 1; i <= 250; ++i) base[i - 1] = 8.0 + 35.0 / 250.0 * (i - 1);
  base[250] = 44.0;
  for (int i = 252; i <= 305; ++i) base[i - 1] = 43.0;
  base[305] = 48.0;
  base[306] = 42.0;
  for (int i = 308; i <= 499; ++i) base[i - 1] = 43.0 - 38.0 / 293.0 * (i - 1);
  if (n_states == 500) return base;
  const int m = n_states - 1;
  Vec<double> theta(m);
  for (int j = 0; j < m; ++j) {
    const double pos = m == 1 ? 0.0 : static_cast<double>(j) * (kBase - 1) / (m - 1);
    theta[j] = base[static_cast<Index>(std::lround(pos))];
  }
  return theta;
}

Vec<double> make_theta0(const std::string& spec, int n_states) {
  if (spec == "zeros") return Vec<double>::Zero(n_states - 1);
  if (spec == "queue-const") return queue_const_theta0(n_states);
  if (spec == "queue-linear") return queue_linear_theta0(n_states);
  std::vector<double> values;
  std::stringstream ss(spec);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size() || !std::isfinite(v))
      throw std::invalid_argument("theta0: cannot parse '" + cell + "'");
    values.push_back(v);
  }
  if (static_cast<int>(values.size()) != n_states - 1)
    throw std::invalid_argument("theta0: expected " + std::to_string(n_states - 1) +
                                " logits, got " + std::to_string(values.size()));
  return Eigen::Map<Vec<double>>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace qsd
