#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsd/rng.hpp"

namespace qsd {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Probability vector on the non-absorbing states.
template <typename Scalar = double>
class Distribution {
 public:
  static constexpr Scalar kSumTolerance = Scalar(1e-10);

  explicit Distribution(Vec<Scalar> weights) : weights_(std::move(weights)) {
    if (weights_.size() == 0) throw std::invalid_argument("distribution: empty weight vector");
    for (Index i = 0; i < weights_.size(); ++i) {
      if (!std::isfinite(weights_[i]) || weights_[i] < Scalar(0))
        throw std::invalid_argument("distribution: weight " + std::to_string(i) +
                                    " is negative or not finite");
    }
    if (std::abs(weights_.sum() - Scalar(1)) > kSumTolerance)
      throw std::invalid_argument("distribution: weights do not sum to one");
  }

  static Distribution uniform(Index n) {
    return Distribution(Vec<Scalar>::Constant(n, Scalar(1) / Scalar(n)));
  }

  /// Normalizes a nonnegative vector with positive mass.
  static Distribution normalized(const Vec<Scalar>& v) {
    const Scalar total = v.sum();
    if (!(total > Scalar(0))) throw std::invalid_argument("distribution: no positive mass");
    return Distribution(v / total);
  }

  Index size() const noexcept { return weights_.size(); }
  Scalar operator()(Index i) const { return weights_[i]; }
  Scalar operator[](Index i) const { return weights_[i]; }
  const Vec<Scalar>& weights() const noexcept { return weights_; }

 private:
  Vec<Scalar> weights_;
};

/// Inverse-CDF draw of an index from nonnegative weights summing to `total`.
template <typename Derived>
Index sample_index(const Eigen::MatrixBase<Derived>& weights, double u) {
  using Scalar = typename Derived::Scalar;
  const Index n = weights.size();
  Scalar acc(0);
  const Scalar target = Scalar(u) * weights.sum();
  for (Index i = 0; i < n; ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  for (Index i = n - 1; i > 0; --i)
    if (weights[i] > Scalar(0)) return i;
  return 0;
}

/// Finite sub-Markovian kernel K on states {0..N-1}. The absorbing state is
/// implicit: state x is killed with probability exit_mass(x) = 1 - K(x, E).
template <typename Scalar = double>
class SubMarkovKernel {
 public:
  static constexpr Scalar kRowTolerance = Scalar(1e-12);

  explicit SubMarkovKernel(Mat<Scalar> entries) : entries_(std::move(entries)) {
    const Index n = entries_.rows();
    if (n == 0 || entries_.cols() != n)
      throw std::invalid_argument("kernel: matrix must be square and non-empty");
    exit_mass_.resize(n);
    for (Index x = 0; x < n; ++x) {
      for (Index y = 0; y < n; ++y) {
        const Scalar k = entries_(x, y);
        if (!std::isfinite(k) || k < Scalar(0) || k > Scalar(1))
          throw std::invalid_argument("kernel: entry (" + std::to_string(x) + "," +
                                      std::to_string(y) + ") outside [0,1]");
      }
      const Scalar row = entries_.row(x).sum();
      if (row > Scalar(1) + kRowTolerance)
        throw std::invalid_argument("kernel: row " + std::to_string(x) + " sums above one");
      exit_mass_[x] = row >= Scalar(1) ? Scalar(0) : Scalar(1) - row;
    }
    build_sampling_table();
  }

  Index size() const noexcept { return entries_.rows(); }
  const Mat<Scalar>& entries() const noexcept { return entries_; }
  const Vec<Scalar>& exit_mass() const noexcept { return exit_mass_; }
  Scalar operator()(Index x, Index y) const { return entries_(x, y); }
  Scalar exit(Index x) const { return exit_mass_[x]; }

  bool strictly_sub_markovian() const { return exit_mass_.maxCoeff() > Scalar(0); }

  /// One step of the killed chain from x. Returns -1 on absorption.
  template <typename Rng>
  Index step_killed(Index x, Rng& rng) const {
    const double u = rng.uniform();
    const auto begin = row_start_[static_cast<std::size_t>(x)];
    const auto end = row_start_[static_cast<std::size_t>(x) + 1];
    for (auto k = begin; k < end; ++k)
      if (u < cumulative_[k]) return columns_[k];
    return -1;
  }

 private:
  void build_sampling_table() {
    const Index n = size();
    row_start_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (Index x = 0; x < n; ++x) {
      double acc = 0.0;
      for (Index y = 0; y < n; ++y) {
        if (entries_(x, y) > Scalar(0)) {
          acc += static_cast<double>(entries_(x, y));
          columns_.push_back(y);
          cumulative_.push_back(acc);
        }
      }
      row_start_[static_cast<std::size_t>(x) + 1] = columns_.size();
    }
  }

  Mat<Scalar> entries_;
  Vec<Scalar> exit_mass_;
  std::vector<std::size_t> row_start_;
  std::vector<Index> columns_;
  std::vector<double> cumulative_;
};

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct KernelCheck {
  std::string name;
  bool passed;
  std::string detail;
};

struct KernelReport {
  std::vector<KernelCheck> checks;
  bool irreducible = false;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

namespace detail {

template <typename Derived>
bool strongly_connected(const Eigen::MatrixBase<Derived>& m) {
  const Index n = m.rows();
  auto reaches_all = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Index> stack{0};
    seen[0] = 1;
    Index count = 1;
    while (!stack.empty()) {
      const Index u = stack.back();
      stack.pop_back();
      for (Index v = 0; v < n; ++v) {
        const auto w = transpose ? m(v, u) : m(u, v);
        if (w > 0 && !seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  return n > 0 && reaches_all(false) && reaches_all(true);
}

}  // namespace detail

/// Checks the sub-Markovian invariants of a raw matrix without throwing.
template <typename Derived>
KernelReport validate(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  constexpr Scalar tol = Scalar(1e-12);
  KernelReport report;
  const Index n = m.rows();
  const bool square = n > 0 && m.cols() == n;
  report.checks.push_back({"square", square, square ? "" : "matrix is not square"});
  if (!square) return report;

  bool in_range = true;
  for (Index x = 0; x < n; ++x)
    for (Index y = 0; y < n; ++y)
      if (!std::isfinite(m(x, y)) || m(x, y) < Scalar(0) || m(x, y) > Scalar(1)) in_range = false;
  report.checks.push_back({"entries in [0,1]", in_range, ""});

  bool rows_bounded = true;
  bool nonzero = true;
  Scalar max_exit(0);
  for (Index x = 0; x < n; ++x) {
    const Scalar row = m.row(x).sum();
    if (row > Scalar(1) + tol) rows_bounded = false;
    if (!(row > Scalar(0))) nonzero = false;
    max_exit = std::max(max_exit, Scalar(1) - row);
  }
  report.checks.push_back({"row sums <= 1", rows_bounded, ""});
  report.checks.push_back(
      {"nonzero measure", nonzero, nonzero ? "" : "some row of K carries no mass"});
  const bool strict = max_exit > Scalar(0);
  report.checks.push_back({"strictly sub-Markovian", strict,
                           strict ? "" : "every row sums to one; there is no exit mass"});
  report.irreducible = detail::strongly_connected(m);
  return report;
}

template <typename Scalar>
KernelReport validate(const SubMarkovKernel<Scalar>& kernel) {
  return validate(kernel.entries());
}

// ---------------------------------------------------------------------------
// Regenerative kernel K_alpha(x, y) = K(x, y) + exit(x) * alpha(y)
// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar k_alpha(const SubMarkovKernel<Scalar>& kernel, const Vec<Scalar>& alpha, Index x, Index y) {
  return kernel(x, y) + kernel.exit(x) * alpha[y];
}

template <typename Scalar>
Distribution<Scalar> k_alpha_row(const SubMarkovKernel<Scalar>& kernel,
                                 const Distribution<Scalar>& alpha, Index x) {
  if (x < 0 || x >= kernel.size()) throw std::out_of_range("k_alpha_row: state out of range");
  if (alpha.size() != kernel.size())
    throw std::invalid_argument("k_alpha_row: distribution size mismatch");
  Vec<Scalar> row = kernel.entries().row(x).transpose() + kernel.exit(x) * alpha.weights();
  return Distribution<Scalar>(std::move(row));
}

/// Dense N x N matrix of K_alpha.
template <typename Scalar>
Mat<Scalar> k_alpha_matrix(const SubMarkovKernel<Scalar>& kernel, const Vec<Scalar>& alpha) {
  return kernel.entries() + kernel.exit_mass() * alpha.transpose();
}

/// Two-stage draw from K_alpha(x, .): step the killed chain, and on absorption
/// redraw the state from alpha.
template <typename Scalar, typename Rng>
Index sample_transition(const SubMarkovKernel<Scalar>& kernel, const Distribution<Scalar>& alpha,
                        Index x, Rng& rng) {
  const Index y = kernel.step_killed(x, rng);
  if (y >= 0) return y;
  return sample_index(alpha.weights(), rng.uniform());
}

/// beta = alpha K_alpha, the law after one regenerative step from alpha.
template <typename Scalar>
Distribution<Scalar> one_step_distribution(const SubMarkovKernel<Scalar>& kernel,
                                           const Distribution<Scalar>& alpha) {
  const Vec<Scalar>& a = alpha.weights();
  const Scalar killed = a.dot(kernel.exit_mass());
  Vec<Scalar> beta = kernel.entries().transpose() * a + killed * a;
  return Distribution<Scalar>(std::move(beta));
}

}  // namespace qsd
