#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qsd/kernel.hpp"

namespace qsd {

/// One recorded iteration of a learning run.
struct TraceRow {
  long iteration = 0;
  std::optional<double> l2_error;
  std::optional<double> r_estimate;
  std::optional<double> wall_ms;

  bool operator==(const TraceRow&) const = default;
};

using Trace = std::vector<TraceRow>;

/// First iteration at which the error dropped to the stop threshold.
struct ThresholdHit {
  long iteration = 0;
  double wall_seconds = 0.0;
};

/// Recording and stopping controls shared by all learning drivers.
struct RunOptions {
  std::optional<Vec<double>> reference;  // alpha*, enables l2_error
  long record_every = 1;
  bool timing = false;                    // fill wall_ms (not reproducible)
  std::optional<double> threshold;        // report first l2_error <= this
  bool stop_at_threshold = false;
  std::optional<double> max_wall_seconds; // stop once elapsed exceeds this
};

template <typename DerivedA, typename DerivedB>
double l2_error(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("l2_error: length mismatch");
  return static_cast<double>((a - b).norm());
}

template <typename Scalar>
double l2_error(const Distribution<Scalar>& a, const Distribution<Scalar>& b) {
  return l2_error(a.weights(), b.weights());
}

namespace detail {

/// Bookkeeping for RunOptions inside a driver loop.
class RunRecorder {
 public:
  using Clock = std::chrono::steady_clock;

  explicit RunRecorder(const RunOptions& opts) : opts_(opts), start_(Clock::now()) {}

  double elapsed_seconds() const {
    return std::chrono::duration<double>(Clock::now() - start_).count();
  }

  /// Records iteration `it` (1-based) and returns true when the run should stop.
  template <typename Derived>
  bool record(Trace& trace, long it, bool last, const Eigen::MatrixBase<Derived>& alpha,
              std::optional<double> r_estimate) {
    std::optional<double> err;
    if (opts_.reference) err = l2_error(alpha.template cast<double>(), *opts_.reference);
    const bool hit_now = err && opts_.threshold && *err <= *opts_.threshold;
    if (hit_now && !hit_) hit_ = ThresholdHit{it, elapsed_seconds()};
    const bool out_of_time = opts_.max_wall_seconds && elapsed_seconds() > *opts_.max_wall_seconds;
    const bool stop = (hit_now && opts_.stop_at_threshold) || out_of_time;
    if (last || stop || opts_.record_every <= 1 || it % opts_.record_every == 0) {
      TraceRow row{it, err, r_estimate, std::nullopt};
      if (opts_.timing) row.wall_ms = elapsed_seconds() * 1e3;
      trace.push_back(row);
    }
    return stop;
  }

  std::optional<ThresholdHit> hit() const { return hit_; }

 private:
  const RunOptions& opts_;
  Clock::time_point start_;
  std::optional<ThresholdHit> hit_;
};

}  // namespace detail

}  // namespace qsd
