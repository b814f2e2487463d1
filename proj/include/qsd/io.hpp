#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qsd/kernel.hpp"
#include "qsd/policy.hpp"
#include "qsd/trace.hpp"

namespace qsd::io {

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

/// Plain-text kernel: first line N, then N rows of N probabilities.
SubMarkovKernel<double> read_kernel(std::istream& in);
/// Same format without the kernel checks, for diagnostics.
Mat<double> read_matrix(std::istream& in);
Mat<double> read_matrix_file(const std::filesystem::path& path);
SubMarkovKernel<double> read_kernel_file(const std::filesystem::path& path);
void write_kernel(std::ostream& out, const SubMarkovKernel<double>& kernel);

inline constexpr const char* kTraceHeader = "iteration,l2_error,r_estimate,wall_ms";

void write_trace(std::ostream& out, const Trace& trace);
void write_trace_file(const std::filesystem::path& path, const Trace& trace);
Trace read_trace(std::istream& in);

/// `index,value` rows.
void write_vector(std::ostream& out, const Vec<double>& v);
Vec<double> read_vector(std::istream& in);

/// Policy/value checkpoint: theta.csv and values.csv (psi rows followed by
/// an `r,<estimate>` row) inside `dir`.
void write_checkpoint(const std::filesystem::path& dir, const SoftmaxPolicy<double>& policy,
                      const ValueTable<double>& values);
std::pair<SoftmaxPolicy<double>, ValueTable<double>> read_checkpoint(
    const std::filesystem::path& dir);

/// Log-log plot of l2_error against iteration, one polyline per series.
struct PlotSeries {
  std::string label;
  const Trace* trace;
};
void write_loglog_svg(const std::filesystem::path& path, const std::string& title,
                      const std::vector<PlotSeries>& series);

}  // namespace qsd::io
