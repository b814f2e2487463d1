#include "qsd/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qsd::io {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("malformed number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Mat<double> read_matrix(std::istream& in) {
  long n = 0;
  if (!(in >> n) || n <= 0) throw std::runtime_error("kernel file: missing or invalid state count");
  Mat<double> m(n, n);
  for (long x = 0; x < n; ++x)
    for (long y = 0; y < n; ++y)
      if (!(in >> m(x, y)))
        throw std::runtime_error("kernel file: expected " + std::to_string(n * n) + " entries");
  return m;
}

Mat<double> read_matrix_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_matrix(in);
}

SubMarkovKernel<double> read_kernel(std::istream& in) { return SubMarkovKernel<double>(read_matrix(in)); }

SubMarkovKernel<double> read_kernel_file(const std::filesystem::path& path) {
  return SubMarkovKernel<double>(read_matrix_file(path));
}

void write_kernel(std::ostream& out, const SubMarkovKernel<double>& kernel) {
  const Index n = kernel.size();
  out << n << '\n';
  for (Index x = 0; x < n; ++x) {
    for (Index y = 0; y < n; ++y) out << (y ? " " : "") << format_number(kernel(x, y));
    out << '\n';
  }
}

void write_trace(std::ostream& out, const Trace& trace) {
  out << kTraceHeader << '\n';
  for (const auto& row : trace)
    out << row.iteration << ',' << optional_cell(row.l2_error) << ','
        << optional_cell(row.r_estimate) << ',' << optional_cell(row.wall_ms) << '\n';
}

void write_trace_file(const std::filesystem::path& path, const Trace& trace) {
  auto out = open_out(path);
  write_trace(out, trace);
}

Trace read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw std::runtime_error("trace: missing header");
  Trace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 4) throw std::runtime_error("trace: expected 4 columns");
    TraceRow row;
    row.iteration = std::stol(cells[0]);
    if (!cells[1].empty()) row.l2_error = parse_double(cells[1]);
    if (!cells[2].empty()) row.r_estimate = parse_double(cells[2]);
    if (!cells[3].empty()) row.wall_ms = parse_double(cells[3]);
    trace.push_back(row);
  }
  return trace;
}

void write_vector(std::ostream& out, const Vec<double>& v) {
  out << "index,value\n";
  for (Index i = 0; i < v.size(); ++i) out << i << ',' << format_number(v[i]) << '\n';
}

Vec<double> read_vector(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "index,value")
    throw std::runtime_error("vector csv: missing header");
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 2) throw std::runtime_error("vector csv: expected 2 columns");
    if (cells[0] == "r") break;
    if (std::stol(cells[0]) != static_cast<long>(values.size()))
      throw std::runtime_error("vector csv: indices out of order");
    values.push_back(parse_double(cells[1]));
  }
  return Eigen::Map<Vec<double>>(values.data(), static_cast<Index>(values.size()));
}

void write_checkpoint(const std::filesystem::path& dir, const SoftmaxPolicy<double>& policy,
                      const ValueTable<double>& values) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "theta.csv");
    write_vector(out, policy.theta);
  }
  auto out = open_out(dir / "values.csv");
  write_vector(out, values.psi);
  out << "r," << format_number(values.r_estimate) << '\n';
}

std::pair<SoftmaxPolicy<double>, ValueTable<double>> read_checkpoint(
    const std::filesystem::path& dir) {
  auto theta_in = open_in(dir / "theta.csv");
  SoftmaxPolicy<double> policy(read_vector(theta_in));
  auto values_in = open_in(dir / "values.csv");
  ValueTable<double> values;
  values.psi = read_vector(values_in);
  // read_vector stops after consuming the `r,` row; re-scan for it.
  values_in.clear();
  values_in.seekg(0);
  std::string line;
  bool found = false;
  while (std::getline(values_in, line)) {
    if (line.rfind("r,", 0) == 0) {
      values.r_estimate = parse_double(line.substr(2));
      found = true;
    }
  }
  if (!found) throw std::runtime_error("checkpoint: values.csv has no r row");
  if (values.psi.size() != policy.n_states())
    throw std::runtime_error("checkpoint: theta and psi sizes disagree");
  return {std::move(policy), std::move(values)};
}

}  // namespace qsd::io
