#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "qsd/bench.hpp"
#include "qsd/io.hpp"

using namespace qsd;
namespace fs = std::filesystem;

TEST(Io, FormatNumberRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.0}) EXPECT_EQ(std::stod(io::format_number(v)), v);
}

TEST(Io, KernelRoundTrip) {
  const auto k = mm1n_queue(6, [](int i) { return 0.5 + 0.1 * i; });
  std::stringstream ss;
  io::write_kernel(ss, k);
  const auto back = io::read_kernel(ss);
  EXPECT_EQ(back.entries(), k.entries());
}

TEST(Io, KernelFileErrors) {
  std::stringstream truncated("3\n0.1 0.2\n");
  EXPECT_THROW(io::read_kernel(truncated), std::runtime_error);
  std::stringstream bad_entries("2\n0.9 0.9\n0 0\n");
  EXPECT_THROW(io::read_kernel(bad_entries), std::invalid_argument);
  EXPECT_THROW(io::read_kernel_file("/nonexistent/kernel.txt"), std::runtime_error);
  std::stringstream raw("2\n0.9 0.9\n0 0\n");
  EXPECT_EQ(io::read_matrix(raw)(0, 1), 0.9);
}

TEST(Io, TraceRoundTripAndHeader) {
  Trace t{{1, 0.5, -0.01, std::nullopt}, {2, std::nullopt, std::nullopt, 3.25}};
  std::stringstream ss;
  io::write_trace(ss, t);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "iteration,l2_error,r_estimate,wall_ms");
  EXPECT_EQ(io::read_trace(ss), t);
}

TEST(Io, CheckpointRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "qsd_test_checkpoint";
  fs::remove_all(dir);
  const SoftmaxPolicy<double> p(Vec<double>{{0.1, -3.0, 1.0 / 7.0}});
  const ValueTable<double> v{Vec<double>{{0.0, 1.5, -2.25, 1e-300}}, -0.0123};
  io::write_checkpoint(dir, p, v);
  const auto [p2, v2] = io::read_checkpoint(dir);
  EXPECT_EQ(p2.theta, p.theta);
  EXPECT_EQ(v2.psi, v.psi);
  EXPECT_EQ(v2.r_estimate, v.r_estimate);
}
