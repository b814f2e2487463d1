#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "qsd/io.hpp"

namespace qsd::io {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr int kMaxPoints = 1500;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_loglog_svg(const std::filesystem::path& path, const std::string& title,
                      const std::vector<PlotSeries>& series) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (const auto& row : *s.trace) {
      if (!row.l2_error || *row.l2_error <= 0.0 || row.iteration <= 0) continue;
      const double lx = std::log10(static_cast<double>(row.iteration));
      const double ly = std::log10(*row.l2_error);
      xmin = std::min(xmin, lx);
      xmax = std::max(xmax, lx);
      ymin = std::min(ymin, ly);
      ymax = std::max(ymax, ly);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = -1, ymax = 0;
  xmin = std::floor(xmin), xmax = std::max(std::ceil(xmax), xmin + 1);
  ymin = std::floor(ymin), ymax = std::max(std::ceil(ymax), ymin + 1);

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double lx) { return kLeft + (lx - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double ly) { return kTop + (ymax - ly) / (ymax - ymin) * ph; };

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\">" << escape(title)
      << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double d = xmin; d <= xmax + 1e-9; d += 1.0) {
    out << "<line x1=\"" << fixed(px(d)) << "\" y1=\"" << kTop << "\" x2=\"" << fixed(px(d))
        << "\" y2=\"" << kTop + ph << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << fixed(px(d)) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\">1e" << static_cast<int>(d) << "</text>\n";
  }
  for (double d = ymin; d <= ymax + 1e-9; d += 1.0) {
    out << "<line x1=\"" << kLeft << "\" y1=\"" << fixed(py(d)) << "\" x2=\"" << kLeft + pw
        << "\" y2=\"" << fixed(py(d)) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(py(d) + 4)
        << "\" text-anchor=\"end\">1e" << static_cast<int>(d) << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">iteration</text>\n";
  out << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << kTop + ph / 2 << ")\">L2 error</text>\n";

  std::size_t k = 0;
  for (const auto& s : series) {
    const char* color = kColors[k % std::size(kColors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    const std::size_t n = s.trace->size();
    const std::size_t stride = n > kMaxPoints ? n / kMaxPoints : 1;
    double last_lx = -1e9;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = (*s.trace)[i];
      if (!row.l2_error || *row.l2_error <= 0.0 || row.iteration <= 0) continue;
      const double lx = std::log10(static_cast<double>(row.iteration));
      // Thin densely packed tail points but always keep the early decades.
      if (stride > 1 && i % stride != 0 && lx - last_lx < (xmax - xmin) / kMaxPoints) continue;
      last_lx = lx;
      out << fixed(px(lx)) << ',' << fixed(py(std::log10(*row.l2_error))) << ' ';
    }
    out << "\"/>\n";
    const double ly = kTop + 16 + 16.0 * static_cast<double>(k);
    out << "<line x1=\"" << kLeft + pw - 130 << "\" y1=\"" << ly - 4 << "\" x2=\""
        << kLeft + pw - 110 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kLeft + pw - 104 << "\" y=\"" << ly << "\">" << escape(s.label)
        << "</text>\n";
    ++k;
  }
  out << "</svg>\n";
}

}  // namespace qsd::io
