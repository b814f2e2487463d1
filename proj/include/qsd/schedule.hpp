#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace qsd {

/// Step-size schedule n -> eta_n for n >= 1.
///
///   const:<c>             eta_n = c
///   power:<p>             eta_n = n^-p
///   max-power:<p>:<floor> eta_n = max(n^-p, floor)
///   paper-loopy-01        max-power:0.1:0.2
class Schedule {
 public:
  enum class Kind { Constant, Power, MaxPower };

  static Schedule constant(double c) { return Schedule(Kind::Constant, c, 0.0); }
  static Schedule power(double exponent) { return Schedule(Kind::Power, exponent, 0.0); }
  static Schedule max_power(double exponent, double floor) {
    return Schedule(Kind::MaxPower, exponent, floor);
  }
  static Schedule loopy_01() { return max_power(0.1, 0.2); }

  double operator()(long n) const {
    const double t = static_cast<double>(std::max(n, 1L));
    switch (kind_) {
      case Kind::Constant:
        return a_;
      case Kind::Power:
        return std::pow(t, -a_);
      case Kind::MaxPower:
        return std::max(std::pow(t, -a_), b_);
    }
    return a_;
  }

  Kind kind() const noexcept { return kind_; }
  bool operator==(const Schedule&) const = default;

  std::string to_string() const {
    switch (kind_) {
      case Kind::Constant:
        return "const:" + format(a_);
      case Kind::Power:
        return "power:" + format(a_);
      case Kind::MaxPower:
        if (*this == loopy_01()) return "paper-loopy-01";
        return "max-power:" + format(a_) + ":" + format(b_);
    }
    return {};
  }

  static Schedule parse(std::string_view text) {
    if (text == "paper-loopy-01") return loopy_01();
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw std::invalid_argument(bad(text));
    const auto head = text.substr(0, colon);
    const auto rest = text.substr(colon + 1);
    Schedule s = [&] {
      if (head == "const") return constant(number(rest, text));
      if (head == "power") return power(number(rest, text));
      if (head == "max-power") {
        const auto c2 = rest.find(':');
        if (c2 == std::string_view::npos) throw std::invalid_argument(bad(text));
        return max_power(number(rest.substr(0, c2), text), number(rest.substr(c2 + 1), text));
      }
      throw std::invalid_argument(bad(text));
    }();
    if (s.kind_ == Kind::Constant && !(s.a_ > 0.0))
      throw std::invalid_argument("schedule: constant step must be positive");
    if (s.kind_ == Kind::MaxPower && !(s.b_ > 0.0))
      throw std::invalid_argument("schedule: floor must be positive");
    return s;
  }

  static std::string format(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  }

 private:
  Schedule(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}

  static std::string bad(std::string_view text) {
    return "schedule: cannot parse '" + std::string(text) + "'";
  }

  static double number(std::string_view s, std::string_view whole) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
      throw std::invalid_argument(bad(whole));
    return v;
  }

  Kind kind_;
  double a_;
  double b_;
};

}  // namespace qsd
