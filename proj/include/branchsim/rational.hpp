#ifndef BRANCHSIM_RATIONAL_HPP
#define BRANCHSIM_RATIONAL_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace branchsim {

/// Non-negative rational time point.  Configs carry times as rationals so
/// that floor(t * n) is computed in integer arithmetic and never flips across
/// a generation boundary from rounding.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
    if (d <= 0) throw std::invalid_argument("rational: denominator must be > 0");
    if (n < 0) throw std::invalid_argument("rational: must be non-negative");
  }

  double value() const {
    return static_cast<double>(num) / static_cast<double>(den);
  }

  /// floor(this * n), exactly.
  std::uint64_t floor_times(std::uint64_t n) const {
    const std::int64_t sn = static_cast<std::int64_t>(n);
    if (num != 0 && sn > (INT64_MAX / num)) {
      throw std::overflow_error("rational: floor_times overflow");
    }
    return static_cast<std::uint64_t>((num * sn) / den);
  }

  std::string str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
  }

  /// Parses "p", "p/q".
  static Rational parse(const std::string& text);
};

}  // namespace branchsim

#endif  // BRANCHSIM_RATIONAL_HPP
