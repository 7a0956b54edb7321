#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include <boost/rational.hpp>

#include "autoform/error.hpp"

namespace autoform {

/// Exact ratio for every reported percentage and effect. Doubles appear only
/// at the rendering edge and inside the bootstrap.
using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

inline Rational ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) throw ValidationError("ratio with zero denominator");
  return Rational(num, den);
}

/// 100 * num / den as an exact value in percentage points.
inline Rational percent(std::int64_t num, std::int64_t den) { return ratio(num, den) * 100; }

inline Rational abs(const Rational& r) { return r < 0 ? -r : r; }

/// Fixed-point rendering rounded half away from zero, done on the exact value.
inline std::string format_fixed(const Rational& r, int digits) {
  std::int64_t scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  const Rational scaled = abs(r) * scale;
  std::int64_t whole = scaled.numerator() / scaled.denominator();
  const Rational frac = scaled - whole;
  if (frac >= Rational(1, 2)) ++whole;
  std::string digits_str = std::to_string(whole);
  if (digits > 0) {
    if (static_cast<int>(digits_str.size()) <= digits) {
      digits_str.insert(0, static_cast<std::size_t>(digits + 1 - digits_str.size()), '0');
    }
    digits_str.insert(digits_str.size() - static_cast<std::size_t>(digits), ".");
  }
  const bool negative = r < 0 && whole != 0;
  return (negative ? "-" : "") + digits_str;
}

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Signed rendering with an explicit "+" for positives, as effect tables show.
inline std::string format_signed(const Rational& r, int digits) {
  std::string s = format_fixed(r, digits);
  if (s.front() != '-') s.insert(0, "+");
  return s;
}

}  // namespace autoform
