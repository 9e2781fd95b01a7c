#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace heb {

/// Exact token arithmetic. Used when conservation checks must hold bit-for-bit.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

namespace detail {

/// Parses a decimal literal ("0.3", "-12", "1e9", "2.5E-3") into numerator/denominator
/// without going through binary floating point.
inline Rational parse_decimal(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty number");
  std::size_t pos = 0;
  bool negative = false;
  if (text[pos] == '+' || text[pos] == '-') {
    negative = text[pos] == '-';
    ++pos;
  }
  BigInt digits = 0;
  long long scale = 0;
  bool any_digit = false;
  bool seen_point = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c >= '0' && c <= '9') {
      digits = digits * 10 + (c - '0');
      if (seen_point) --scale;
      any_digit = true;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!any_digit) throw std::invalid_argument("not a number: " + std::string(text));
  if (pos < text.size()) {
    if (text[pos] != 'e' && text[pos] != 'E') throw std::invalid_argument("not a number: " + std::string(text));
    ++pos;
    bool exp_negative = false;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
      exp_negative = text[pos] == '-';
      ++pos;
    }
    if (pos == text.size()) throw std::invalid_argument("not a number: " + std::string(text));
    long long exponent = 0;
    for (; pos < text.size(); ++pos) {
      const char c = text[pos];
      if (c < '0' || c > '9') throw std::invalid_argument("not a number: " + std::string(text));
      exponent = exponent * 10 + (c - '0');
      if (exponent > 4000) throw std::invalid_argument("exponent out of range: " + std::string(text));
    }
    scale += exp_negative ? -exponent : exponent;
  }
  BigInt power = 1;
  for (long long i = 0; i < (scale < 0 ? -scale : scale); ++i) power *= 10;
  Rational value = scale >= 0 ? Rational(digits * power) : Rational(digits, power);
  return negative ? Rational(-value) : value;
}

}  // namespace detail

template <class T>
struct NumTraits;

template <>
struct NumTraits<double> {
  static constexpr bool exact = false;
  static double to_double(double v) { return v; }
  static double from_decimal(std::string_view s) { return std::stod(std::string(s)); }
  static double from_int(long long v) { return static_cast<double>(v); }
  /// floor() with a tolerance so that e.g. 0.1*3/0.1 counts as 3 rather than 2.
  static long long floor_count(double v) { return static_cast<long long>(std::floor(v + 1e-9)); }
  static std::string to_string(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
};

template <>
struct NumTraits<Rational> {
  static constexpr bool exact = true;
  static double to_double(const Rational& v) { return v.convert_to<double>(); }
  static Rational from_decimal(std::string_view s) { return detail::parse_decimal(s); }
  static Rational from_int(long long v) { return Rational(v); }
  static long long floor_count(const Rational& v) {
    BigInt q = boost::multiprecision::numerator(v) / boost::multiprecision::denominator(v);
    if (v < 0 && Rational(q) != v) q -= 1;
    return q.convert_to<long long>();
  }
  static std::string to_string(const Rational& v) { return v.str(); }
};

template <class Num>
double to_double(const Num& v) {
  return NumTraits<Num>::to_double(v);
}

template <class Num>
Num from_decimal(std::string_view s) {
  return NumTraits<Num>::from_decimal(s);
}

template <class Num>
Num from_int(long long v) {
  return NumTraits<Num>::from_int(v);
}

template <class Num>
long long floor_count(const Num& v) {
  return NumTraits<Num>::floor_count(v);
}

}  // namespace heb
