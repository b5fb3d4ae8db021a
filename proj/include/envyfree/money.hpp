// Copyright 2026 The envyfree Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ENVYFREE_MONEY_HPP
#define ENVYFREE_MONEY_HPP

#include <compare>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/rational.hpp>

namespace envyfree {

using Rational = boost::rational<std::int64_t>;

// An amount of money counted in integer multiples of the market's base unit.
// All prices, budgets, valuations, revenues and welfare values are Money; the
// base unit itself only matters when converting to and from decimal text.
struct Money {
  std::int64_t ticks = 0;

  constexpr Money() = default;
  constexpr explicit Money(std::int64_t t) : ticks(t) {}

  constexpr auto operator<=>(const Money&) const = default;

  constexpr Money& operator+=(Money o) {
    ticks += o.ticks;
    return *this;
  }
  constexpr Money& operator-=(Money o) {
    ticks -= o.ticks;
    return *this;
  }
  friend constexpr Money operator+(Money a, Money b) { return Money{a.ticks + b.ticks}; }
  friend constexpr Money operator-(Money a, Money b) { return Money{a.ticks - b.ticks}; }
  friend constexpr Money operator-(Money a) { return Money{-a.ticks}; }
  friend constexpr Money operator*(Money a, std::int64_t k) { return Money{a.ticks * k}; }
  friend constexpr Money operator*(std::int64_t k, Money a) { return Money{a.ticks * k}; }

  constexpr bool is_positive() const { return ticks > 0; }
  constexpr bool is_zero() const { return ticks == 0; }
};

// Utility value with a distinguished bottom element (an unaffordable bundle).
// Bottom compares below every finite amount and equal to itself.
class Utility {
 public:
  constexpr Utility() = default;
  constexpr explicit Utility(Money m) : value_(m), bottom_(false) {}
  static constexpr Utility bottom() {
    Utility u;
    u.bottom_ = true;
    return u;
  }

  constexpr bool is_bottom() const { return bottom_; }
  constexpr Money value() const {
    if (bottom_) throw std::logic_error("Utility::value on bottom");
    return value_;
  }

  constexpr std::strong_ordering operator<=>(const Utility& o) const {
    if (bottom_ || o.bottom_) return o.bottom_ <=> bottom_;
    return value_ <=> o.value_;
  }
  constexpr bool operator==(const Utility& o) const { return (*this <=> o) == 0; }

 private:
  Money value_{};
  bool bottom_ = false;
};

namespace detail {

inline std::int64_t checked_pow10(int digits) {
  std::int64_t p = 1;
  for (int i = 0; i < digits; ++i) {
    if (p > INT64_MAX / 10) throw std::invalid_argument("too many decimal digits");
    p *= 10;
  }
  return p;
}

inline bool only_two_and_five(std::int64_t d) {
  while (d % 2 == 0) d /= 2;
  while (d % 5 == 0) d /= 5;
  return d == 1;
}

}  // namespace detail

// Parses "12", "-0.25", "1.10" or "3/4" into an exact rational.
inline Rational parse_rational(std::string_view text) {
  auto fail = [&] { throw std::invalid_argument("not an exact decimal or fraction: '" + std::string(text) + "'"); };
  if (text.empty()) fail();
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(text.substr(0, slash));
    Rational den = parse_rational(text.substr(slash + 1));
    if (num.denominator() != 1 || den.denominator() != 1 || den.numerator() == 0) fail();
    return num / den;
  }
  bool negative = false;
  std::size_t pos = 0;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    pos = 1;
  }
  std::int64_t whole = 0;
  std::int64_t frac = 0;
  int frac_digits = 0;
  bool seen_digit = false;
  bool in_frac = false;
  for (; pos < text.size(); ++pos) {
    char c = text[pos];
    if (c == '.') {
      if (in_frac) fail();
      in_frac = true;
      continue;
    }
    if (c < '0' || c > '9') fail();
    seen_digit = true;
    if (in_frac) {
      if (frac > INT64_MAX / 10) fail();
      frac = frac * 10 + (c - '0');
      ++frac_digits;
    } else {
      if (whole > INT64_MAX / 10) fail();
      whole = whole * 10 + (c - '0');
    }
  }
  if (!seen_digit) fail();
  Rational r = Rational(whole) + Rational(frac, detail::checked_pow10(frac_digits));
  return negative ? -r : r;
}

// Exact text form: a terminating decimal when one exists, otherwise "p/q".
inline std::string format_rational(const Rational& r) {
  std::int64_t num = r.numerator();
  std::int64_t den = r.denominator();
  if (!detail::only_two_and_five(den)) return std::to_string(num) + "/" + std::to_string(den);
  std::string sign = num < 0 ? "-" : "";
  std::int64_t a = num < 0 ? -num : num;
  std::string out = sign + std::to_string(a / den);
  std::int64_t rem = a % den;
  if (rem == 0) return out;
  out += '.';
  while (rem != 0) {
    rem *= 10;
    out += static_cast<char>('0' + rem / den);
    rem %= den;
  }
  return out;
}

}  // namespace envyfree

#endif  // ENVYFREE_MONEY_HPP
