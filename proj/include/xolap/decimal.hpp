#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "xolap/error.hpp"

namespace xolap {

// Fixed-point decimal with twelve fractional digits. Sums of measures parsed
// from text are exact; only division (averages) rounds.
class Decimal {
 public:
  __extension__ using Units = __int128;
  static constexpr int kScale = 12;

  constexpr Decimal() = default;

  static constexpr Decimal from_integer(std::int64_t v) { return Decimal(Units(v) * pow10(kScale)); }

  static Decimal from_double(double v) {
    if (!std::isfinite(v)) throw NumericDomainError("measure is not finite");
    const long double scaled = static_cast<long double>(v) * 1e12L;
    if (std::fabs(scaled) > 1.0e36L) throw NumericDomainError("measure out of range");
    return Decimal(static_cast<Units>(std::roundl(scaled)));
  }

  // Accepts [+-]digits[.digits] with surrounding whitespace. Fractional digits
  // beyond the scale are rounded half away from zero.
  static std::optional<Decimal> parse(std::string_view text) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
    if (text.empty()) return std::nullopt;

    bool negative = false;
    if (text.front() == '+' || text.front() == '-') {
      negative = text.front() == '-';
      text.remove_prefix(1);
    }
    Units whole = 0;
    Units frac = 0;
    int frac_digits = 0;
    bool round_up = false;
    bool seen_digit = false;
    bool seen_point = false;
    const Units kLimit = pow10(26);
    for (char c : text) {
      if (c == '.') {
        if (seen_point) return std::nullopt;
        seen_point = true;
        continue;
      }
      if (c < '0' || c > '9') return std::nullopt;
      seen_digit = true;
      const int d = c - '0';
      if (!seen_point) {
        whole = whole * 10 + d;
        if (whole > kLimit) return std::nullopt;
      } else if (frac_digits < kScale) {
        frac = frac * 10 + d;
        ++frac_digits;
      } else if (frac_digits == kScale) {
        round_up = d >= 5;
        ++frac_digits;
      }
    }
    if (!seen_digit) return std::nullopt;
    for (int i = std::min(frac_digits, kScale); i < kScale; ++i) frac *= 10;
    Units units = whole * pow10(kScale) + frac + (round_up ? 1 : 0);
    return Decimal(negative ? -units : units);
  }

  constexpr Units units() const noexcept { return units_; }

  double to_double() const noexcept {
    return static_cast<double>(static_cast<long double>(units_) / 1e12L);
  }

  // Shortest plain rendering: "55", "27.5", "-0.25".
  std::string to_string() const {
    Units u = units_;
    const bool negative = u < 0;
    if (negative) u = -u;
    Units whole = u / pow10(kScale);
    Units frac = u % pow10(kScale);
    std::string digits;
    do {
      digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(whole % 10)));
      whole /= 10;
    } while (whole != 0);
    std::string out = negative ? "-" + digits : digits;
    if (frac != 0) {
      std::string f(kScale, '0');
      for (int i = kScale - 1; i >= 0; --i) {
        f[static_cast<std::size_t>(i)] = static_cast<char>('0' + static_cast<int>(frac % 10));
        frac /= 10;
      }
      while (!f.empty() && f.back() == '0') f.pop_back();
      out += "." + f;
    }
    return out;
  }

  friend Decimal operator+(Decimal a, Decimal b) {
    Units r;
    if (__builtin_add_overflow(a.units_, b.units_, &r)) throw NumericDomainError("decimal overflow");
    return Decimal(r);
  }

  friend Decimal operator-(Decimal a, Decimal b) {
    Units r;
    if (__builtin_sub_overflow(a.units_, b.units_, &r)) throw NumericDomainError("decimal overflow");
    return Decimal(r);
  }

  Decimal divided_by(std::uint64_t n) const {
    if (n == 0) throw NumericDomainError("division by zero");
    const Units d = static_cast<Units>(n);
    Units q = units_ / d;
    const Units r = units_ % d;
    if (2 * (r < 0 ? -r : r) >= d) q += units_ < 0 ? -1 : 1;
    return Decimal(q);
  }

  friend constexpr bool operator==(Decimal, Decimal) = default;
  friend constexpr std::strong_ordering operator<=>(Decimal a, Decimal b) {
    return a.units_ <=> b.units_;
  }

 private:
  constexpr explicit Decimal(Units u) : units_(u) {}

  static constexpr Units pow10(int n) {
    Units r = 1;
    for (int i = 0; i < n; ++i) r *= 10;
    return r;
  }

  Units units_ = 0;
};

}  // namespace xolap
