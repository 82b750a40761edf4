#pragma once

// IEEE-754 binary16 conversion. Rounds straight from double with
// round-to-nearest-even so there is no double rounding through float.

#include <bit>
#include <cmath>
#include <cstdint>

namespace coconts {

inline std::uint16_t half_from_double(double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  const auto sign = static_cast<std::uint16_t>((bits >> 48) & 0x8000u);
  const int biased = static_cast<int>((bits >> 52) & 0x7ffu);
  const std::uint64_t fraction = bits & ((std::uint64_t{1} << 52) - 1);

  if (biased == 0x7ff) {
    return fraction != 0 ? static_cast<std::uint16_t>(sign | 0x7e00u)
                         : static_cast<std::uint16_t>(sign | 0x7c00u);
  }
  if (biased == 0) {
    // Zero or a double subnormal; both far below the smallest half subnormal.
    return sign;
  }

  const int exponent = biased - 1023;
  if (exponent > 15) {
    return static_cast<std::uint16_t>(sign | 0x7c00u);
  }
  const std::uint64_t significand = fraction | (std::uint64_t{1} << 52);

  // Rescale so the half's last mantissa bit has weight 1.
  const int quantum = exponent >= -14 ? exponent - 10 : -24;
  const int shift = quantum - (exponent - 52);
  if (shift > 53) {
    return sign;
  }
  std::uint64_t rounded = significand >> shift;
  const std::uint64_t remainder = significand & ((std::uint64_t{1} << shift) - 1);
  const std::uint64_t halfway = std::uint64_t{1} << (shift - 1);
  if (remainder > halfway || (remainder == halfway && (rounded & 1u) != 0)) {
    ++rounded;
  }

  std::uint32_t magnitude;
  if (exponent >= -14) {
    // A carry out of the mantissa bumps the exponent field by itself.
    magnitude = (static_cast<std::uint32_t>(exponent + 15) << 10) +
                static_cast<std::uint32_t>(rounded) - 1024u;
    if (magnitude >= 0x7c00u) {
      magnitude = 0x7c00u;
    }
  } else {
    // Subnormal; rounding up to 1024 lands exactly on the smallest normal.
    magnitude = static_cast<std::uint32_t>(rounded);
  }
  return static_cast<std::uint16_t>(sign | magnitude);
}

inline double half_to_double(std::uint16_t half) {
  const bool negative = (half & 0x8000u) != 0;
  const int field = (half >> 10) & 0x1f;
  const int mantissa = half & 0x3ff;
  double magnitude;
  if (field == 0) {
    magnitude = std::ldexp(static_cast<double>(mantissa), -24);
  } else if (field == 0x1f) {
    magnitude = mantissa == 0 ? HUGE_VAL : std::nan("");
  } else {
    magnitude = std::ldexp(static_cast<double>(mantissa | 0x400), field - 25);
  }
  return negative ? -magnitude : magnitude;
}

}  // namespace coconts
