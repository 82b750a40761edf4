#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "coconts/half.hpp"

namespace coconts {
namespace {

// Every finite non-negative half, ascending in both bit pattern and value.
std::vector<double> all_positive_halves() {
  std::vector<double> values;
  for (unsigned bits = 0; bits < 0x7c00u; ++bits) {
    values.push_back(half_to_double(static_cast<std::uint16_t>(bits)));
  }
  return values;
}

// Nearest half by exhaustive search; ties go to the even bit pattern.
std::uint16_t nearest_half(double x, const std::vector<double>& table) {
  auto it = std::lower_bound(table.begin(), table.end(), x);
  if (it == table.end()) {
    const double top = table.back();
    const double next = std::ldexp(1.0, 16);  // where an unbounded exponent would land
    return x - top < next - x ? 0x7bffu : 0x7c00u;  // the tie goes to even infinity
  }
  const auto hi = static_cast<std::uint16_t>(it - table.begin());
  if (*it == x || hi == 0) return hi;
  const auto lo = static_cast<std::uint16_t>(hi - 1);
  const double dlo = x - table[lo];
  const double dhi = table[hi] - x;
  if (dlo < dhi) return lo;
  if (dhi < dlo) return hi;
  return (lo % 2 == 0) ? lo : hi;
}

TEST(Half, DecodeEncodeIsIdentityOnAllFiniteHalves) {
  for (unsigned bits = 0; bits < 0x10000u; ++bits) {
    const auto h = static_cast<std::uint16_t>(bits);
    if ((h & 0x7c00u) == 0x7c00u) continue;
    EXPECT_EQ(half_from_double(half_to_double(h)), h) << bits;
  }
}

TEST(Half, MidpointsRoundToEven) {
  const auto table = all_positive_halves();
  for (std::size_t i = 0; i + 1 < table.size(); ++i) {
    const double mid = 0.5 * (table[i] + table[i + 1]);
    const auto expected = static_cast<std::uint16_t>(i % 2 == 0 ? i : i + 1);
    ASSERT_EQ(half_from_double(mid), expected) << i;
  }
}

TEST(Half, MatchesExhaustiveNearestSearch) {
  const auto table = all_positive_halves();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> exponent(-30, 15);
  for (int i = 0; i < 200000; ++i) {
    const double x = std::ldexp(unit(rng), exponent(rng));
    ASSERT_EQ(half_from_double(x), nearest_half(x, table)) << x;
  }
}

TEST(Half, RelativeErrorBoundForProbabilities) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    const double p = std::ldexp(unit(rng), -static_cast<int>(rng() % 14));
    if (p < std::ldexp(1.0, -14)) continue;  // normal range only
    const double q = half_to_double(half_from_double(p));
    ASSERT_LE(std::abs(q - p), std::ldexp(1.0, -11) * p) << p;
  }
}

TEST(Half, SpecialValues) {
  EXPECT_EQ(half_from_double(0.0), 0x0000u);
  EXPECT_EQ(half_from_double(-0.0), 0x8000u);
  EXPECT_EQ(half_from_double(1.0), 0x3c00u);
  EXPECT_EQ(half_from_double(-2.0), 0xc000u);
  EXPECT_EQ(half_from_double(65504.0), 0x7bffu);
  EXPECT_EQ(half_from_double(1e6), 0x7c00u);
  EXPECT_EQ(half_from_double(INFINITY), 0x7c00u);
  EXPECT_TRUE(std::isnan(half_to_double(half_from_double(NAN))));
  EXPECT_EQ(half_from_double(std::ldexp(1.0, -24)), 0x0001u);
  EXPECT_EQ(half_from_double(std::ldexp(1.0, -25)), 0x0000u);  // tie to even zero
  EXPECT_EQ(half_from_double(std::ldexp(1.5, -25)), 0x0001u);
  EXPECT_EQ(half_from_double(1e-300), 0x0000u);
}

}  // namespace
}  // namespace coconts
