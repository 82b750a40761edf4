#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "coconts/approx.hpp"

namespace coconts {
namespace {

const std::vector<double> kFive{0.6, 0.3, 0.05, 0.025, 0.025};

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t vocab) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> d(vocab);
  double total = 0.0;
  for (auto& x : d) {
    // Some exact zeros and some ties keep the support and tie rules honest.
    const auto roll = rng() % 8;
    x = roll == 0 ? 0.0 : roll == 1 ? 0.5 : e(rng);
    total += x;
  }
  if (total == 0.0) {
    d[0] = total = 1.0;
  }
  for (auto& x : d) x /= total;
  return d;
}

TEST(Hyper, Validation) {
  EXPECT_NO_THROW((Hyper{256, 8, 8, 1.5}.validate()));
  EXPECT_THROW((Hyper{8, 8, 8, 1.5}.validate()), DomainError);
  EXPECT_THROW((Hyper{256, 0, 8, 1.5}.validate()), DomainError);
  EXPECT_THROW((Hyper{256, 8, 0, 1.5}.validate()), DomainError);
  EXPECT_THROW((Hyper{256, 8, 8, 1.0}.validate()), DomainError);
  EXPECT_DOUBLE_EQ((Hyper{256, 8, 8, 1.5}.storage_ratio()), 1.5);
}

TEST(Coefficients, WorkedValues) {
  const auto c = coefficients(0.9, 1.5);
  EXPECT_NEAR(c.u, 1.666667, 1e-6);
  EXPECT_NEAR(c.v, 0.925926, 1e-6);

  const auto full = coefficients(1.0, 1.5);
  EXPECT_EQ(full.v, 1.0);

  const auto half = coefficients(0.5, 1.5);
  EXPECT_DOUBLE_EQ(half.u, 1.0);
  EXPECT_DOUBLE_EQ(half.v, 1.0);
}

TEST(Coefficients, Errors) {
  EXPECT_THROW(coefficients(0.0, 1.5), EmptySupport);
  EXPECT_THROW(coefficients(-0.1, 1.5), EmptySupport);
  EXPECT_THROW(coefficients(1.1, 1.5), DomainError);
  EXPECT_THROW(coefficients(0.5, 1.0), DomainError);
  EXPECT_NO_THROW(coefficients(1.0 + 1e-13, 1.5));
}

TEST(Coefficients, IdentityAndRangeProperty) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    const double p = std::max(unit(rng), 1e-9);
    const double gamma = 1.0 + 1e-6 + 10.0 * unit(rng);
    const auto c = coefficients(p, gamma);
    ASSERT_NEAR(c.v * p + c.u * (1.0 - p), 1.0, 1e-12);
    ASSERT_GT(c.u, 0.0);
    if (p < 1.0) ASSERT_LT(c.u, 1.0 / (1.0 - p));
    ASSERT_GT(c.v, 0.0);
  }
}

TEST(Coefficients, LargeGammaApproachesRenormalizedTruncation) {
  for (double p : {0.1, 0.3, 0.5, 0.9, 1.0}) {
    const auto c = coefficients(p, 1e6);
    EXPECT_NEAR(c.u, 0.0, 1e-5);
    EXPECT_NEAR(c.v, 1.0 / p, 1e-5);
  }
}

TEST(AdjustedTarget, FiveTokenExample) {
  const TopR topr = top_r_of(kFive, 2);
  ASSERT_EQ(topr.ids, (std::vector<TokenId>{0, 1}));
  ASSERT_NEAR(topr.p, 0.9, 1e-15);

  const auto frequent = adjusted_target(topr, 0, 1.5);
  EXPECT_EQ(frequent.kind, TargetCase::InTopR);
  ASSERT_EQ(frequent.entries.size(), 2u);
  EXPECT_NEAR(frequent.weight(0), 0.555556, 1e-6);
  EXPECT_NEAR(frequent.weight(1), 0.277778, 1e-6);
  EXPECT_NEAR(frequent.total_weight(), coefficients(topr.p, 1.5).v * topr.p, 1e-9);

  const auto rare = adjusted_target(topr, 3, 1.5);
  EXPECT_EQ(rare.kind, TargetCase::Rare);
  ASSERT_EQ(rare.entries.size(), 3u);
  EXPECT_NEAR(rare.weight(0), 1.0, 1e-9);
  EXPECT_NEAR(rare.weight(1), 0.5, 1e-9);
  EXPECT_NEAR(rare.weight(3), 1.0, 1e-12);
  EXPECT_NEAR(rare.total_weight(), 2.5, 1e-9);
}

TEST(AdjustedTarget, FullSupportReproducesConditional) {
  const std::vector<double> d{0.5, 0.25, 0.0, 0.125, 0.125};
  const TopR topr = top_r_of(d, 4);
  ASSERT_EQ(topr.p, 1.0);
  for (TokenId w : {0u, 1u, 3u, 4u}) {
    const auto t = adjusted_target(topr, w, 1.5);
    for (const auto& [token, value] : t.entries) EXPECT_EQ(value, d[token]);
  }
}

TEST(AdjustedTarget, EmptyTopRIsEmptySupport) {
  EXPECT_THROW(adjusted_target(TopR{}, 0, 1.5), EmptySupport);
}

TEST(AdjustedTarget, SupportBoundProperty) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t vocab = 1 + rng() % 20;
    const auto d = random_distribution(rng, vocab);
    const std::size_t r = 1 + rng() % vocab;
    const TopR topr = top_r_of(d, r);
    const auto t = adjusted_target(topr, static_cast<TokenId>(rng() % vocab), 1.5);
    ASSERT_LE(t.entries.size(), r + 1);
    for (const auto& e : t.entries) ASSERT_GE(e.second, 0.0);
    const auto c = coefficients(topr.p, 1.5);
    const double expected = t.kind == TargetCase::InTopR ? c.v * topr.p : c.u * topr.p + 1.0;
    ASSERT_NEAR(t.total_weight(), expected, 1e-9);
  }
}

TEST(Expectation, FiveTokenExample) {
  const auto mean = expectation(top_r_of(kFive, 2), kFive, 1.5);
  for (std::size_t i = 0; i < kFive.size(); ++i) EXPECT_NEAR(mean[i], kFive[i], 1e-12);
}

TEST(Expectation, TwoPointDistribution) {
  const std::vector<double> d{0.7, 0.3};
  const auto mean = expectation(top_r_of(d, 1), d, 1.5);
  EXPECT_NEAR(mean[0], 0.7, 1e-9);
  EXPECT_NEAR(mean[1], 0.3, 1e-9);
}

TEST(Expectation, ConsistencyProperty) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; ++i) {
    const std::size_t vocab = 1 + rng() % 32;
    const auto d = random_distribution(rng, vocab);
    for (double gamma : {1.1, 1.5, 3.0}) {
      for (std::size_t r = 1; r <= vocab; ++r) {
        const auto mean = expectation(top_r_of(d, r), d, gamma);
        for (std::size_t w = 0; w < vocab; ++w) ASSERT_NEAR(mean[w], d[w], 1e-9);
      }
    }
  }
}

TEST(L1Diagnostics, WorkedValues) {
  const auto diag = l1_diagnostics(top_r_of(kFive, 2), 1.5);
  EXPECT_NEAR(diag.in_topr_distance, 0.166667, 1e-6);
  EXPECT_NEAR(diag.rare_bound, 0.5, 1e-9);

  const auto full = l1_diagnostics(top_r_of(std::vector<double>{0.5, 0.5}, 2), 1.5);
  EXPECT_EQ(full.in_topr_distance, 0.0);
}

TEST(L1Distance, InTopRMatchesClosedFormWhenUAtLeastOne) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t vocab = 2 + rng() % 20;
    const auto d = random_distribution(rng, vocab);
    const TopR topr = top_r_of(d, 1 + rng() % vocab);
    const double gamma = 1.5;
    const auto c = coefficients(topr.p, gamma);
    const double direct = l1_distance(adjusted_target(topr, topr.ids[0], gamma), d);
    const double tail = 1.0 - topr.p;
    if (c.u >= 1.0) {
      ASSERT_NEAR(direct, tail * c.u, 1e-9);
    } else {
      // v > 1 here, so the top-r entries overshoot instead of falling short.
      ASSERT_NEAR(direct, topr.p * std::abs(1.0 - c.v) + tail, 1e-9);
    }
  }
}

TEST(DenseTargets, ScatterAndErrors) {
  AdjustedTarget t;
  t.entries = {{0, 1.0}, {1, 0.5}, {3, 1.0}};
  const std::vector<AdjustedTarget> one{t};
  const auto dense = dense_targets(one, 5);
  EXPECT_EQ(std::vector<double>(dense.row(0).begin(), dense.row(0).end()),
            (std::vector<double>{1.0, 0.5, 0.0, 1.0, 0.0}));

  const std::vector<AdjustedTarget> empty_row{AdjustedTarget{}};
  const auto zeros = dense_targets(empty_row, 3);
  EXPECT_EQ(zeros.values, (std::vector<double>{0.0, 0.0, 0.0}));

  EXPECT_THROW(dense_targets(one, 3), DomainError);
}

TEST(DenseTargets, BatchMemoryArithmetic) {
  const auto bytes = dense_target_bytes(128, 8, 50257, 2);
  EXPECT_EQ(bytes, 102926336u);
  EXPECT_NEAR(static_cast<double>(bytes) / (1024.0 * 1024.0), 98.16, 0.01);
}

}  // namespace
}  // namespace coconts
