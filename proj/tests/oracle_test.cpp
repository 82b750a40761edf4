#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "coconts/oracle.hpp"
#include "test_util.hpp"

namespace coconts {
namespace {

using P = std::vector<TokenId>;

TEST(BruteConditional, SmallCorpus) {
  const auto corpus = testing::make_corpus({0, 1, 0, 1, 0, 2}, 3);
  const auto d = brute_conditional(corpus, P{0}, 1);
  EXPECT_EQ(d.denominator, 3u);
  EXPECT_EQ(d.numerators.at(1), 2u);
  EXPECT_EQ(d.numerators.at(2), 1u);
  const auto dense = d.dense(3);
  EXPECT_DOUBLE_EQ(dense[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(dense[2], 1.0 / 3.0);

  EXPECT_THROW(brute_conditional(corpus, P{2}, 1), UnseenPrefix);
  EXPECT_THROW(brute_conditional(corpus, P{0, 1}, 1), DomainError);
}

TEST(BruteConditional, SingleWindowIsOneHot) {
  const auto corpus = testing::make_corpus({4, 2, 7}, 8);
  const auto d = brute_conditional(corpus, P{4, 2}, 2);
  EXPECT_EQ(d.denominator, 1u);
  EXPECT_EQ(d.numerators.size(), 1u);
  EXPECT_EQ(d.numerators.at(7), 1u);
}

TEST(CompareAll, RandomTriesHaveNoMismatches) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::uint32_t vocab = 2 + rng() % 30;
    const std::size_t k = 1 + rng() % 4;
    auto corpus = testing::make_corpus(testing::random_tokens(rng, 200 + rng() % 1500, vocab), vocab);
    if (trial % 3 == 0) corpus.meta.doc_separator = 0;
    const auto trie = build_trie(corpus, k);
    const auto report = compare_all(trie, corpus, k);
    ASSERT_TRUE(report.ok()) << to_text(report);
    ASSERT_GT(report.prefixes_checked, 0u);
  }
}

TEST(CompareAll, CorruptedCountIsReported) {
  std::mt19937_64 rng(18);
  const auto corpus = testing::make_corpus(testing::random_tokens(rng, 500, 5), 5);
  auto trie = build_trie(corpus, 2);
  const P prefix{corpus.tokens[0], corpus.tokens[1]};
  trie.mutable_node(prefix)->count += 1;
  const auto report = compare_all(trie, corpus, 2);
  ASSERT_FALSE(report.ok());
  bool found = false;
  for (const auto& m : report.mismatches) found = found || m.prefix == prefix;
  EXPECT_TRUE(found);
  EXPECT_EQ(to_json(report)["ok"], false);
}

TEST(CompareAll, ExtraTriePrefixIsReported) {
  const auto corpus = testing::make_corpus({0, 1, 0, 1, 0, 2}, 3);
  auto trie = build_trie(corpus, 1);
  trie.insert_window(P{2, 2});
  const auto report = compare_all(trie, corpus, 1);
  EXPECT_FALSE(report.ok());
}

TEST(CompareAll, EmptyCorpusChecksNothing) {
  const auto corpus = testing::make_corpus({}, 3);
  const auto report = compare_all(build_trie(corpus, 2), corpus, 2);
  EXPECT_EQ(report.prefixes_checked, 0u);
  EXPECT_TRUE(report.ok());
}

TEST(CompareAll, SamplingCapsWork) {
  std::mt19937_64 rng(19);
  const auto corpus = testing::make_corpus(testing::random_tokens(rng, 3000, 20), 20);
  const auto trie = build_trie(corpus, 3);
  const auto a = compare_all(trie, corpus, 3, 50);
  const auto b = compare_all(trie, corpus, 3, 50);
  EXPECT_EQ(a.prefixes_checked, 50u);
  EXPECT_TRUE(a.ok());
  EXPECT_EQ(to_json(a), to_json(b));
}

}  // namespace
}  // namespace coconts
