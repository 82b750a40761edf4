#pragma once

// Brute-force next-token statistics by scanning every window, used to certify
// the trie. Counting stays in integers; comparisons are exact rationals.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coconts/corpus.hpp"
#include "coconts/error.hpp"
#include "coconts/trie.hpp"

namespace coconts {

struct ExactDistribution {
  std::uint64_t denominator = 0;
  std::map<TokenId, std::uint64_t> numerators;

  std::vector<double> dense(std::size_t vocab_size) const {
    std::vector<double> out(vocab_size, 0.0);
    for (const auto& [token, n] : numerators) {
      out.at(token) = static_cast<double>(n) / static_cast<double>(denominator);
    }
    return out;
  }
};

// Occurrence counts over the same (k+1)-windows the trie is built from;
// denominator 0 when the prefix never starts a window.
inline ExactDistribution brute_counts(std::span<const TokenId> tokens,
                                      std::optional<TokenId> separator,
                                      std::span<const TokenId> prefix, std::size_t k) {
  if (prefix.empty() || prefix.size() > k) {
    throw DomainError("prefix length outside [1, k]");
  }
  ExactDistribution out;
  for (const Window& w : WindowRange(tokens, k + 1, separator)) {
    if (std::equal(prefix.begin(), prefix.end(), w.tokens.begin())) {
      ++out.denominator;
      ++out.numerators[w.tokens[prefix.size()]];
    }
  }
  return out;
}

inline ExactDistribution brute_conditional(std::span<const TokenId> tokens,
                                           std::optional<TokenId> separator,
                                           std::span<const TokenId> prefix, std::size_t k) {
  auto out = brute_counts(tokens, separator, prefix, k);
  if (out.denominator == 0) {
    throw UnseenPrefix("prefix " + format_prefix(prefix) + " never starts a window");
  }
  return out;
}

inline ExactDistribution brute_conditional(const Corpus& corpus,
                                           std::span<const TokenId> prefix, std::size_t k) {
  return brute_conditional(corpus.view(), corpus.meta.doc_separator, prefix, k);
}

struct OracleMismatch {
  std::vector<TokenId> prefix;
  std::string trie_value;
  std::string oracle_value;
};

struct OracleReport {
  std::size_t prefixes_checked = 0;
  std::vector<OracleMismatch> mismatches;

  bool ok() const { return mismatches.empty(); }
};

inline nlohmann::json to_json(const OracleReport& report) {
  nlohmann::json j;
  j["prefixes_checked"] = report.prefixes_checked;
  j["ok"] = report.ok();
  j["mismatches"] = nlohmann::json::array();
  for (const auto& m : report.mismatches) {
    j["mismatches"].push_back(
        {{"prefix", m.prefix}, {"trie", m.trie_value}, {"oracle", m.oracle_value}});
  }
  return j;
}

inline std::string to_text(const OracleReport& report) {
  std::string out = "prefixes checked: " + std::to_string(report.prefixes_checked) +
                    "\nmismatches: " + std::to_string(report.mismatches.size()) + "\n";
  for (const auto& m : report.mismatches) {
    out += "  prefix " + format_prefix(m.prefix) + ": trie " + m.trie_value + " oracle " +
           m.oracle_value + "\n";
  }
  return out;
}

namespace detail {

inline std::string describe(const std::optional<ConditionalCounts>& c) {
  if (!c) return "unseen";
  std::string out = "{";
  for (std::size_t i = 0; i < c->continuations.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(c->continuations[i].first) + ":" +
           std::to_string(c->continuations[i].second) + "/" + std::to_string(c->denominator);
  }
  return out + "}";
}

inline std::string describe(const ExactDistribution& d) {
  if (d.denominator == 0) return "unseen";
  std::string out = "{";
  bool first = true;
  for (const auto& [token, n] : d.numerators) {
    if (!first) out += ", ";
    first = false;
    out += std::to_string(token) + ":" + std::to_string(n) + "/" + std::to_string(d.denominator);
  }
  return out + "}";
}

inline bool same_rational(std::uint64_t n1, std::uint64_t d1, std::uint64_t n2,
                          std::uint64_t d2) {
  return static_cast<unsigned __int128>(n1) * d2 == static_cast<unsigned __int128>(n2) * d1;
}

inline void collect_trie_prefixes(const TrieNode& node, std::vector<TokenId>& path,
                                  std::size_t k, std::set<std::vector<TokenId>>& out) {
  for (const auto& [token, child] : node.children) {
    path.push_back(token);
    if (path.size() <= k) {
      out.insert(path);
      collect_trie_prefixes(*child, path, k, out);
    }
    path.pop_back();
  }
}

}  // namespace detail

// Compares trie conditionals with brute-force counts on every prefix that
// either side knows about, or on a deterministic sample of max_prefixes.
inline OracleReport compare_all(const PrefixTrie& trie, std::span<const TokenId> tokens,
                                std::optional<TokenId> separator, std::size_t k,
                                std::size_t max_prefixes = SIZE_MAX) {
  std::set<std::vector<TokenId>> prefixes;
  for (const Window& w : WindowRange(tokens, k + 1, separator)) {
    for (std::size_t m = 1; m <= k; ++m) {
      prefixes.emplace(w.tokens.begin(), w.tokens.begin() + static_cast<std::ptrdiff_t>(m));
    }
  }
  std::vector<TokenId> path;
  detail::collect_trie_prefixes(trie.root(), path, k, prefixes);

  std::vector<std::vector<TokenId>> chosen(prefixes.begin(), prefixes.end());
  if (chosen.size() > max_prefixes) {
    std::mt19937_64 rng(0);
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(max_prefixes);
    std::sort(chosen.begin(), chosen.end());
  }

  OracleReport report;
  for (const auto& prefix : chosen) {
    ++report.prefixes_checked;
    const ExactDistribution oracle = brute_counts(tokens, separator, prefix, k);
    std::optional<ConditionalCounts> live;
    try {
      live = trie.conditional_counts(prefix);
    } catch (const UnseenPrefix&) {
    }

    bool equal = (oracle.denominator == 0) == !live.has_value();
    if (equal && live) {
      equal = live->continuations.size() == oracle.numerators.size();
      auto it = oracle.numerators.begin();
      for (std::size_t i = 0; equal && i < live->continuations.size(); ++i, ++it) {
        const auto& [token, n] = live->continuations[i];
        equal = token == it->first &&
                detail::same_rational(n, live->denominator, it->second, oracle.denominator);
      }
    }
    if (!equal) {
      report.mismatches.push_back({prefix, detail::describe(live), detail::describe(oracle)});
    }
  }
  return report;
}

inline OracleReport compare_all(const PrefixTrie& trie, const Corpus& corpus, std::size_t k,
                                std::size_t max_prefixes = SIZE_MAX) {
  return compare_all(trie, corpus.view(), corpus.meta.doc_separator, k, max_prefixes);
}

}  // namespace coconts
