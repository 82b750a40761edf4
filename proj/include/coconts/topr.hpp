#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "coconts/corpus.hpp"
#include "coconts/error.hpp"

namespace coconts {

// Truncated next-token distribution: at most r (token, probability) pairs,
// descending by probability with ties broken by ascending token id. Not
// renormalized; p is the mass the pairs cover.
struct TopR {
  std::vector<TokenId> ids;
  std::vector<double> probs;
  double p = 0.0;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }

  bool contains(TokenId token) const {
    return std::find(ids.begin(), ids.end(), token) != ids.end();
  }

  bool operator==(const TopR&) const = default;
};

// Orders (token, weight) candidates by descending weight, then ascending id,
// and keeps the first r. `weight` only has to be comparable.
template <typename Weight>
std::vector<std::pair<TokenId, Weight>> select_top(
    std::vector<std::pair<TokenId, Weight>> candidates, std::size_t r) {
  const auto better = [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  if (candidates.size() > r) {
    std::partial_sort(candidates.begin(),
                      candidates.begin() + static_cast<std::ptrdiff_t>(r),
                      candidates.end(), better);
    candidates.resize(r);
  } else {
    std::sort(candidates.begin(), candidates.end(), better);
  }
  return candidates;
}

// Top-r of a dense distribution; zero entries are not part of the support.
inline TopR top_r_of(std::span<const double> distribution, std::size_t r) {
  if (r == 0) {
    throw DomainError("r must be >= 1");
  }
  std::vector<std::pair<TokenId, double>> support;
  for (std::size_t t = 0; t < distribution.size(); ++t) {
    if (distribution[t] < 0.0) {
      throw DomainError("negative probability");
    }
    if (distribution[t] > 0.0) {
      support.emplace_back(static_cast<TokenId>(t), distribution[t]);
    }
  }
  if (support.empty()) {
    throw EmptySupport("distribution has no support");
  }
  const bool whole_support = support.size() <= r;
  TopR out;
  for (const auto& [token, prob] : select_top(std::move(support), r)) {
    out.ids.push_back(token);
    out.probs.push_back(prob);
  }
  out.p = std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
  // A normalized distribution kept whole covers all its mass.
  if (whole_support && std::abs(out.p - 1.0) <= 1e-12) {
    out.p = 1.0;
  }
  return out;
}

}  // namespace coconts
