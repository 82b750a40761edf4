#pragma once

// Compact consistent next-token targets built from a top-r truncation.
//
// With p the covered mass, u = 1/(gamma - p) and v = (1 - (1-p)u)/p:
//   realized token in the top-r set:   target = v * topr
//   realized token outside it:         target = u * topr + onehot(realized)
// Averaged over realized tokens drawn from the full conditional, the target
// equals that conditional exactly. Targets themselves are not normalized.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coconts/error.hpp"
#include "coconts/topr.hpp"

namespace coconts {

inline constexpr double kDefaultGamma = 1.5;
inline constexpr double kMassEpsilon = 1e-12;

struct Hyper {
  std::size_t L = 256;
  std::size_t k = 8;
  std::size_t r = 8;
  double gamma = kDefaultGamma;

  void validate() const {
    if (k < 1) throw DomainError("k must be >= 1");
    if (r < 1) throw DomainError("r must be >= 1");
    if (L <= k) throw DomainError("L must exceed k");
    if (!(gamma > 1.0) || !std::isfinite(gamma)) {
      throw DomainError("gamma must be a finite value > 1");
    }
  }

  // Token slots per enriched record.
  std::size_t record_slots() const { return L + 2 * k * r; }
  double storage_ratio() const {
    return static_cast<double>(record_slots()) / static_cast<double>(L);
  }
};

struct Coefficients {
  double u = 0.0;
  double v = 0.0;
};

inline Coefficients coefficients(double p, double gamma) {
  if (!(gamma > 1.0)) {
    throw DomainError("gamma must be > 1");
  }
  if (!(p > 0.0)) {
    throw EmptySupport("top-r mass must be positive");
  }
  if (p > 1.0 + kMassEpsilon) {
    throw DomainError("top-r mass " + std::to_string(p) + " exceeds 1");
  }
  p = std::clamp(p, kMassEpsilon, 1.0);
  Coefficients c;
  c.u = 1.0 / (gamma - p);
  c.v = (1.0 - (1.0 - p) * c.u) / p;
  return c;
}

enum class TargetCase { InTopR, Rare, Normalized };

inline const char* to_string(TargetCase c) {
  switch (c) {
    case TargetCase::InTopR: return "in-topr";
    case TargetCase::Rare: return "rare";
    case TargetCase::Normalized: return "normalized";
  }
  return "?";
}

using SparseEntry = std::pair<TokenId, double>;

// Sparse non-negative target of support <= r+1. `Normalized` marks a plain
// renormalized truncation, which is what the AllNTs-style batches carry.
struct AdjustedTarget {
  std::vector<SparseEntry> entries;
  TargetCase kind = TargetCase::InTopR;
  TokenId realized = 0;

  double total_weight() const {
    double total = 0.0;
    for (const auto& e : entries) total += e.second;
    return total;
  }

  double weight(TokenId token) const {
    double w = 0.0;
    for (const auto& e : entries) {
      if (e.first == token) w += e.second;
    }
    return w;
  }
};

inline AdjustedTarget adjusted_target(const TopR& topr, TokenId realized,
                                      double gamma) {
  if (topr.empty()) {
    throw EmptySupport("empty top-r truncation");
  }
  const Coefficients c = coefficients(topr.p, gamma);
  AdjustedTarget target;
  target.realized = realized;
  target.entries.reserve(topr.size() + 1);
  if (topr.contains(realized)) {
    target.kind = TargetCase::InTopR;
    for (std::size_t i = 0; i < topr.size(); ++i) {
      target.entries.emplace_back(topr.ids[i], c.v * topr.probs[i]);
    }
  } else {
    target.kind = TargetCase::Rare;
    for (std::size_t i = 0; i < topr.size(); ++i) {
      target.entries.emplace_back(topr.ids[i], c.u * topr.probs[i]);
    }
    target.entries.emplace_back(realized, 1.0);
  }
  return target;
}

// Renormalized truncation: the stand-in for AllNTs supervision when only the
// top-r pairs are available.
inline AdjustedTarget normalized_target(const TopR& topr, TokenId realized) {
  if (topr.empty() || !(topr.p > 0.0)) {
    throw EmptySupport("empty top-r truncation");
  }
  AdjustedTarget target;
  target.kind = TargetCase::Normalized;
  target.realized = realized;
  for (std::size_t i = 0; i < topr.size(); ++i) {
    target.entries.emplace_back(topr.ids[i], topr.probs[i] / topr.p);
  }
  return target;
}

// Sum over every outcome w of full[w] * adjusted_target(topr, w), evaluated
// in closed form per outcome rather than by sampling.
inline std::vector<double> expectation(const TopR& topr,
                                       std::span<const double> full_conditional,
                                       double gamma) {
  std::vector<double> mean(full_conditional.size(), 0.0);
  for (std::size_t w = 0; w < full_conditional.size(); ++w) {
    const double weight = full_conditional[w];
    if (weight == 0.0) continue;
    const auto target = adjusted_target(topr, static_cast<TokenId>(w), gamma);
    for (const auto& [token, value] : target.entries) {
      if (token >= mean.size()) {
        throw DomainError("top-r token outside the distribution");
      }
      mean[token] += weight * value;
    }
  }
  return mean;
}

struct L1Diagnostics {
  double in_topr_distance = 0.0;
  // 2 - u*p. Only an upper bound on the rare-case distance when u <= 1.
  double rare_bound = 0.0;
};

inline L1Diagnostics l1_diagnostics(const TopR& topr, double gamma) {
  if (topr.empty()) {
    throw EmptySupport("empty top-r truncation");
  }
  const Coefficients c = coefficients(topr.p, gamma);
  const double p = std::min(topr.p, 1.0);
  return {(1.0 - p) * c.u, 2.0 - c.u * p};
}

// Direct sum |target - full| over the vocabulary.
inline double l1_distance(const AdjustedTarget& target,
                          std::span<const double> full_conditional) {
  std::vector<double> dense(full_conditional.begin(), full_conditional.end());
  for (auto& x : dense) x = -x;
  for (const auto& [token, value] : target.entries) {
    if (token >= dense.size()) {
      throw DomainError("target token outside the distribution");
    }
    dense[token] += value;
  }
  double total = 0.0;
  for (double x : dense) total += std::abs(x);
  return total;
}

// Row-major (rows x vocab) matrix.
struct DenseTargets {
  std::size_t rows = 0;
  std::size_t vocab = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * vocab, vocab);
  }
  double at(std::size_t i, std::size_t token) const { return values[i * vocab + token]; }

  bool operator==(const DenseTargets&) const = default;
};

inline DenseTargets dense_targets(std::span<const AdjustedTarget> targets,
                                  std::size_t vocab_size) {
  DenseTargets out{targets.size(), vocab_size,
                   std::vector<double>(targets.size() * vocab_size, 0.0)};
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (const auto& [token, value] : targets[i].entries) {
      if (token >= vocab_size) {
        throw DomainError("target token " + std::to_string(token) +
                          " >= vocab_size " + std::to_string(vocab_size));
      }
      out.values[i * vocab_size + token] += value;
    }
  }
  return out;
}

// Bytes of a dense batch of supervision buffers.
constexpr std::uint64_t dense_target_bytes(std::uint64_t batch, std::uint64_t k,
                                           std::uint64_t vocab,
                                           std::uint64_t bytes_per_value) {
  return batch * k * vocab * bytes_per_value;
}

}  // namespace coconts
