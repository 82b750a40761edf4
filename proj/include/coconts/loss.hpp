#pragma once

// Objectives over caller-provided log-probabilities, plus a single softmax
// multinomial trained with NT or CoCoNTs targets.
//
// Position t of a sequence predicts targets[t]; positions t < k carry a
// distribution target (prefix length t+1), the rest plain next-token NLL.
// Losses are means over positions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coconts/approx.hpp"
#include "coconts/error.hpp"
#include "coconts/matrix.hpp"
#include "coconts/topr.hpp"

namespace coconts {

using LogProbs = Matrix<double>;

inline constexpr double kNormalizedTolerance = 1e-9;

inline std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double x : logits) total += std::exp(x - top);
  const double log_z = top + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

inline double nt_loss(const LogProbs& logprobs, std::span<const TokenId> targets) {
  if (logprobs.rows != targets.size()) {
    throw DomainError("logprobs rows != number of targets");
  }
  if (targets.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] >= logprobs.cols) throw DomainError("target outside the vocabulary");
    total -= logprobs(t, targets[t]);
  }
  return total / static_cast<double>(targets.size());
}

// KL(y || P) when y sums to 1, otherwise the weighted cross-entropy -sum y log P.
// The two differ by sum y log y, which does not depend on the model.
inline double kl_term(std::span<const SparseEntry> target, std::span<const double> logprob_row) {
  double mass = 0.0;
  for (const auto& [token, y] : target) {
    if (y < 0.0) throw DomainError("negative target weight");
    if (token >= logprob_row.size()) throw DomainError("target outside the vocabulary");
    mass += y;
  }
  if (mass == 0.0) throw DomainError("all-zero target");
  const bool normalized = std::abs(mass - 1.0) <= kNormalizedTolerance;
  double total = 0.0;
  for (const auto& [token, y] : target) {
    if (y == 0.0) continue;
    total += normalized ? y * (std::log(y) - logprob_row[token]) : -y * logprob_row[token];
  }
  return total;
}

inline std::vector<SparseEntry> sparse_of(std::span<const double> dense) {
  std::vector<SparseEntry> out;
  for (std::size_t t = 0; t < dense.size(); ++t) {
    if (dense[t] != 0.0) out.emplace_back(static_cast<TokenId>(t), dense[t]);
  }
  return out;
}

inline double kl_term(std::span<const double> target, std::span<const double> logprob_row) {
  if (target.size() != logprob_row.size()) {
    throw DomainError("target and logprob row sizes differ");
  }
  return kl_term(sparse_of(target), logprob_row);
}

namespace detail {

template <typename LevelLoss>
double mixed_loss(const LogProbs& logprobs, std::span<const TokenId> targets, std::size_t k,
                  std::size_t levels, LevelLoss&& level_loss) {
  if (logprobs.rows != targets.size()) {
    throw DomainError("logprobs rows != number of targets");
  }
  if (k > targets.size()) throw DomainError("k exceeds the number of positions");
  if (levels < k) throw DomainError("fewer distribution targets than k");
  if (targets.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (t < k) {
      total += level_loss(t, logprobs.row(t));
    } else {
      if (targets[t] >= logprobs.cols) throw DomainError("target outside the vocabulary");
      total -= logprobs(t, targets[t]);
    }
  }
  return total / static_cast<double>(targets.size());
}

}  // namespace detail

inline double allnts_loss(const LogProbs& logprobs,
                          std::span<const std::vector<double>> conditionals,
                          std::span<const TokenId> targets, std::size_t k) {
  return detail::mixed_loss(logprobs, targets, k, conditionals.size(),
                            [&](std::size_t t, std::span<const double> row) {
                              return kl_term(conditionals[t], row);
                            });
}

inline double coconts_loss(const LogProbs& logprobs, std::span<const AdjustedTarget> adjusted,
                           std::span<const TokenId> targets, std::size_t k) {
  return detail::mixed_loss(logprobs, targets, k, adjusted.size(),
                            [&](std::size_t t, std::span<const double> row) {
                              return kl_term(adjusted[t].entries, row);
                            });
}

// d/dlogits of -sum y log softmax(logits): (sum y) softmax(logits) - y.
inline std::vector<double> target_gradient(std::span<const SparseEntry> target,
                                           std::span<const double> logits) {
  auto grad = softmax(logits);
  double mass = 0.0;
  for (const auto& e : target) mass += e.second;
  for (double& g : grad) g *= mass;
  for (const auto& [token, y] : target) {
    if (token >= grad.size()) throw DomainError("target outside the vocabulary");
    grad[token] -= y;
  }
  return grad;
}

// -sum y log softmax(logits); the function target_gradient differentiates.
inline double cross_entropy(std::span<const SparseEntry> target, std::span<const double> logits) {
  const auto lp = log_softmax(logits);
  double total = 0.0;
  for (const auto& [token, y] : target) total -= y * lp.at(token);
  return total;
}

inline double kl_divergence(std::span<const double> truth, std::span<const double> model) {
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] > 0.0) total += truth[i] * (std::log(truth[i]) - std::log(model[i]));
  }
  return total;
}

inline void check_distribution(std::span<const double> dist) {
  if (dist.empty()) throw DomainError("empty distribution");
  double total = 0.0;
  for (double x : dist) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("invalid probability");
    total += x;
  }
  if (std::abs(total - 1.0) > kNormalizedTolerance) {
    throw DomainError("distribution sums to " + std::to_string(total));
  }
}

enum class DemoMode { NT, CoCoNTs };

inline const char* to_string(DemoMode mode) {
  return mode == DemoMode::NT ? "nt" : "coconts";
}

struct DemoConfig {
  std::vector<double> true_dist;
  DemoMode mode = DemoMode::CoCoNTs;
  std::size_t r = 8;
  double gamma = kDefaultGamma;
  std::size_t steps = 2000;
  double lr = 0.1;
  std::uint64_t seed = 0;
  std::size_t runs = 10;
};

struct DemoState {
  std::vector<double> logits;
  std::size_t step = 0;
  std::uint64_t seed = 0;
};

struct DemoResult {
  // KL(true || softmax(logits)) after each step; per_run[run][step].
  std::vector<std::vector<double>> per_run;
  std::vector<double> mean;

  double final_kl() const { return mean.empty() ? 0.0 : mean.back(); }
};

// Inverse-CDF draw from a 53-bit uniform, independent of the standard
// library's distribution implementations.
inline std::size_t sample_index(std::span<const double> dist, std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    cumulative += dist[i];
    if (u < cumulative) return i;
  }
  for (std::size_t i = dist.size(); i-- > 0;) {
    if (dist[i] > 0.0) return i;
  }
  return dist.size() - 1;
}

// Target for one demo step given the realized class.
inline std::vector<SparseEntry> demo_target(const DemoConfig& config, const TopR& topr,
                                            std::size_t realized) {
  if (config.mode == DemoMode::NT) {
    return {{static_cast<TokenId>(realized), 1.0}};
  }
  return adjusted_target(topr, static_cast<TokenId>(realized), config.gamma).entries;
}

inline void demo_step(DemoState& state, const DemoConfig& config, const TopR& topr,
                      std::mt19937_64& rng) {
  const std::size_t realized = sample_index(config.true_dist, rng);
  const auto target = demo_target(config, topr, realized);
  const auto grad = target_gradient(target, state.logits);
  for (std::size_t i = 0; i < grad.size(); ++i) state.logits[i] -= config.lr * grad[i];
  ++state.step;
}

// Plain gradient descent from zero logits. Run i draws from seed + i, so two
// configurations with the same seed see the same realized classes.
inline DemoResult multinomial_demo(const DemoConfig& config) {
  check_distribution(config.true_dist);
  if (config.r == 0 || config.r > config.true_dist.size()) {
    throw DomainError("r must be in [1, number of classes]");
  }
  if (!(config.gamma > 1.0)) throw DomainError("gamma must be > 1");
  if (config.runs == 0) throw DomainError("runs must be >= 1");
  const TopR topr = top_r_of(config.true_dist, config.r);

  DemoResult result;
  result.mean.assign(config.steps, 0.0);
  for (std::size_t run = 0; run < config.runs; ++run) {
    DemoState state{std::vector<double>(config.true_dist.size(), 0.0), 0, config.seed + run};
    std::mt19937_64 rng(state.seed);
    std::vector<double> trajectory;
    trajectory.reserve(config.steps);
    for (std::size_t s = 0; s < config.steps; ++s) {
      demo_step(state, config, topr, rng);
      trajectory.push_back(kl_divergence(config.true_dist, softmax(state.logits)));
      result.mean[s] += trajectory.back();
    }
    result.per_run.push_back(std::move(trajectory));
  }
  for (double& x : result.mean) x /= static_cast<double>(config.runs);
  return result;
}

}  // namespace coconts
