#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "coconts/corpus.hpp"

namespace coconts::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("coconts-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Tokens drawn from a skewed distribution so short prefixes repeat.
inline std::vector<TokenId> random_tokens(std::mt19937_64& rng, std::size_t length,
                                          std::uint32_t vocab) {
  std::vector<double> weights(vocab);
  for (std::uint32_t i = 0; i < vocab; ++i) weights[i] = 1.0 / (1.0 + i);
  std::discrete_distribution<std::uint32_t> pick(weights.begin(), weights.end());
  std::vector<TokenId> tokens(length);
  for (auto& t : tokens) t = pick(rng);
  return tokens;
}

inline Corpus make_corpus(std::vector<TokenId> tokens, std::uint32_t vocab,
                          unsigned width = 16) {
  Corpus c;
  c.meta.vocab_size = vocab;
  c.meta.token_width_bits = width;
  c.meta.total_tokens = tokens.size();
  c.tokens = std::move(tokens);
  return c;
}

}  // namespace coconts::testing
