#pragma once

// Counted prefix trie of depth k+1. The node reached by a prefix t_1..t_m
// counts the inserted windows that start with that prefix, so its children
// carry the next-token counts after it for every m in [1, k].

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coconts/corpus.hpp"
#include "coconts/error.hpp"
#include "coconts/topr.hpp"

namespace coconts {

struct TrieNode {
  std::uint64_t count = 0;
  std::map<TokenId, std::unique_ptr<TrieNode>> children;

  const TrieNode* child(TokenId token) const {
    const auto it = children.find(token);
    return it == children.end() ? nullptr : it->second.get();
  }

  std::unique_ptr<TrieNode> clone() const {
    auto copy = std::make_unique<TrieNode>();
    copy->count = count;
    for (const auto& [token, node] : children) {
      copy->children.emplace(token, node->clone());
    }
    return copy;
  }
};

// Exact next-token counts after a prefix; continuations ascend by token id.
struct ConditionalCounts {
  std::uint64_t denominator = 0;
  std::vector<std::pair<TokenId, std::uint64_t>> continuations;
};

struct TrieStats {
  std::size_t node_count = 0;
  std::size_t max_depth = 0;
  std::uint64_t total_windows = 0;
  std::size_t estimated_bytes = 0;
};

inline std::string format_prefix(std::span<const TokenId> prefix) {
  std::string out;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (i != 0) {
      out += ',';
    }
    out += std::to_string(prefix[i]);
  }
  return out;
}

class PrefixTrie {
 public:
  PrefixTrie(std::size_t k, std::uint32_t vocab_size)
      : k_(k), vocab_size_(vocab_size), root_(std::make_unique<TrieNode>()) {
    if (k_ == 0) {
      throw DomainError("k must be >= 1");
    }
  }

  PrefixTrie(const PrefixTrie& other)
      : k_(other.k_), vocab_size_(other.vocab_size_), root_(other.root_->clone()) {}
  PrefixTrie& operator=(const PrefixTrie& other) {
    if (this != &other) {
      *this = PrefixTrie(other);
    }
    return *this;
  }
  PrefixTrie(PrefixTrie&&) noexcept = default;
  PrefixTrie& operator=(PrefixTrie&&) noexcept = default;

  std::size_t k() const { return k_; }
  std::size_t depth_limit() const { return k_ + 1; }
  std::uint32_t vocab_size() const { return vocab_size_; }
  const TrieNode& root() const { return *root_; }

  void insert_window(std::span<const TokenId> window) {
    if (window.size() != depth_limit()) {
      throw DomainError("window length " + std::to_string(window.size()) +
                        " != k+1 = " + std::to_string(depth_limit()));
    }
    for (TokenId t : window) {
      if (t >= vocab_size_) {
        throw DomainError("token " + std::to_string(t) + " >= vocab_size");
      }
    }
    TrieNode* node = root_.get();
    ++node->count;
    for (TokenId t : window) {
      auto& slot = node->children[t];
      if (!slot) {
        slot = std::make_unique<TrieNode>();
      }
      node = slot.get();
      ++node->count;
    }
  }

  // nullptr when the prefix was never inserted. The empty prefix is the root.
  const TrieNode* find(std::span<const TokenId> prefix) const {
    const TrieNode* node = root_.get();
    for (TokenId t : prefix) {
      node = node->child(t);
      if (node == nullptr) {
        return nullptr;
      }
    }
    return node;
  }

  // Direct node access for fault-injection tests and tooling.
  TrieNode* mutable_node(std::span<const TokenId> prefix) {
    return const_cast<TrieNode*>(find(prefix));
  }

  std::uint64_t count(std::span<const TokenId> prefix) const {
    const TrieNode* node = find(prefix);
    return node == nullptr ? 0 : node->count;
  }

  ConditionalCounts conditional_counts(std::span<const TokenId> prefix) const {
    const TrieNode& node = seen_node(prefix);
    ConditionalCounts out;
    out.denominator = node.count;
    out.continuations.reserve(node.children.size());
    for (const auto& [token, child] : node.children) {
      out.continuations.emplace_back(token, child->count);
    }
    return out;
  }

  // Dense next-token distribution over the whole vocabulary.
  std::vector<double> conditional(std::span<const TokenId> prefix) const {
    const TrieNode& node = seen_node(prefix);
    std::vector<double> dist(vocab_size_, 0.0);
    const auto denominator = static_cast<double>(node.count);
    for (const auto& [token, child] : node.children) {
      dist[token] = static_cast<double>(child->count) / denominator;
    }
    return dist;
  }

  TopR top_r(std::span<const TokenId> prefix, std::size_t r) const {
    if (r == 0) {
      throw DomainError("r must be >= 1");
    }
    const TrieNode& node = seen_node(prefix);
    if (node.children.empty()) {
      throw EmptySupport("prefix " + format_prefix(prefix) + " has no continuations");
    }
    std::vector<std::pair<TokenId, std::uint64_t>> candidates;
    candidates.reserve(node.children.size());
    for (const auto& [token, child] : node.children) {
      candidates.emplace_back(token, child->count);
    }
    TopR out;
    const auto denominator = static_cast<double>(node.count);
    std::uint64_t covered = 0;
    for (const auto& [token, c] : select_top(std::move(candidates), r)) {
      out.ids.push_back(token);
      out.probs.push_back(static_cast<double>(c) / denominator);
      covered += c;
    }
    // Integer numerator: a truncation covering the whole support has p == 1.
    out.p = static_cast<double>(covered) / denominator;
    return out;
  }

  // Copy without any subtree whose root count is below min_count. Surviving
  // counts are untouched, so a parent may exceed the sum of its children.
  PrefixTrie pruned(std::uint64_t min_count) const {
    if (min_count == 0) {
      throw DomainError("min_count must be >= 1");
    }
    PrefixTrie out(k_, vocab_size_);
    out.root_ = prune_copy(*root_, min_count);
    return out;
  }

  TrieStats stats() const {
    TrieStats s;
    s.total_windows = root_->count;
    walk(*root_, 0, s);
    // Node payload plus one red-black tree entry per non-root node.
    constexpr std::size_t kMapEntry =
        sizeof(std::pair<const TokenId, std::unique_ptr<TrieNode>>) + 4 * sizeof(void*);
    s.estimated_bytes = s.node_count * sizeof(TrieNode) + (s.node_count - 1) * kMapEntry;
    return s;
  }

  // Preorder snapshot: per node count (8 bytes LE), child_count (4 bytes LE),
  // then for each child its token id (token_width) followed by its subtree.
  // Hyperparameters go to the "<path>.meta" JSON sidecar.
  void save(const std::filesystem::path& path, unsigned token_width_bits = 16) const {
    if (token_width_bits != 16 && token_width_bits != 32) {
      throw DomainError("token_width_bits must be 16 or 32");
    }
    if (token_width_bits == 16 && vocab_size_ > 65536u) {
      throw DomainError("vocab_size does not fit 16-bit token ids");
    }
    std::vector<unsigned char> bytes;
    serialize(*root_, token_width_bits / 8, bytes);
    detail::write_file(path, bytes);
    nlohmann::json meta;
    meta["k"] = k_;
    meta["vocab_size"] = vocab_size_;
    meta["token_width_bits"] = token_width_bits;
    meta["total_windows"] = root_->count;
    detail::write_text(meta_path(path), meta.dump(2) + "\n");
  }

  static PrefixTrie load(const std::filesystem::path& path) {
    const auto meta = detail::read_json(meta_path(path));
    std::size_t k = 0;
    std::uint32_t vocab = 0;
    unsigned width = 0;
    try {
      k = meta.at("k").get<std::size_t>();
      vocab = meta.at("vocab_size").get<std::uint32_t>();
      width = meta.at("token_width_bits").get<unsigned>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad trie metadata: ") + e.what());
    }
    if (k == 0 || (width != 16 && width != 32)) {
      throw FormatError("bad trie metadata in " + meta_path(path).string());
    }
    const auto bytes = detail::read_file(path);
    PrefixTrie trie(k, vocab);
    std::size_t pos = 0;
    trie.root_ = deserialize(bytes, pos, width / 8, 0, trie);
    if (pos != bytes.size()) {
      throw FormatError("trailing bytes in trie snapshot " + path.string());
    }
    return trie;
  }

 private:
  const TrieNode& seen_node(std::span<const TokenId> prefix) const {
    if (prefix.empty() || prefix.size() > k_) {
      throw DomainError("prefix length " + std::to_string(prefix.size()) +
                        " outside [1, " + std::to_string(k_) + "]");
    }
    const TrieNode* node = find(prefix);
    if (node == nullptr || node->count == 0) {
      throw UnseenPrefix("prefix " + format_prefix(prefix) + " never occurs");
    }
    return *node;
  }

  static std::unique_ptr<TrieNode> prune_copy(const TrieNode& node,
                                              std::uint64_t min_count) {
    auto copy = std::make_unique<TrieNode>();
    copy->count = node.count;
    for (const auto& [token, child] : node.children) {
      if (child->count >= min_count) {
        copy->children.emplace(token, prune_copy(*child, min_count));
      }
    }
    return copy;
  }

  static void walk(const TrieNode& node, std::size_t depth, TrieStats& s) {
    ++s.node_count;
    s.max_depth = std::max(s.max_depth, depth);
    for (const auto& entry : node.children) {
      walk(*entry.second, depth + 1, s);
    }
  }

  static void serialize(const TrieNode& node, unsigned token_bytes,
                        std::vector<unsigned char>& out) {
    detail::put_le(out, node.count, 8);
    detail::put_le(out, node.children.size(), 4);
    for (const auto& [token, child] : node.children) {
      detail::put_le(out, token, token_bytes);
      serialize(*child, token_bytes, out);
    }
  }

  static std::unique_ptr<TrieNode> deserialize(const std::vector<unsigned char>& in,
                                               std::size_t& pos, unsigned token_bytes,
                                               std::size_t depth,
                                               const PrefixTrie& trie) {
    const auto need = [&](std::size_t n) {
      if (in.size() - pos < n) {
        throw FormatError("truncated trie snapshot");
      }
    };
    if (depth > trie.depth_limit()) {
      throw FormatError("trie snapshot deeper than k+1");
    }
    auto node = std::make_unique<TrieNode>();
    need(12);
    node->count = detail::get_le(&in[pos], 8);
    const auto children = detail::get_le(&in[pos + 8], 4);
    pos += 12;
    for (std::uint64_t i = 0; i < children; ++i) {
      need(token_bytes);
      const auto token = static_cast<TokenId>(detail::get_le(&in[pos], token_bytes));
      pos += token_bytes;
      if (token >= trie.vocab_size()) {
        throw FormatError("token id out of range in trie snapshot");
      }
      node->children.emplace(token,
                             deserialize(in, pos, token_bytes, depth + 1, trie));
    }
    return node;
  }

  std::size_t k_;
  std::uint32_t vocab_size_;
  std::unique_ptr<TrieNode> root_;
};

// Folds insert_window over every (k+1)-window of the token range.
inline PrefixTrie build_trie(std::span<const TokenId> tokens,
                             std::optional<TokenId> separator, std::size_t k,
                             std::uint32_t vocab_size) {
  PrefixTrie trie(k, vocab_size);
  for (const Window& w : WindowRange(tokens, k + 1, separator)) {
    trie.insert_window(w.tokens);
  }
  return trie;
}

inline PrefixTrie build_trie(const Corpus& corpus, std::size_t k) {
  return build_trie(corpus.view(), corpus.meta.doc_separator, k,
                    corpus.meta.vocab_size);
}

}  // namespace coconts
