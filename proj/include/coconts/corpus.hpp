#pragma once

// Binary tokenized corpus: a raw little-endian array of 16- or 32-bit token
// ids with a JSON sidecar at "<path>.meta".

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coconts/error.hpp"

namespace coconts {

using TokenId = std::uint32_t;

struct CorpusMeta {
  std::uint32_t vocab_size = 1;
  unsigned token_width_bits = 16;
  std::uint64_t total_tokens = 0;
  std::optional<TokenId> doc_separator;

  unsigned token_bytes() const { return token_width_bits / 8; }

  void validate() const {
    if (vocab_size == 0) {
      throw DomainError("vocab_size must be positive");
    }
    if (token_width_bits != 16 && token_width_bits != 32) {
      throw DomainError("token_width_bits must be 16 or 32");
    }
    if (token_width_bits == 16 && vocab_size > 65536u) {
      throw DomainError("vocab_size " + std::to_string(vocab_size) +
                        " does not fit 16-bit token ids");
    }
    if (doc_separator && *doc_separator >= vocab_size) {
      throw DomainError("doc_separator must be < vocab_size");
    }
  }
};

inline nlohmann::json to_json(const CorpusMeta& meta) {
  nlohmann::json j;
  j["vocab_size"] = meta.vocab_size;
  j["token_width_bits"] = meta.token_width_bits;
  j["total_tokens"] = meta.total_tokens;
  j["doc_separator"] = meta.doc_separator ? nlohmann::json(*meta.doc_separator)
                                          : nlohmann::json(nullptr);
  return j;
}

inline CorpusMeta corpus_meta_from_json(const nlohmann::json& j) {
  try {
    CorpusMeta meta;
    meta.vocab_size = j.at("vocab_size").get<std::uint32_t>();
    meta.token_width_bits = j.at("token_width_bits").get<unsigned>();
    meta.total_tokens = j.at("total_tokens").get<std::uint64_t>();
    if (j.contains("doc_separator") && !j["doc_separator"].is_null()) {
      meta.doc_separator = j["doc_separator"].get<TokenId>();
    }
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad corpus metadata: ") + e.what());
  }
}

namespace detail {

inline void put_le(std::vector<unsigned char>& out, std::uint64_t value,
                   unsigned bytes) {
  for (unsigned i = 0; i < bytes; ++i) {
    out.push_back(static_cast<unsigned char>(value >> (8 * i)));
  }
}

inline std::uint64_t get_le(const unsigned char* in, unsigned bytes) {
  std::uint64_t value = 0;
  for (unsigned i = 0; i < bytes; ++i) {
    value |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  }
  return value;
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoError("read failed: " + path.string());
  }
  return bytes;
}

inline void write_file(const std::filesystem::path& path,
                       std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot create " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << text)) {
    throw IoError("write failed: " + path.string());
  }
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace detail

inline std::filesystem::path meta_path(const std::filesystem::path& path) {
  return path.string() + ".meta";
}

struct Corpus {
  CorpusMeta meta;
  std::vector<TokenId> tokens;

  std::span<const TokenId> view() const { return tokens; }
};

inline void check_tokens(std::span<const TokenId> tokens, std::uint32_t vocab_size) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= vocab_size) {
      throw DomainError("token " + std::to_string(tokens[i]) + " at offset " +
                        std::to_string(i) + " is >= vocab_size " +
                        std::to_string(vocab_size));
    }
  }
}

// Writes the token file and its sidecar. meta.total_tokens is overwritten
// with the actual length.
inline void write_corpus(std::span<const TokenId> tokens, CorpusMeta meta,
                         const std::filesystem::path& path) {
  meta.total_tokens = tokens.size();
  meta.validate();
  check_tokens(tokens, meta.vocab_size);

  std::vector<unsigned char> bytes;
  bytes.reserve(tokens.size() * meta.token_bytes());
  for (TokenId t : tokens) {
    detail::put_le(bytes, t, meta.token_bytes());
  }
  detail::write_file(path, bytes);
  detail::write_text(meta_path(path), to_json(meta).dump(2) + "\n");
}

inline Corpus read_corpus(const std::filesystem::path& path) {
  Corpus corpus;
  corpus.meta = corpus_meta_from_json(detail::read_json(meta_path(path)));
  try {
    corpus.meta.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("bad corpus metadata: ") + e.what());
  }
  const auto bytes = detail::read_file(path);
  const unsigned width = corpus.meta.token_bytes();
  if (bytes.size() % width != 0 ||
      bytes.size() / width != corpus.meta.total_tokens) {
    throw FormatError(path.string() + ": byte length " +
                      std::to_string(bytes.size()) +
                      " does not match total_tokens " +
                      std::to_string(corpus.meta.total_tokens));
  }
  corpus.tokens.resize(bytes.size() / width);
  for (std::size_t i = 0; i < corpus.tokens.size(); ++i) {
    corpus.tokens[i] = static_cast<TokenId>(detail::get_le(&bytes[i * width], width));
  }
  try {
    check_tokens(corpus.tokens, corpus.meta.vocab_size);
  } catch (const DomainError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return corpus;
}

struct TokenBlock {
  std::span<const TokenId> tokens;
  std::size_t origin_offset = 0;
};

// Disjoint length-L blocks in corpus order; the tail shorter than L is dropped.
inline std::vector<TokenBlock> iter_blocks(std::span<const TokenId> tokens,
                                           std::size_t length,
                                           std::size_t base_offset = 0) {
  if (length == 0) {
    throw DomainError("block length must be >= 1");
  }
  std::vector<TokenBlock> blocks;
  blocks.reserve(tokens.size() / length);
  for (std::size_t start = 0; start + length <= tokens.size(); start += length) {
    blocks.push_back({tokens.subspan(start, length), base_offset + start});
  }
  return blocks;
}

inline std::vector<TokenBlock> iter_blocks(const Corpus& corpus, std::size_t length) {
  return iter_blocks(corpus.view(), length);
}

struct Window {
  std::span<const TokenId> tokens;
  std::size_t offset = 0;
};

// Stride-1 windows of a fixed length that never contain the separator token.
// This is the single boundary convention shared by the trie and the oracle.
class WindowRange {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = Window;
    using difference_type = std::ptrdiff_t;
    using pointer = void;
    using reference = Window;

    iterator() = default;

    Window operator*() const {
      return {range_->tokens_.subspan(pos_, range_->length_),
              range_->base_offset_ + pos_};
    }
    iterator& operator++() {
      pos_ = range_->next_valid(pos_ + 1);
      return *this;
    }
    iterator operator++(int) {
      auto copy = *this;
      ++*this;
      return copy;
    }
    bool operator==(const iterator& other) const { return pos_ == other.pos_; }

   private:
    friend class WindowRange;
    iterator(const WindowRange* range, std::size_t pos) : range_(range), pos_(pos) {}
    const WindowRange* range_ = nullptr;
    std::size_t pos_ = 0;
  };

  WindowRange(std::span<const TokenId> tokens, std::size_t length,
              std::optional<TokenId> separator, std::size_t base_offset = 0)
      : tokens_(tokens), length_(length), separator_(separator),
        base_offset_(base_offset) {
    if (length_ == 0) {
      throw DomainError("window length must be >= 1");
    }
  }

  iterator begin() const { return {this, next_valid(0)}; }
  iterator end() const { return {this, end_pos()}; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::distance(begin(), end()));
  }

 private:
  std::size_t end_pos() const {
    return tokens_.size() >= length_ ? tokens_.size() - length_ + 1 : 0;
  }

  std::size_t next_valid(std::size_t start) const {
    const std::size_t last = end_pos();
    while (start < last) {
      if (!separator_) {
        return start;
      }
      const auto window = tokens_.subspan(start, length_);
      const auto hit = std::find(window.rbegin(), window.rend(), *separator_);
      if (hit == window.rend()) {
        return start;
      }
      start += static_cast<std::size_t>(std::distance(hit, window.rend()));
    }
    return last;
  }

  std::span<const TokenId> tokens_;
  std::size_t length_;
  std::optional<TokenId> separator_;
  std::size_t base_offset_;
};

inline WindowRange iter_windows(const Corpus& corpus, std::size_t length) {
  return WindowRange(corpus.view(), length, corpus.meta.doc_separator);
}

}  // namespace coconts
