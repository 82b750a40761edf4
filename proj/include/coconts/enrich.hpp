#pragma once

// Pre-enrichment: every disjoint L-block is written as-is, followed by k
// groups of r interleaved (token_id, prob) slots. Group i holds the top-r
// continuations of the block's first i tokens. Probabilities occupy one token
// slot: binary16 for 16-bit corpora, binary32 for 32-bit corpora. Pairs with
// prob == 0 are padding and carry token id 0. All integers little-endian.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "coconts/approx.hpp"
#include "coconts/corpus.hpp"
#include "coconts/error.hpp"
#include "coconts/half.hpp"
#include "coconts/mapped_file.hpp"
#include "coconts/trie.hpp"

namespace coconts {

// Probability slot encoding. A positive probability never encodes as zero,
// since zero marks padding; it is floored to the smallest positive value.
inline std::uint32_t encode_prob(double prob, unsigned token_width_bits) {
  if (!(prob >= 0.0) || prob > 1.0 + kMassEpsilon) {
    throw DomainError("probability " + std::to_string(prob) + " outside [0, 1]");
  }
  if (token_width_bits == 16) {
    const std::uint16_t h = half_from_double(prob);
    return (h == 0 && prob > 0.0) ? 1u : h;
  }
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(prob));
  return (bits == 0 && prob > 0.0) ? 1u : bits;
}

inline double decode_prob(std::uint32_t bits, unsigned token_width_bits) {
  if (token_width_bits == 16) {
    return half_to_double(static_cast<std::uint16_t>(bits));
  }
  return static_cast<double>(std::bit_cast<float>(bits));
}

struct EnrichedPair {
  TokenId token = 0;
  std::uint32_t prob_bits = 0;

  bool operator==(const EnrichedPair&) const = default;
};

// In-memory record; padding pairs are not stored.
struct EnrichedRecord {
  std::vector<TokenId> tokens;
  std::vector<std::vector<EnrichedPair>> levels;

  bool operator==(const EnrichedRecord&) const = default;

  // Level `i` is 0-based: prefix tokens[0..i], realized token tokens[i+1].
  TopR level_topr(std::size_t i, unsigned token_width_bits) const {
    TopR out;
    for (const auto& pair : levels.at(i)) {
      out.ids.push_back(pair.token);
      out.probs.push_back(decode_prob(pair.prob_bits, token_width_bits));
      out.p += out.probs.back();
    }
    return out;
  }
};

struct EnrichedMeta {
  Hyper hyper;
  std::uint32_t vocab_size = 1;
  unsigned token_width_bits = 16;
  std::uint64_t record_count = 0;
  std::uint64_t shard_id = 0;

  std::size_t record_bytes() const {
    return hyper.record_slots() * (token_width_bits / 8);
  }
};

inline nlohmann::json to_json(const EnrichedMeta& m) {
  nlohmann::json j;
  j["L"] = m.hyper.L;
  j["k"] = m.hyper.k;
  j["r"] = m.hyper.r;
  j["gamma"] = m.hyper.gamma;
  j["vocab_size"] = m.vocab_size;
  j["token_width"] = m.token_width_bits;
  j["record_count"] = m.record_count;
  j["shard_id"] = m.shard_id;
  return j;
}

inline EnrichedMeta enriched_meta_from_json(const nlohmann::json& j) {
  EnrichedMeta m;
  try {
    m.hyper.L = j.at("L").get<std::size_t>();
    m.hyper.k = j.at("k").get<std::size_t>();
    m.hyper.r = j.at("r").get<std::size_t>();
    m.hyper.gamma = j.at("gamma").get<double>();
    m.vocab_size = j.at("vocab_size").get<std::uint32_t>();
    m.token_width_bits = j.at("token_width").get<unsigned>();
    m.record_count = j.at("record_count").get<std::uint64_t>();
    m.shard_id = j.value("shard_id", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad enriched metadata: ") + e.what());
  }
  try {
    m.hyper.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("bad enriched metadata: ") + e.what());
  }
  if (m.token_width_bits != 16 && m.token_width_bits != 32) {
    throw FormatError("bad enriched metadata: token_width must be 16 or 32");
  }
  return m;
}

// One level's pairs from a live trie, quantized to the on-disk encoding.
// Unseen (or fully pruned) prefixes fall back to one-hot on the realized token.
inline std::vector<EnrichedPair> quantized_level(const PrefixTrie& trie,
                                                 std::span<const TokenId> prefix,
                                                 TokenId realized, std::size_t r,
                                                 unsigned token_width_bits,
                                                 bool* fell_back = nullptr) {
  std::vector<EnrichedPair> pairs;
  try {
    const TopR topr = trie.top_r(prefix, r);
    pairs.reserve(topr.size());
    for (std::size_t i = 0; i < topr.size(); ++i) {
      pairs.push_back({topr.ids[i], encode_prob(topr.probs[i], token_width_bits)});
    }
    if (fell_back) *fell_back = false;
  } catch (const UnseenPrefix&) {
    pairs = {{realized, encode_prob(1.0, token_width_bits)}};
    if (fell_back) *fell_back = true;
  } catch (const EmptySupport&) {
    pairs = {{realized, encode_prob(1.0, token_width_bits)}};
    if (fell_back) *fell_back = true;
  }
  return pairs;
}

inline EnrichedRecord make_record(std::span<const TokenId> block, const PrefixTrie& trie,
                                  const Hyper& hyper, unsigned token_width_bits,
                                  std::size_t* fallbacks = nullptr) {
  if (block.size() != hyper.L) {
    throw DomainError("block length != L");
  }
  EnrichedRecord record;
  record.tokens.assign(block.begin(), block.end());
  record.levels.reserve(hyper.k);
  for (std::size_t i = 1; i <= hyper.k; ++i) {
    bool fell_back = false;
    record.levels.push_back(quantized_level(trie, block.first(i), block[i], hyper.r,
                                            token_width_bits, &fell_back));
    if (fell_back && fallbacks) ++*fallbacks;
  }
  return record;
}

inline void encode_record(const EnrichedRecord& record, const Hyper& hyper,
                          unsigned token_width_bits, std::vector<unsigned char>& out) {
  const unsigned width = token_width_bits / 8;
  if (record.tokens.size() != hyper.L || record.levels.size() != hyper.k) {
    throw DomainError("record shape does not match hyperparameters");
  }
  for (TokenId t : record.tokens) detail::put_le(out, t, width);
  for (const auto& level : record.levels) {
    if (level.size() > hyper.r) {
      throw DomainError("level holds more than r pairs");
    }
    for (const auto& pair : level) {
      detail::put_le(out, pair.token, width);
      detail::put_le(out, pair.prob_bits, width);
    }
    for (std::size_t pad = level.size(); pad < hyper.r; ++pad) {
      detail::put_le(out, 0, width);
      detail::put_le(out, 0, width);
    }
  }
}

inline EnrichedRecord decode_record(std::span<const unsigned char> bytes, const Hyper& hyper,
                                    unsigned token_width_bits) {
  const unsigned width = token_width_bits / 8;
  if (bytes.size() != hyper.record_slots() * width) {
    throw FormatError("record byte length mismatch");
  }
  const auto slot = [&](std::size_t i) {
    return static_cast<std::uint32_t>(detail::get_le(&bytes[i * width], width));
  };
  EnrichedRecord record;
  record.tokens.resize(hyper.L);
  for (std::size_t i = 0; i < hyper.L; ++i) record.tokens[i] = slot(i);
  record.levels.resize(hyper.k);
  std::size_t pos = hyper.L;
  for (auto& level : record.levels) {
    for (std::size_t j = 0; j < hyper.r; ++j, pos += 2) {
      const EnrichedPair pair{slot(pos), slot(pos + 1)};
      if (pair.prob_bits != 0) level.push_back(pair);
    }
  }
  return record;
}

// Random-access reader over an enriched file and its sidecar.
class EnrichedFile {
 public:
  explicit EnrichedFile(const std::filesystem::path& path)
      : meta_(enriched_meta_from_json(detail::read_json(meta_path(path)))),
        file_(path) {
    const std::size_t expected = meta_.record_count * meta_.record_bytes();
    if (file_.size() != expected) {
      throw FormatError(path.string() + ": " + std::to_string(file_.size()) +
                        " bytes, expected " + std::to_string(expected) + " for " +
                        std::to_string(meta_.record_count) + " records");
    }
  }

  const EnrichedMeta& meta() const { return meta_; }
  const Hyper& hyper() const { return meta_.hyper; }
  std::uint64_t record_count() const { return meta_.record_count; }

  std::span<const unsigned char> record_bytes(std::uint64_t index) const {
    if (index >= meta_.record_count) {
      throw DomainError("record index " + std::to_string(index) + " >= record_count " +
                        std::to_string(meta_.record_count));
    }
    const std::size_t size = meta_.record_bytes();
    return file_.bytes().subspan(index * size, size);
  }

  EnrichedRecord read_record(std::uint64_t index) const {
    return decode_record(record_bytes(index), meta_.hyper, meta_.token_width_bits);
  }

 private:
  EnrichedMeta meta_;
  MappedFile file_;
};

struct EnrichmentReport {
  std::uint64_t shard_id = 0;
  std::filesystem::path path;
  std::uint64_t record_count = 0;
  std::uint64_t fallback_levels = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t raw_block_bytes = 0;

  double storage_ratio() const {
    return raw_block_bytes == 0 ? 0.0
                                : static_cast<double>(bytes_written) /
                                      static_cast<double>(raw_block_bytes);
  }
};

// Writes one enriched record per disjoint L-block of `tokens`.
inline EnrichmentReport enrich(std::span<const TokenId> tokens, const PrefixTrie& trie,
                               const Hyper& hyper, std::uint32_t vocab_size,
                               unsigned token_width_bits, const std::filesystem::path& out,
                               std::uint64_t shard_id = 0) {
  hyper.validate();
  if (trie.k() != hyper.k) {
    throw DomainError("trie k does not match hyperparameter k");
  }
  if (token_width_bits != 16 && token_width_bits != 32) {
    throw DomainError("token_width_bits must be 16 or 32");
  }
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw IoError("cannot create " + out.string());
  }
  EnrichmentReport report;
  report.shard_id = shard_id;
  report.path = out;
  std::vector<unsigned char> buffer;
  buffer.reserve(hyper.record_slots() * (token_width_bits / 8));
  for (const TokenBlock& block : iter_blocks(tokens, hyper.L)) {
    std::size_t fallbacks = 0;
    const auto record = make_record(block.tokens, trie, hyper, token_width_bits, &fallbacks);
    buffer.clear();
    encode_record(record, hyper, token_width_bits, buffer);
    file.write(reinterpret_cast<const char*>(buffer.data()),
               static_cast<std::streamsize>(buffer.size()));
    report.record_count += 1;
    report.fallback_levels += fallbacks;
    report.bytes_written += buffer.size();
    report.raw_block_bytes += hyper.L * (token_width_bits / 8);
  }
  file.close();
  if (!file) {
    throw IoError("write failed: " + out.string());
  }
  EnrichedMeta meta{hyper, vocab_size, token_width_bits, report.record_count, shard_id};
  detail::write_text(meta_path(out), to_json(meta).dump(2) + "\n");
  return report;
}

inline EnrichmentReport enrich(const Corpus& corpus, const PrefixTrie& trie,
                               const Hyper& hyper, const std::filesystem::path& out) {
  return enrich(corpus.view(), trie, hyper, corpus.meta.vocab_size,
                corpus.meta.token_width_bits, out);
}

struct ShardRange {
  std::size_t token_begin = 0;
  // The last shard also owns the trailing partial block, so its n-gram
  // statistics match an unsharded build.
  std::size_t token_end = 0;
  std::size_t block_begin = 0;
  std::size_t block_count = 0;
};

struct ShardPlan {
  std::vector<ShardRange> ranges;
  std::vector<std::filesystem::path> outputs;

  std::size_t size() const { return ranges.size(); }
};

inline std::filesystem::path shard_output_path(const std::filesystem::path& out,
                                               std::size_t shard, std::size_t shard_count) {
  if (shard_count == 1) return out;
  return out.string() + ".shard" + std::to_string(shard);
}

// Contiguous block-aligned ranges; the first (blocks mod S) shards get one
// extra block.
inline ShardPlan shard(std::size_t total_tokens, std::size_t shard_count,
                       std::size_t block_length, const std::filesystem::path& out = {}) {
  if (shard_count == 0) throw DomainError("shard count must be >= 1");
  if (block_length == 0) throw DomainError("block length must be >= 1");
  const std::size_t blocks = total_tokens / block_length;
  if (blocks < shard_count) {
    throw DomainError(std::to_string(blocks) + " blocks cannot fill " +
                      std::to_string(shard_count) + " shards");
  }
  ShardPlan plan;
  std::size_t next = 0;
  for (std::size_t s = 0; s < shard_count; ++s) {
    const std::size_t count = blocks / shard_count + (s < blocks % shard_count ? 1 : 0);
    ShardRange range;
    range.block_begin = next;
    range.block_count = count;
    range.token_begin = next * block_length;
    range.token_end = (s + 1 == shard_count) ? total_tokens : (next + count) * block_length;
    plan.ranges.push_back(range);
    plan.outputs.push_back(shard_output_path(out, s, shard_count));
    next += count;
  }
  return plan;
}

struct ShardOutcome {
  std::optional<EnrichmentReport> report;
  std::string error;

  bool ok() const { return report.has_value(); }
};

// Per shard: build a trie over the shard's tokens only, enrich, drop the trie.
// Shards run on up to `threads` workers; a failing shard does not stop others.
inline std::vector<ShardOutcome> enrich_sharded(const Corpus& corpus, const ShardPlan& plan,
                                                const Hyper& hyper, unsigned threads = 1) {
  hyper.validate();
  std::vector<ShardOutcome> outcomes(plan.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t s = next++; s < plan.size(); s = next++) {
      try {
        const ShardRange& range = plan.ranges.at(s);
        if (range.token_end > corpus.tokens.size() || range.token_begin > range.token_end) {
          throw DomainError("shard range outside the corpus");
        }
        const auto tokens =
            corpus.view().subspan(range.token_begin, range.token_end - range.token_begin);
        const PrefixTrie trie =
            build_trie(tokens, corpus.meta.doc_separator, hyper.k, corpus.meta.vocab_size);
        outcomes[s].report = enrich(tokens, trie, hyper, corpus.meta.vocab_size,
                                    corpus.meta.token_width_bits, plan.outputs.at(s), s);
      } catch (const std::exception& e) {
        outcomes[s].error = e.what();
      }
    }
  };
  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(plan.size())));
  std::vector<std::jthread> pool;
  for (unsigned i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  return outcomes;
}

struct EnrichmentMismatch {
  std::uint64_t record = 0;
  std::size_t level = 0;  // 1-based
  std::string detail;
};

struct VerifyReport {
  std::uint64_t records_checked = 0;
  std::vector<EnrichmentMismatch> mismatches;

  bool ok() const { return mismatches.empty(); }
};

// Re-derives `sample` randomly chosen records from the trie and compares the
// quantized pairs bit for bit. sample >= record_count checks every record.
inline VerifyReport verify_enrichment(const std::filesystem::path& enriched_path,
                                      const PrefixTrie& trie, std::uint64_t sample,
                                      std::uint64_t seed = 0) {
  const EnrichedFile file(enriched_path);
  const auto& meta = file.meta();
  if (trie.k() != meta.hyper.k) {
    throw DomainError("trie k does not match the enriched file");
  }
  std::vector<std::uint64_t> indices(file.record_count());
  std::iota(indices.begin(), indices.end(), std::uint64_t{0});
  if (sample < indices.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(indices.begin(), indices.end(), rng);
    indices.resize(sample);
    std::sort(indices.begin(), indices.end());
  }

  VerifyReport report;
  const unsigned width = meta.token_width_bits / 8;
  const std::size_t level_bytes = 2 * meta.hyper.r * width;
  std::vector<unsigned char> expected;
  for (std::uint64_t index : indices) {
    const auto actual = file.record_bytes(index);
    std::vector<TokenId> tokens(meta.hyper.L);
    for (std::size_t i = 0; i < meta.hyper.L; ++i) {
      tokens[i] = static_cast<TokenId>(detail::get_le(&actual[i * width], width));
    }
    expected.clear();
    encode_record(make_record(tokens, trie, meta.hyper, meta.token_width_bits), meta.hyper,
                  meta.token_width_bits, expected);
    ++report.records_checked;
    for (std::size_t level = 0; level < meta.hyper.k; ++level) {
      const std::size_t begin = meta.hyper.L * width + level * level_bytes;
      if (!std::equal(actual.begin() + static_cast<std::ptrdiff_t>(begin),
                      actual.begin() + static_cast<std::ptrdiff_t>(begin + level_bytes),
                      expected.begin() + static_cast<std::ptrdiff_t>(begin))) {
        report.mismatches.push_back(
            {index, level + 1, "stored pairs differ from a fresh top-r query"});
      }
    }
  }
  return report;
}

}  // namespace coconts
