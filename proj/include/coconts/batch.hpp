#pragma once

// Mini-batch assembly from enriched records. Row b, level i (1..k) supervises
// the prediction of inputs[b][i] from the prefix inputs[b][0..i).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "coconts/approx.hpp"
#include "coconts/enrich.hpp"
#include "coconts/matrix.hpp"

namespace coconts {

enum class BatchMode { CoCoNTs, AllNTsTopR };

inline const char* to_string(BatchMode mode) {
  return mode == BatchMode::CoCoNTs ? "coconts" : "allnts-topr";
}

inline EnrichedRecord read_record(const EnrichedFile& file, std::uint64_t index) {
  return file.read_record(index);
}

// Target for one level from a (dequantized) truncation. Quantized masses may
// sum slightly above 1; they are capped at 1 before the coefficients.
inline AdjustedTarget level_target(TopR topr, TokenId realized, double gamma,
                                   BatchMode mode) {
  if (mode == BatchMode::AllNTsTopR) {
    return normalized_target(topr, realized);
  }
  topr.p = std::min(topr.p, 1.0);
  return adjusted_target(topr, realized, gamma);
}

struct Batch {
  BatchMode mode = BatchMode::CoCoNTs;
  Matrix<TokenId> inputs;       // B x L
  Matrix<TokenId> nt_targets;   // B x (L-1), shifted by one
  std::vector<std::vector<AdjustedTarget>> supervision;  // B x k
  std::optional<std::vector<DenseTargets>> dense;        // B of (k x |V|)

  std::size_t size() const { return inputs.rows; }
};

inline Batch build_batch(std::span<const EnrichedRecord> records, const EnrichedMeta& meta,
                         BatchMode mode, bool dense) {
  const Hyper& hyper = meta.hyper;
  Batch batch;
  batch.mode = mode;
  batch.inputs = Matrix<TokenId>(records.size(), hyper.L);
  batch.nt_targets = Matrix<TokenId>(records.size(), hyper.L - 1);
  batch.supervision.resize(records.size());
  if (dense) batch.dense.emplace();

  for (std::size_t b = 0; b < records.size(); ++b) {
    const EnrichedRecord& record = records[b];
    if (record.tokens.size() != hyper.L || record.levels.size() != hyper.k) {
      throw DomainError("record shape does not match the batch hyperparameters");
    }
    std::copy(record.tokens.begin(), record.tokens.end(),
              batch.inputs.data.begin() + static_cast<std::ptrdiff_t>(b * hyper.L));
    for (std::size_t t = 0; t + 1 < hyper.L; ++t) {
      batch.nt_targets(b, t) = record.tokens[t + 1];
    }
    auto& levels = batch.supervision[b];
    levels.reserve(hyper.k);
    for (std::size_t i = 0; i < hyper.k; ++i) {
      levels.push_back(level_target(record.level_topr(i, meta.token_width_bits),
                                    record.tokens[i + 1], hyper.gamma, mode));
    }
    if (dense) batch.dense->push_back(dense_targets(levels, meta.vocab_size));
  }
  return batch;
}

inline Batch build_batch(const EnrichedFile& file, std::span<const std::uint64_t> indices,
                         BatchMode mode, bool dense) {
  std::vector<EnrichedRecord> records;
  records.reserve(indices.size());
  for (auto index : indices) records.push_back(file.read_record(index));
  return build_batch(records, file.meta(), mode, dense);
}

// Bytes of the plain next-token labels for a B x L batch.
constexpr std::uint64_t nt_label_bytes(std::uint64_t batch, std::uint64_t length,
                                       std::uint64_t token_bytes) {
  return batch * length * token_bytes;
}

}  // namespace coconts
