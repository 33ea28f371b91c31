// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nwcad/provider.hpp"

namespace nwcad {

/// Both streams' full logits at one step.
struct StepLogits {
  LogitVector z_c;
  LogitVector z_0;
};

/// Logits of both streams recorded along a fixed token path: step t is the
/// query with prefix path[0..t). `path` may end with EOS.
std::vector<StepLogits> capture_along_path(const LogitProvider& provider,
                                           const EncodedPrompt& prompt,
                                           std::span<const TokenId> path);

struct ReplayHeader {
  int version = 1;
  std::size_t vocab_size = 0;
  std::size_t k = 0;
  std::string tokenizer_hash;
  TokenId eos;
  std::string item_id;
  bool complete = true;
  std::vector<TokenId> path;  // prefix the capture followed; may be empty
};

/// One (step, stream) record. Unlisted tokens take `floor_logit`.
struct ReplayRecord {
  std::size_t step = 0;
  Stream stream = Stream::kContext;
  std::vector<std::pair<TokenId, double>> topk;
  double floor_logit = 0.0;

  LogitVector expand(std::size_t vocab_size) const;
};

/// Truncates a full logit vector to its k largest entries (ties toward the
/// lower id). The floor is the log-mean-exp of the dropped entries, which
/// keeps their total softmax mass; it is nudged below the smallest kept
/// logit when ties would otherwise violate the ordering.
ReplayRecord make_record(std::size_t step, Stream stream, const LogitVector& z, std::size_t k);

/// Serves recorded logits by step index (= prefix length). Holds no cursor.
class ReplayProvider final : public LogitProvider {
 public:
  ReplayProvider(ReplayHeader header, std::vector<ReplayRecord> records, Vocabulary vocab);

  const Vocabulary& vocabulary() const override { return vocab_; }
  LogitVector logits(const EncodedPrompt& prompt, Stream stream,
                     std::span<const TokenId> prefix) const override;

  const ReplayHeader& header() const { return header_; }
  const std::vector<ReplayRecord>& records() const { return records_; }
  std::size_t steps() const { return records_.size() / 2; }

  /// First step at which `tokens` leaves the captured path, if any.
  std::optional<std::size_t> divergence_step(std::span<const TokenId> tokens) const;

 private:
  ReplayHeader header_;
  std::vector<ReplayRecord> records_;  // ctx, noctx per step, in step order
  Vocabulary vocab_;
};

/// Builds header + records from captured steps and writes the file.
void replay_store(const std::vector<StepLogits>& steps, std::size_t k, ReplayHeader header,
                  const std::string& path);

/// Writes already-built records verbatim.
void replay_write(const ReplayHeader& header, const std::vector<ReplayRecord>& records,
                  const std::string& path);

std::string replay_serialize(const ReplayHeader& header, const std::vector<ReplayRecord>& records);

/// Parses and validates a replay file. With `vocab`, its hash must match the
/// header; without, a placeholder vocabulary is used.
ReplayProvider replay_load(const std::string& path, const Vocabulary* vocab = nullptr);
ReplayProvider replay_parse(const std::string& text, const std::string& where,
                            const Vocabulary* vocab = nullptr);

}  // namespace nwcad
