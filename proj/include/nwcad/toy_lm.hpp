// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nwcad/provider.hpp"

namespace nwcad {

/// Sparse logit row: listed tokens take the given value, the rest fall back
/// to the unigram row.
struct SparseRow {
  std::vector<std::pair<TokenId, double>> entries;
};

/// History for the n-gram lookups: the last two tokens of question + prefix.
struct History {
  std::optional<TokenId> prev;  // second to last
  std::optional<TokenId> last;

  static History of(std::span<const TokenId> question, std::span<const TokenId> prefix);
};

/// Shared parametric knowledge of the toy LM: a backoff n-gram table of
/// order <= 2 (order-2 row, then order-1 row, then the dense unigram row).
struct ToyWorld {
  Vocabulary vocab;
  TokenId period;  // sentence delimiter inside contexts; read as end-of-answer
  double context_strength = 12.0;
  std::vector<double> unigram;
  std::map<TokenId, SparseRow> order1;
  std::map<std::pair<TokenId, TokenId>, SparseRow> order2;

  void validate() const;

  /// Dense prior logits for `h`.
  LogitVector prior(const History& h) const;

  void save(const std::string& path) const;
  static ToyWorld load(const std::string& path);
};

/// Next-token statistics induced from a tokenized context: within each
/// sentence, every (token) and (token, token) history counts the token that
/// follows it, with the sentence end counted as EOS.
class ContextTable {
 public:
  static ContextTable induce(std::span<const TokenId> context, TokenId period, TokenId eos);

  /// Relative frequencies of continuations after `h`, order 2 first, then
  /// order 1. Empty when neither history occurs in the context.
  std::vector<std::pair<TokenId, double>> row(const History& h) const;

 private:
  std::map<TokenId, std::map<TokenId, int>> order1_;
  std::map<std::pair<TokenId, TokenId>, std::map<TokenId, int>> order2_;
};

/// Table-driven stand-in for an LLM. The no-context stream reads the prior;
/// the context stream adds blend_lambda * context_strength * frequency for
/// continuations the context supports after the current history.
class ToyLM final : public LogitProvider {
 public:
  ToyLM(std::shared_ptr<const ToyWorld> world, double blend_lambda);

  const Vocabulary& vocabulary() const override { return world_->vocab; }
  LogitVector logits(const EncodedPrompt& prompt, Stream stream,
                     std::span<const TokenId> prefix) const override;

  double blend_lambda() const { return blend_lambda_; }

 private:
  std::shared_ptr<const ToyWorld> world_;
  double blend_lambda_;
};

}  // namespace nwcad
