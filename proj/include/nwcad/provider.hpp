// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nwcad/distributions.hpp"

namespace nwcad {

/// Whitespace tokenizer over a fixed word list.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> tokens, TokenId eos, std::optional<TokenId> unk = {});

  /// Vocabulary of placeholder names "t0".."t{n-1}" for scripted scenarios.
  static Vocabulary placeholder(std::size_t size, TokenId eos);

  std::size_t size() const { return tokens_.size(); }
  TokenId eos() const { return eos_; }
  std::optional<TokenId> unk() const { return unk_; }
  const std::string& token(TokenId t) const;
  std::optional<TokenId> find(std::string_view word) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Splits on ASCII whitespace. Unknown words map to `unk`, or throw when
  /// the vocabulary has none.
  std::vector<TokenId> encode(std::string_view text) const;

  /// Space-joined tokens, EOS omitted.
  std::string decode(std::span<const TokenId> tokens) const;

  /// FNV-1a over the newline-joined token list, as 16 hex digits.
  std::string hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId eos_;
  std::optional<TokenId> unk_;
};

enum class Stream { kContext, kNoContext };

std::string_view to_string(Stream s);
Stream stream_from_string(std::string_view name);

/// Question and context as text, before tokenization.
struct PromptPair {
  std::string question;
  std::string context;
};

/// The context stream sees context + question + prefix; the no-context
/// stream sees question + prefix.
struct EncodedPrompt {
  std::vector<TokenId> question;
  std::vector<TokenId> context;
};

/// Source of next-token logits for either stream.
///
/// Implementations are immutable after construction and must be safe to
/// query concurrently. Logits are a deterministic function of
/// (prompt, stream, prefix) and always have length vocab_size().
class LogitProvider {
 public:
  virtual ~LogitProvider() = default;

  virtual const Vocabulary& vocabulary() const = 0;

  virtual LogitVector logits(const EncodedPrompt& prompt, Stream stream,
                             std::span<const TokenId> prefix) const = 0;

  std::size_t vocab_size() const { return vocabulary().size(); }
  TokenId eos() const { return vocabulary().eos(); }

 protected:
  /// Throws kData for ids outside the vocabulary.
  void check_prefix(std::span<const TokenId> prefix) const;
};

}  // namespace nwcad
