// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/provider.hpp"

#include <cstdint>
#include <cstdio>

#include "nwcad/error.hpp"

namespace nwcad {

Vocabulary::Vocabulary(std::vector<std::string> tokens, TokenId eos, std::optional<TokenId> unk)
    : tokens_(std::move(tokens)), eos_(eos), unk_(unk) {
  check_arg(!tokens_.empty(), "vocabulary must not be empty");
  check_arg(eos_.index() < tokens_.size(), "eos id outside vocabulary");
  check_arg(!unk_ || unk_->index() < tokens_.size(), "unk id outside vocabulary");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto [_, inserted] = index_.emplace(tokens_[i], TokenId(static_cast<std::uint32_t>(i)));
    check_arg(inserted, "duplicate vocabulary entry '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::placeholder(std::size_t size, TokenId eos) {
  std::vector<std::string> tokens;
  tokens.reserve(size);
  for (std::size_t i = 0; i < size; ++i) tokens.push_back("t" + std::to_string(i));
  return Vocabulary(std::move(tokens), eos);
}

const std::string& Vocabulary::token(TokenId t) const {
  check_arg(t.index() < tokens_.size(), "token id outside vocabulary");
  return tokens_[t.index()];
}

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> out;
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) {
      const auto word = text.substr(i, j - i);
      if (const auto id = find(word)) {
        out.push_back(*id);
      } else if (unk_) {
        out.push_back(*unk_);
      } else {
        fail(ErrorKind::kData, "unknown word '" + std::string(word) + "'");
      }
    }
    i = j;
  }
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t == eos_) continue;
    if (!out.empty()) out += ' ';
    out += token(t);
  }
  return out;
}

std::string Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& tok : tokens_) {
    for (unsigned char c : tok) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string_view to_string(Stream s) { return s == Stream::kContext ? "ctx" : "noctx"; }

Stream stream_from_string(std::string_view name) {
  if (name == "ctx") return Stream::kContext;
  if (name == "noctx") return Stream::kNoContext;
  fail(ErrorKind::kData, "unknown stream '" + std::string(name) + "'");
}

void LogitProvider::check_prefix(std::span<const TokenId> prefix) const {
  const std::size_t n = vocab_size();
  for (TokenId t : prefix) {
    if (t.index() >= n) fail(ErrorKind::kData, "unknown token id " + std::to_string(t.value));
  }
}

}  // namespace nwcad
