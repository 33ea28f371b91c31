// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace nwcad {

/// Index into a provider's fixed vocabulary.
struct TokenId {
  std::uint32_t value = 0;

  constexpr TokenId() = default;
  constexpr explicit TokenId(std::uint32_t v) : value(v) {}
  constexpr std::size_t index() const { return value; }

  friend constexpr auto operator<=>(TokenId, TokenId) = default;
};

inline constexpr double kMaskedLogit = -std::numeric_limits<double>::infinity();

/// Unnormalized per-token scores. Entries are finite, except that -inf marks
/// a masked token. NaN and +inf are rejected at construction.
class LogitVector {
 public:
  LogitVector() = default;
  explicit LogitVector(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](TokenId t) const { return values_[t.index()]; }
  double at(std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  /// Copy with `token` set to -inf.
  LogitVector masked(TokenId token) const;

  friend bool operator==(const LogitVector&, const LogitVector&) = default;

 private:
  std::vector<double> values_;
};

/// A normalized distribution over the vocabulary.
class ProbVector {
 public:
  ProbVector() = default;

  /// Validates entries in [0,1] summing to 1 within 1e-9.
  static ProbVector from_values(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](TokenId t) const { return values_[t.index()]; }
  double at(std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

 private:
  friend ProbVector softmax(const LogitVector& z);
  explicit ProbVector(std::vector<double> values) : values_(std::move(values)) {}

  std::vector<double> values_;
};

struct TopKSet {
  /// (token, probability), probability non-increasing, ties by lower id.
  std::vector<std::pair<TokenId, double>> entries;
  std::size_t k = 0;
};

/// Max-subtracted softmax. Masked entries map to probability 0.
/// Throws when every entry is masked ("empty support").
ProbVector softmax(const LogitVector& z);

/// p_(1) - p_(2). Requires vocab_size >= 2.
double top1_margin(const ProbVector& p);

/// Largest two probabilities, in order. Requires vocab_size >= 2.
std::pair<double, double> top_two(std::span<const double> values);

/// k highest-probability entries; k larger than the vocabulary clamps.
TopKSet top_k(const ProbVector& p, std::size_t k);

/// Index of the largest entry, ties broken toward the lowest id.
TokenId argmax_token(const LogitVector& z);
TokenId argmax_token(const ProbVector& p);

}  // namespace nwcad

template <>
struct std::hash<nwcad::TokenId> {
  std::size_t operator()(nwcad::TokenId t) const noexcept {
    return std::hash<std::uint32_t>{}(t.value);
  }
};
