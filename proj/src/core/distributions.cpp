// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nwcad/error.hpp"

namespace nwcad {

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
  check_arg(!values_.empty(), "logit vector must not be empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      fail(ErrorKind::kData, "logit " + std::to_string(i) + " is not finite");
    }
  }
}

LogitVector LogitVector::masked(TokenId token) const {
  check_arg(token.index() < values_.size(), "mask token out of range");
  LogitVector out = *this;
  out.values_[token.index()] = kMaskedLogit;
  return out;
}

ProbVector ProbVector::from_values(std::vector<double> values) {
  check_arg(!values.empty(), "probability vector must not be empty");
  double sum = 0.0;
  for (double v : values) {
    check_arg(std::isfinite(v) && v >= 0.0 && v <= 1.0, "probability outside [0,1]");
    sum += v;
  }
  check_arg(std::abs(sum - 1.0) <= 1e-9, "probabilities do not sum to 1");
  return ProbVector(std::move(values));
}

ProbVector softmax(const LogitVector& z) {
  const auto v = z.values();
  const double max = *std::max_element(v.begin(), v.end());
  if (max == kMaskedLogit) fail(ErrorKind::kData, "empty support");

  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i] == kMaskedLogit ? 0.0 : std::exp(v[i] - max);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return ProbVector(std::move(out));
}

std::pair<double, double> top_two(std::span<const double> values) {
  check_arg(values.size() >= 2, "margin undefined for vocab_size < 2");
  double first = -std::numeric_limits<double>::infinity();
  double second = first;
  for (double v : values) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return {first, second};
}

double top1_margin(const ProbVector& p) {
  const auto [first, second] = top_two(p.values());
  return first - second;
}

TopKSet top_k(const ProbVector& p, std::size_t k) {
  check_arg(k >= 1, "top_k requires k >= 1");
  const std::size_t n = p.size();
  const std::size_t kk = std::min(k, n);
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  const auto vals = p.values();
  const auto before = [&](std::uint32_t a, std::uint32_t b) {
    return vals[a] > vals[b] || (vals[a] == vals[b] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                    before);
  TopKSet out;
  out.k = k;
  out.entries.reserve(kk);
  for (std::size_t i = 0; i < kk; ++i) out.entries.emplace_back(TokenId(idx[i]), vals[idx[i]]);
  return out;
}

namespace {

TokenId argmax_of(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return TokenId(static_cast<std::uint32_t>(best));
}

}  // namespace

TokenId argmax_token(const LogitVector& z) {
  const auto v = z.values();
  check_arg(!v.empty(), "argmax of empty vector");
  const TokenId best = argmax_of(v);
  if (v[best.index()] == kMaskedLogit) fail(ErrorKind::kData, "empty support");
  return best;
}

TokenId argmax_token(const ProbVector& p) { return argmax_of(p.values()); }

}  // namespace nwcad
