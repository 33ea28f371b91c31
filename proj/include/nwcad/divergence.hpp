// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "nwcad/distributions.hpp"

namespace nwcad {

enum class DivergenceMethod { kFull, kTopKUnion };

/// Base-2 Jensen-Shannon divergence between the two streams, in [0, 1].
struct DivergenceValue {
  double value = 0.0;
  DivergenceMethod method = DivergenceMethod::kFull;
  std::size_t k = 0;  // union size parameter; 0 for kFull
};

/// Exact JS over the full vocabulary. Zero-probability terms contribute 0.
DivergenceValue js_full(const ProbVector& p, const ProbVector& q);

/// JS restricted to top_k(p) U top_k(q), each side renormalized over the
/// union before the divergence is taken. When the union covers the whole
/// vocabulary this is exactly js_full.
DivergenceValue js_topk_union(const ProbVector& p, const ProbVector& q, std::size_t k);

/// The neutrality predicate: D <= tau (inclusive).
inline bool is_neutral(const DivergenceValue& d, double tau) { return d.value <= tau; }

}  // namespace nwcad
