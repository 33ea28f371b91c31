// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nwcad/error.hpp"

namespace nwcad {
namespace {

// Half of KL(a || m) + half of KL(b || m), m the midpoint, in bits.
// `scale_a` and `scale_b` renormalize restricted vectors in place.
template <typename Indexer>
double js_bits(std::size_t n, Indexer&& pair_at, double scale_a, double scale_b) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [ra, rb] = pair_at(i);
    const double a = ra * scale_a;
    const double b = rb * scale_b;
    const double m = 0.5 * (a + b);
    if (a > 0.0) total += 0.5 * a * std::log2(a / m);
    if (b > 0.0) total += 0.5 * b * std::log2(b / m);
  }
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace

DivergenceValue js_full(const ProbVector& p, const ProbVector& q) {
  check_arg(p.size() == q.size(), "vocabulary size mismatch in divergence");
  const auto pv = p.values();
  const auto qv = q.values();
  const double v = js_bits(
      pv.size(), [&](std::size_t i) { return std::pair{pv[i], qv[i]}; }, 1.0, 1.0);
  return {v, DivergenceMethod::kFull, 0};
}

DivergenceValue js_topk_union(const ProbVector& p, const ProbVector& q, std::size_t k) {
  check_arg(p.size() == q.size(), "vocabulary size mismatch in divergence");
  check_arg(k >= 1, "js_topk_union requires K >= 1");
  if (k >= p.size()) return {js_full(p, q).value, DivergenceMethod::kTopKUnion, k};

  std::vector<std::uint32_t> ids;
  ids.reserve(2 * k);
  for (const auto& [t, _] : top_k(p, k).entries) ids.push_back(t.value);
  for (const auto& [t, _] : top_k(q, k).entries) ids.push_back(t.value);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  if (ids.size() == p.size()) return {js_full(p, q).value, DivergenceMethod::kTopKUnion, k};

  double mass_p = 0.0;
  double mass_q = 0.0;
  for (std::uint32_t i : ids) {
    mass_p += p.at(i);
    mass_q += q.at(i);
  }
  const double v = js_bits(
      ids.size(), [&](std::size_t j) { return std::pair{p.at(ids[j]), q.at(ids[j])}; },
      1.0 / mass_p, 1.0 / mass_q);
  return {v, DivergenceMethod::kTopKUnion, k};
}

}  // namespace nwcad
