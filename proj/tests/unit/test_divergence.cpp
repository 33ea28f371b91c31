// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "nwcad/divergence.hpp"
#include "nwcad/error.hpp"
#include "support.hpp"

using namespace nwcad;
using nwcad::testing::Rng;

namespace {

ProbVector probs(std::vector<double> v) { return ProbVector::from_values(std::move(v)); }

std::vector<long double> widen(const ProbVector& p) { return {p.values().begin(), p.values().end()}; }

}  // namespace

TEST_CASE("js_full: fixed cases") {
  const auto p = probs({0.2, 0.3, 0.5});
  CHECK(js_full(p, p).value == 0.0);
  CHECK(js_full(probs({1, 0}), probs({0, 1})).value == doctest::Approx(1.0).epsilon(1e-15));

  // Term-by-term KL sums at 30 digits.
  const double d = js_full(probs({0.5, 0.5}), probs({0.9, 0.1})).value;
  CHECK(std::abs(d - 0.1467931024360520075980246) <= 1e-10);

  CHECK_THROWS_AS(js_full(probs({1.0}), probs({0.5, 0.5})), Error);
}

TEST_CASE("js_full: symmetry, bounds and extended-precision agreement") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.index(200);
    const auto p = softmax(LogitVector(testing::random_logits(rng, n, rng.uniform(0.1, 6.0))));
    const auto q = softmax(LogitVector(testing::random_logits(rng, n, rng.uniform(0.1, 6.0))));
    const double d = js_full(p, q).value;
    REQUIRE(d >= 0.0);
    REQUIRE(d <= 1.0 + 1e-9);
    REQUIRE(std::abs(d - js_full(q, p).value) <= 1e-12);
    REQUIRE(std::abs(d - static_cast<double>(testing::js_ld(widen(p), widen(q)))) <= 1e-12);
    // Union covers the support.
    REQUIRE(std::abs(js_topk_union(p, q, n).value - d) <= 1e-12);
    REQUIRE(js_topk_union(p, p, 1 + rng.index(n)).value == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("js_topk_union: metadata and argument checks") {
  const auto p = probs({0.7, 0.2, 0.1});
  const auto q = probs({0.1, 0.2, 0.7});
  const auto d = js_topk_union(p, q, 1);
  CHECK(d.method == DivergenceMethod::kTopKUnion);
  CHECK(d.k == 1);
  // Union {0, 2} renormalized: [7/8, 1/8] vs [1/8, 7/8].
  const auto ref = testing::js_ld({0.875L, 0.125L}, {0.125L, 0.875L});
  CHECK(std::abs(d.value - static_cast<double>(ref)) <= 1e-12);
  CHECK_THROWS_AS(js_topk_union(p, q, 0), Error);
}

TEST_CASE("js_topk_union: peaked pairs stay close to the full value") {
  Rng rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [p, q] = testing::peaked_pair(rng, 1000, 0.01);
    const double full = js_full(p, q).value;
    const double approx = js_topk_union(p, q, 50).value;
    REQUIRE(std::abs(full - approx) <= 0.01);
    if (std::abs(full - 0.3) > 0.01) REQUIRE(is_neutral({full}, 0.3) == is_neutral({approx}, 0.3));
  }
}

TEST_CASE("is_neutral boundary is inclusive") {
  CHECK(is_neutral({0.0}, 0.3));
  CHECK(is_neutral({0.3}, 0.3));
  CHECK_FALSE(is_neutral({0.31}, 0.3));
}
