// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "nwcad/distributions.hpp"
#include "nwcad/error.hpp"
#include "support.hpp"

using namespace nwcad;
using nwcad::testing::Rng;

namespace {

ProbVector probs(std::vector<double> v) { return ProbVector::from_values(std::move(v)); }

}  // namespace

TEST_CASE("softmax: uniform and analytic cases") {
  const auto u = softmax(LogitVector({0, 0, 0, 0}));
  for (double p : u.values()) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  const auto p = softmax(LogitVector({0.0, std::log(3.0)}));
  CHECK(p.at(0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p.at(1) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("softmax: extended-precision oracle") {
  // exp/sum evaluated at 30 significant digits.
  const double expected[] = {0.9999619121506974953765351, 0.0000009189463558744859995996478,
                             0.00003716890294663013746531356};
  const auto p = softmax(LogitVector({10.2, -3.7, 0.0}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p.at(i) - expected[i]) <= 1e-12);
}

TEST_CASE("softmax: masked entries and empty support") {
  const auto p = softmax(LogitVector({1.0, kMaskedLogit, 1.0}));
  CHECK(p.at(1) == 0.0);
  CHECK(p.at(0) == doctest::Approx(0.5));
  CHECK_THROWS_WITH_AS(softmax(LogitVector({kMaskedLogit, kMaskedLogit})), "empty support", Error);
}

TEST_CASE("logit vector rejects NaN and +inf") {
  CHECK_THROWS_AS(LogitVector({0.0, std::nan("")}), Error);
  CHECK_THROWS_AS(LogitVector({0.0, HUGE_VAL}), Error);
  CHECK_NOTHROW(LogitVector({0.0, -HUGE_VAL}));
}

TEST_CASE("softmax: normalization and shift invariance on random logits") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto z = testing::random_logits(rng, 1 + rng.index(300), rng.uniform(0.1, 20.0));
    const auto p = softmax(LogitVector(z));
    const double sum = std::accumulate(p.values().begin(), p.values().end(), 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-9);

    const double c = rng.uniform(-50.0, 50.0);
    auto shifted = z;
    for (auto& v : shifted) v += c;
    const auto q = softmax(LogitVector(shifted));
    for (std::size_t i = 0; i < z.size(); ++i) REQUIRE(std::abs(p.at(i) - q.at(i)) <= 1e-12);

    const auto ref = testing::softmax_ld(z);
    for (std::size_t i = 0; i < z.size(); ++i) {
      REQUIRE(std::abs(p.at(i) - static_cast<double>(ref[i])) <= 1e-12);
    }
    CHECK(argmax_token(LogitVector(z)) == argmax_token(p));
  }
}

TEST_CASE("top1_margin") {
  CHECK(top1_margin(probs({1, 0, 0})) == 1.0);
  CHECK(top1_margin(probs({0.25, 0.25, 0.25, 0.25})) == 0.0);
  CHECK(top1_margin(probs({0.6, 0.3, 0.1})) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(top1_margin(probs({0.1, 0.3, 0.6})) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_WITH_AS(top1_margin(probs({1.0})), doctest::Contains("margin undefined"), Error);
}

TEST_CASE("top_k ordering and ties") {
  auto t = top_k(probs({0.1, 0.7, 0.2}), 2);
  REQUIRE(t.entries.size() == 2);
  CHECK(t.entries[0].first == TokenId(1));
  CHECK(t.entries[1].first == TokenId(2));
  CHECK(t.entries[1].second == 0.2);

  t = top_k(probs({0.25, 0.25, 0.25, 0.25}), 2);
  CHECK(t.entries[0].first == TokenId(0));
  CHECK(t.entries[1].first == TokenId(1));

  t = top_k(probs({0.5, 0.5}), 10);
  CHECK(t.entries.size() == 2);
  CHECK_THROWS_AS(top_k(probs({0.5, 0.5}), 0), Error);
}

TEST_CASE("top_k with k = vocab is a sorted permutation") {
  Rng rng(11);
  const auto p = softmax(LogitVector(testing::random_logits(rng, 1000)));
  const auto t = top_k(p, 1000);
  REQUIRE(t.entries.size() == 1000);
  std::vector<std::size_t> ids;
  double sum = 0.0;
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    ids.push_back(t.entries[i].first.index());
    sum += t.entries[i].second;
    if (i > 0) CHECK(t.entries[i - 1].second >= t.entries[i].second);
  }
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) REQUIRE(ids[i] == i);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> sorted(p.values().begin(), p.values().end());
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t i = 0; i < sorted.size(); ++i) REQUIRE(t.entries[i].second == sorted[i]);
}

TEST_CASE("argmax_token") {
  CHECK(argmax_token(LogitVector({1.0, 3.0, 2.0})) == TokenId(1));
  CHECK(argmax_token(LogitVector({2.0, 2.0})) == TokenId(0));

  Rng rng(3);
  const auto z = testing::random_logits(rng, 512);
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) best = i;
  }
  CHECK(argmax_token(LogitVector(z)).index() == best);
}
