// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "nwcad/error.hpp"
#include "nwcad/eval.hpp"
#include "nwcad/slices.hpp"

using namespace nwcad;

namespace {

GenerationResult run_with(const std::string& text, std::vector<double> margins, double seconds = 0.0) {
  GenerationResult r;
  r.text = text;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    StepRecord rec;
    rec.step_index = i;
    rec.decision.margin_nc = margins[i];
    rec.per_step_seconds = seconds;
    r.trace.push_back(rec);
  }
  return r;
}

GenerationResult routed(std::vector<Route> routes, double seconds = 1e-3) {
  GenerationResult r;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    StepRecord rec;
    rec.step_index = i;
    rec.decision.route = routes[i];
    rec.per_step_seconds = seconds;
    r.trace.push_back(rec);
  }
  return r;
}

QAItem item_with(std::vector<std::string> golds) {
  QAItem item;
  item.id = "q";
  item.golds = std::move(golds);
  return item;
}

}  // namespace

TEST_CASE("squad_normalize examples") {
  CHECK(squad_normalize("The Answer!") == "answer");
  CHECK(squad_normalize("") == "");
  CHECK(squad_normalize("March 1, 1781") == "march 1 1781");
  CHECK(squad_normalize("  a  theatre\tanthem ") == "theatre anthem");
  CHECK(squad_normalize("\xE2\x80\x9CParis\xE2\x80\x9D") == "paris");
}

TEST_CASE("squad_normalize agrees with the reference normalizer corpus") {
  std::ifstream in(std::string(NWCAD_TEST_DATA_DIR) + "/squad_em_corpus.json");
  REQUIRE(in.good());
  const auto corpus = nlohmann::json::parse(in);
  REQUIRE(corpus.size() == 200);
  std::size_t agree = 0;
  for (const auto& c : corpus) {
    const auto pred = c["prediction"].get<std::string>();
    const auto gold = c["gold"].get<std::string>();
    const bool ok = squad_normalize(pred) == c["normalized_prediction"].get<std::string>() &&
                    squad_normalize(gold) == c["normalized_gold"].get<std::string>() &&
                    exact_match(pred, std::vector<std::string>{gold}) == c["exact_match"].get<bool>();
    if (!ok) MESSAGE("disagreement on: " << pred << " / " << gold);
    agree += ok ? 1 : 0;
  }
  CHECK(agree == corpus.size());
}

TEST_CASE("exact_match on the qualitative examples") {
  using V = std::vector<std::string>;
  CHECK(exact_match("Michael Gambon", V{"Michael Gambon"}));
  CHECK_FALSE(exact_match("Richard Harris", V{"Michael Gambon"}));
  CHECK_FALSE(exact_match("1978", V{"January 1, 1979"}));
  CHECK(exact_match("January 1, 1979", V{"January 1, 1979"}));
  CHECK(exact_match("Sam Elliott", V{"Sam Elliott"}));
  CHECK_FALSE(exact_match("Arlen Ness", V{"Sam Elliott"}));
  CHECK_FALSE(exact_match("Woody Harrelson", V{"Sam Elliott"}));
  CHECK(exact_match("the 1781", V{"1781"}));
  CHECK(exact_match("x", V{"y", "X."}));
  CHECK_THROWS_AS(exact_match("x", V{}), Error);
}

TEST_CASE("extract_answer") {
  CHECK(extract_answer("Answer: Sam Elliott") == "Sam Elliott");
  CHECK(extract_answer("Reasoning...\nAnswer: X\nAnswer: Y") == "Y");
  CHECK(extract_answer("\n\nParis is the capital.") == "Paris is the capital.");
  CHECK(extract_answer("") == "");
  CHECK(extract_answer("Answer:\n  Rome \nmore") == "Rome");
}

TEST_CASE("contains_normalized respects word boundaries") {
  CHECK(contains_normalized("It was in 1978, they said.", "1978"));
  CHECK_FALSE(contains_normalized("It was in 19781.", "1978"));
  CHECK(contains_normalized("Hello, The Beatles!", "beatles"));
  CHECK_FALSE(contains_normalized("anything", ""));
}

TEST_CASE("bc_filter") {
  const auto item = item_with({"paris"});
  const auto wrong = run_with("rome", {1.0, 1.0});
  const auto good = run_with("paris", {0.9, 0.85, 0.95, 0.9});
  const auto dip = run_with("paris", {0.9, 0.9, 0.9, 0.9, 0.9, 0.79, 0.9});
  const auto late_dip = run_with("paris", {0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.1});
  const std::vector<BaselineRun> runs = {{&item, &wrong}, {&item, &good}, {&item, &dip}, {&item, &late_dip}};
  CHECK(bc_filter(runs) == std::vector<std::size_t>{1, 3});

  // Order invariance: the same runs reversed keep the same set.
  std::vector<BaselineRun> rev(runs.rbegin(), runs.rend());
  CHECK(bc_filter(rev) == std::vector<std::size_t>{0, 2});

  const std::vector<BaselineRun> missing = {{&item, nullptr}};
  CHECK_THROWS_AS(bc_filter(missing), Error);
  GenerationResult no_margin = good;
  no_margin.trace[0].decision.margin_nc.reset();
  const std::vector<BaselineRun> bad = {{&item, &no_margin}};
  CHECK_THROWS_AS(bc_filter(bad), Error);
}

TEST_CASE("routing_stats") {
  using R = Route;
  std::vector<GenerationResult> all_nc = {routed({R::kNoContext, R::kNoContext})};
  auto s = routing_stats(all_nc);
  CHECK(s.pct_no_context == 100.0);
  CHECK(s.pct_context == 0.0);
  CHECK(s.pct_fallback == 0.0);
  CHECK(s.pct_any_fallback == 0.0);

  std::vector<GenerationResult> two = {routed({R::kNoContext, R::kContext, R::kFallback}),
                                       routed({R::kContext})};
  s = routing_stats(two);
  CHECK(s.pct_any_fallback == 50.0);
  CHECK(s.pct_fallback == 25.0);
  CHECK(s.pct_no_context + s.pct_context + s.pct_fallback == doctest::Approx(100.0));
  CHECK(s.steps == 4);
  CHECK(s.traces == 2);

  CHECK_THROWS_AS(routing_stats(std::vector<GenerationResult>{}), Error);
}

TEST_CASE("latency_ratio") {
  std::vector<GenerationResult> a = {routed({Route::kContext, Route::kContext}, 2e-3)};
  std::vector<GenerationResult> b = {routed({Route::kContext, Route::kContext, Route::kContext}, 1e-3)};
  CHECK(latency_ratio(a, a) == 1.0);
  CHECK(latency_ratio(a, b) == doctest::Approx(2.0));
  std::vector<GenerationResult> zero = {routed({Route::kContext}, 0.0)};
  CHECK_THROWS_AS(latency_ratio(a, zero), Error);
}

TEST_CASE("validate_slice flags leaking contexts") {
  QAItem restated = item_with({"paris"});
  restated.slice = SliceLabel::kRestated;
  restated.context = "the capital is paris .";
  QAItem distractor = item_with({"1979"});
  distractor.slice = SliceLabel::kDistractor;
  distractor.distractor = "1978";
  distractor.context = "announced in 1978 , not 1979 .";
  const std::vector<QAItem> items = {restated, distractor};
  const auto v = validate_slice(items);
  CHECK(v.restated_containment_pct == 100.0);
  CHECK(v.distractor_exclusion_pct == 0.0);
  CHECK(v.distractor_inclusion_pct == 100.0);
  CHECK_FALSE(v.all_pass());
  CHECK(kReportedDistractorExclusionPct == 99.3);
  CHECK(kReportedDistractorInclusionPct == 98.5);
}
