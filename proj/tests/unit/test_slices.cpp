// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nwcad/backends.hpp"
#include "nwcad/decode.hpp"
#include "nwcad/error.hpp"
#include "nwcad/eval.hpp"
#include "nwcad/slices.hpp"
#include "nwcad/toy_lm.hpp"
#include "support.hpp"

using namespace nwcad;

namespace {

// "who won" -> prior says bob; the context says alice.
std::shared_ptr<ToyWorld> tiny_world() {
  auto w = std::make_shared<ToyWorld>();
  w->vocab = Vocabulary({"<eos>", ".", "who", "won", "alice", "bob"}, TokenId(0));
  w->period = TokenId(1);
  w->context_strength = 12.0;
  w->unigram = std::vector<double>(6, 0.0);
  w->order2[{TokenId(2), TokenId(3)}] = SparseRow{{{TokenId(5), 3.0}}};
  w->order1[TokenId(4)] = SparseRow{{{TokenId(0), 5.0}}};
  w->order1[TokenId(5)] = SparseRow{{{TokenId(0), 5.0}}};
  w->validate();
  return w;
}

SliceGenConfig small_config() {
  SliceGenConfig c;
  c.restated = 20;
  c.distractor = 20;
  c.helpful = 20;
  return c;
}

}  // namespace

TEST_CASE("toy LM: context table steers the context stream only") {
  const auto world = tiny_world();
  const ToyLM helpful(world, 1.0);
  const auto prompt = encode_prompt(world->vocab, {"who won", "who won alice ."}, 4064, nullptr);

  DecodeParams p;
  p.mode = DecodeMode::kBaseline;
  CHECK(decode(helpful, prompt, p).text == "bob");
  p.mode = DecodeMode::kWithContext;
  CHECK(decode(helpful, prompt, p).text == "alice");

  const ToyLM neutral(world, 0.0);
  std::vector<TokenId> prefix;
  for (TokenId t : {TokenId(4), TokenId(5)}) {
    CHECK(neutral.logits(prompt, Stream::kContext, prefix) ==
          neutral.logits(prompt, Stream::kNoContext, prefix));
    prefix.push_back(t);
  }
  CHECK_THROWS_AS(ToyLM(world, 1.5), Error);
  CHECK_THROWS_AS(neutral.logits(prompt, Stream::kContext, std::vector<TokenId>{TokenId(99)}), Error);
}

TEST_CASE("toy LM answers are deterministic under repeated queries") {
  const auto world = tiny_world();
  const ToyLM lm(world, 0.7);
  const auto prompt = encode_prompt(world->vocab, {"who won", "who won alice ."}, 4064, nullptr);
  const auto first = lm.logits(prompt, Stream::kContext, {});
  for (int i = 0; i < 10; ++i) CHECK(lm.logits(prompt, Stream::kContext, {}) == first);
}

TEST_CASE("build_slice is deterministic in the seed") {
  const auto a = build_slice(small_config(), 9);
  const auto b = build_slice(small_config(), 9);
  const auto c = build_slice(small_config(), 10);
  CHECK(items_to_jsonl(a.items) == items_to_jsonl(b.items));
  CHECK(items_to_jsonl(a.items) != items_to_jsonl(c.items));
  CHECK(a.items.size() == 60);
}

TEST_CASE("generated slices pass the context checks") {
  const auto s = build_slice(small_config(), 3);
  const auto v = validate_slice(s.items);
  CHECK(v.restated == 20);
  CHECK(v.distractor == 20);
  CHECK(v.helpful == 20);
  CHECK(v.restated_containment_pct == 100.0);
  CHECK(v.helpful_containment_pct == 100.0);
  CHECK(v.distractor_exclusion_pct == 100.0);
  CHECK(v.distractor_inclusion_pct == 100.0);
  CHECK(v.all_pass());

  for (const auto& item : s.items) {
    if (item.slice == SliceLabel::kDistractor) {
      CHECK_FALSE(item.distractor.empty());
      CHECK_FALSE(contains_normalized(item.context, item.golds.front()));
    }
  }
}

TEST_CASE("slice items behave as labeled on the toy backend") {
  const auto s = build_slice(small_config(), 5);
  const auto backend = make_toy_backend(s);
  DecodeParams p;
  for (const auto& item : s.items) {
    CAPTURE(item.id);
    p.mode = DecodeMode::kBaseline;
    const auto base = decode(*backend->provider_for(item), item.prompt(), p);
    p.mode = DecodeMode::kWithContext;
    const auto ctx = decode(*backend->provider_for(item), item.prompt(), p);
    const bool base_ok = exact_match(base.text, item.golds);
    const bool ctx_ok = exact_match(ctx.text, item.golds);
    if (item.slice == SliceLabel::kRestated) {
      CHECK(base_ok);
      CHECK(ctx_ok);
    }
    if (item.slice == SliceLabel::kDistractor) CHECK(base_ok);
    if (item.slice == SliceLabel::kHelpful) {
      CHECK_FALSE(base_ok);
      CHECK(ctx_ok);
    }
  }
}

TEST_CASE("slice save/load round trip") {
  const auto s = build_slice(small_config(), 8);
  const auto dir = testing::scratch_dir("slice");
  save_slice(s, dir);
  const auto back = load_slice(dir);
  CHECK(items_to_jsonl(back.items) == items_to_jsonl(s.items));
  CHECK(back.vocabulary().hash() == s.vocabulary().hash());

  CHECK_THROWS_AS(load_slice(dir + "/missing"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("slice configs are validated") {
  SliceGenConfig c;
  c.restated = c.distractor = c.helpful = 0;
  CHECK_THROWS_AS(build_slice(c, 1), Error);
  c = SliceGenConfig{};
  c.year_pool = 4;
  CHECK_THROWS_AS(build_slice(c, 1), Error);
  c = SliceGenConfig{};
  c.flip_fraction = 1.5;
  CHECK_THROWS_AS(build_slice(c, 1), Error);
}

TEST_CASE("scenario files load into scripted slices") {
  testing::Rng rng(12);
  ScenarioSet set{Vocabulary::placeholder(9, TokenId(0)), {}};
  for (int i = 0; i < 3; ++i) {
    set.scripts.push_back(testing::random_scenario(rng, 9, 4, "sc-" + std::to_string(i)));
  }
  const auto dir = testing::scratch_dir("scen");
  const auto path = dir + "/set.json";
  save_scenarios(set, path);
  const auto loaded = load_scenarios(path);
  REQUIRE(loaded.scripts.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(loaded.scripts[i].steps.size() == 4);
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(loaded.scripts[i].steps[t].z_c == set.scripts[i].steps[t].z_c);
      CHECK(loaded.scripts[i].steps[t].z_0 == set.scripts[i].steps[t].z_0);
    }
  }

  const auto slice = load_slice(path);
  CHECK(slice.items.size() == 3);
  CHECK(slice.items[0].slice == SliceLabel::kScenario);
  const auto backend = make_backend("auto", slice);
  CHECK(backend->name() == "scripted");
  const auto prov = backend->provider_for(slice.items[1]);
  CHECK(prov->logits({}, Stream::kContext, {}) == set.scripts[1].steps[0].z_c);

  std::ofstream(dir + "/bad.json") << "{\"format\": \"nwcad-scenarios\", \"version\": 7}";
  CHECK_THROWS_AS(load_slice(dir + "/bad.json"), Error);
  CHECK_THROWS_AS(make_backend("gpu", slice), Error);
  std::filesystem::remove_all(dir);
}
