// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "nwcad/backends.hpp"
#include "nwcad/decode.hpp"
#include "nwcad/error.hpp"
#include "nwcad/gate.hpp"
#include "nwcad/harness.hpp"
#include "nwcad/replay.hpp"
#include "nwcad/slices.hpp"
#include "support.hpp"

using namespace nwcad;
using nwcad::testing::Rng;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<StepLogits> random_steps(Rng& rng, std::size_t vocab, std::size_t n) {
  std::vector<StepLogits> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({LogitVector(testing::random_logits(rng, vocab)),
                   LogitVector(testing::random_logits(rng, vocab))});
  }
  return out;
}

ReplayHeader header_for(std::size_t vocab) {
  ReplayHeader h;
  h.tokenizer_hash = Vocabulary::placeholder(vocab, TokenId(0)).hash();
  h.item_id = "x";
  h.vocab_size = vocab;
  h.k = vocab;
  return h;
}

}  // namespace

TEST_CASE("make_record keeps the k largest and a floor below them") {
  const LogitVector z({1.0, 4.0, 3.0, 2.0, 0.5});
  const auto r = make_record(0, Stream::kContext, z, 2);
  REQUIRE(r.topk.size() == 2);
  CHECK(r.topk[0].first == TokenId(1));
  CHECK(r.topk[1].first == TokenId(2));
  const double expected_floor = std::log((std::exp(1.0) + std::exp(2.0) + std::exp(0.5)) / 3.0);
  CHECK(r.floor_logit == doctest::Approx(expected_floor).epsilon(1e-14));
  // Dropped mass is preserved.
  const auto p = softmax(r.expand(5));
  const auto q = softmax(z);
  CHECK(p.at(1) == doctest::Approx(q.at(1)).epsilon(1e-12));

  // Ties at the cut nudge the floor below the kept logits.
  const auto tie = make_record(0, Stream::kContext, LogitVector({2.0, 2.0, 2.0}), 1);
  CHECK(tie.topk[0].first == TokenId(0));
  CHECK(tie.floor_logit < 2.0);

  const auto full = make_record(0, Stream::kNoContext, z, 5);
  CHECK(full.expand(5) == z);
  CHECK_THROWS_AS(make_record(0, Stream::kContext, z, 0), Error);
}

TEST_CASE("store, load, store is byte-identical") {
  Rng rng(61);
  const auto dir = testing::scratch_dir("replay");
  const auto steps = random_steps(rng, 40, 5);
  replay_store(steps, 8, header_for(40), dir + "/a.jsonl");
  const auto loaded = replay_load(dir + "/a.jsonl");
  replay_write(loaded.header(), loaded.records(), dir + "/b.jsonl");
  CHECK(slurp(dir + "/a.jsonl") == slurp(dir + "/b.jsonl"));

  CHECK(loaded.steps() == 5);
  for (std::size_t t = 0; t < 5; ++t) {
    const std::vector<TokenId> prefix(t, TokenId(1));
    const auto z = loaded.logits({}, Stream::kNoContext, prefix);
    const auto& rec = loaded.records()[2 * t + 1];
    for (const auto& [tok, v] : rec.topk) CHECK(z[tok] == v);
    std::size_t at_floor = 0;
    for (double v : z.values()) at_floor += v == rec.floor_logit ? 1 : 0;
    CHECK(at_floor == 32);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("full-vocabulary capture reproduces live decoding") {
  const auto slice = build_slice(SliceGenConfig{10, 10, 10}, 21);
  const auto live = make_toy_backend(slice);
  const auto dir = testing::scratch_dir("capture");
  for (DecodeMode mode : {DecodeMode::kWithContext, DecodeMode::kNwcad, DecodeMode::kCadOnly}) {
    DecodeParams p;
    p.mode = mode;
    capture_replays(*live, slice, mode, p, 0, dir);
    const auto replay = make_replay_backend(dir, &slice);
    for (const auto& item : slice.items) {
      const auto a = decode(*live->provider_for(item), item.prompt(), p);
      const auto b = decode(*replay->provider_for(item), item.prompt(), p);
      REQUIRE(a.tokens == b.tokens);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("truncated replays stop with an underrun at the missing step") {
  Rng rng(67);
  const auto dir = testing::scratch_dir("underrun");
  replay_store(random_steps(rng, 6, 2), 6, header_for(6), dir + "/r.jsonl");
  const auto p = replay_load(dir + "/r.jsonl");
  DecodeParams params;
  params.max_new_tokens = 5;
  params.min_new_tokens = 5;
  CHECK_THROWS_WITH_AS(decode(p, EncodedPrompt{}, params), doctest::Contains("replay underrun at step 2"),
                       Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("replay parse errors") {
  ReplayHeader h = header_for(4);
  h.k = 2;
  const auto good = replay_serialize(h, {make_record(0, Stream::kContext, LogitVector({1, 2, 3, 4}), 2),
                                                     make_record(0, Stream::kNoContext, LogitVector({4, 3, 2, 1}), 2)});
  CHECK_NOTHROW(replay_parse(good, "mem"));
  std::string header = good.substr(0, good.find('\n') + 1);

  auto bad = header + R"({"step":0,"stream":"ctx","topk":[[1,2.0],[1,1.0]],"floor_logit":0.0})" "\n";
  CHECK_THROWS_WITH_AS(replay_parse(bad, "mem"), doctest::Contains("duplicate token id"), Error);

  bad = header + R"({"step":1,"stream":"ctx","topk":[[1,2.0],[2,1.0]],"floor_logit":0.0})" "\n";
  CHECK_THROWS_WITH_AS(replay_parse(bad, "mem"), doctest::Contains("monotone"), Error);

  bad = header + R"({"step":0,"stream":"ctx","topk":[[1,2.0],[2,1.0]],"floor_logit":1.5})" "\n";
  CHECK_THROWS_WITH_AS(replay_parse(bad, "mem"), doctest::Contains("floor_logit"), Error);

  bad = header + R"({"step":0,"stream":"ctx","topk":[[1,2.0],[2,1.0]],"floor_logit":0.0})" "\n";
  CHECK_THROWS_WITH_AS(replay_parse(bad, "mem"), doctest::Contains("missing its noctx"), Error);

  CHECK_THROWS_AS(replay_parse("", "mem"), Error);
  CHECK_THROWS_AS(replay_parse("{\"format\":\"other\"}\n", "mem"), Error);
  CHECK_THROWS_AS(replay_parse("not json\n", "mem"), Error);

  auto incomplete = good;
  incomplete.replace(incomplete.find("\"complete\":true"), 15, "\"complete\":false");
  CHECK_THROWS_WITH_AS(replay_parse(incomplete, "mem"), doctest::Contains("incomplete"), Error);

  const Vocabulary other({"a", "b", "c", "d"}, TokenId(0));
  CHECK_THROWS_WITH_AS(replay_parse(good, "mem", &other), doctest::Contains("tokenizer hash"), Error);
}

TEST_CASE("top-k replays keep gate diagnostics close when k >= 2K") {
  const auto slice = build_slice(SliceGenConfig{5, 5, 5}, 33);
  const auto live = make_toy_backend(slice);
  DecodeParams p;
  for (const auto& item : slice.items) {
    const auto prov = live->provider_for(item);
    const auto prompt = encode_prompt(prov->vocabulary(), item.prompt(), p.max_context_length, nullptr);
    const auto r = decode(*prov, prompt, p);
    std::vector<TokenId> path = r.tokens;
    const auto steps = capture_along_path(*prov, prompt, path);
    for (const auto& s : steps) {
      const auto full = StepSignals::compute(s.z_c, s.z_0, 50);
      const auto cut = StepSignals::compute(make_record(0, Stream::kContext, s.z_c, 128).expand(s.z_c.size()),
                                            make_record(0, Stream::kNoContext, s.z_0, 128).expand(s.z_0.size()),
                                            50);
      CHECK(std::abs(full.divergence.value - cut.divergence.value) <= 0.01);
      CHECK(std::abs(full.margin_nc - cut.margin_nc) <= 0.01);
      CHECK(std::abs(full.margin_ctx - cut.margin_ctx) <= 0.01);
    }
  }
}

TEST_CASE("divergence_step reports where a decode leaves the captured path") {
  ReplayHeader h = header_for(5);
  h.path = {TokenId(1), TokenId(2)};
  const ReplayProvider p(h, {}, Vocabulary::placeholder(5, TokenId(0)));
  CHECK_FALSE(p.divergence_step(std::vector<TokenId>{TokenId(1), TokenId(2)}).has_value());
  CHECK(p.divergence_step(std::vector<TokenId>{TokenId(1), TokenId(3)}) == 1u);
  CHECK(p.divergence_step(std::vector<TokenId>{TokenId(1), TokenId(2), TokenId(4)}) == 2u);
}
