// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "nwcad/error.hpp"
#include "nwcad/harness.hpp"
#include "support.hpp"

using namespace nwcad;

namespace {

const Slice& shared_slice() {
  static const Slice s = build_slice(SliceGenConfig{12, 12, 12}, 77);
  return s;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("parallel_for covers every index and rethrows the lowest failure") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) REQUIRE(h == 1);

  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 17 || i == 60) throw std::runtime_error("boom " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "boom 17");
  }
  CHECK_NOTHROW(parallel_for(0, 4, [](std::size_t) {}));
}

TEST_CASE("bench is identical across worker counts") {
  const auto backend = make_toy_backend(shared_slice());
  DecodeParams p;
  const auto one = bench(*backend, shared_slice(), p, {1});
  const auto many = bench(*backend, shared_slice(), p, {6});
  CHECK(items_jsonl(one, shared_slice()).size() > 0);
  REQUIRE(one.outcomes.size() == many.outcomes.size());
  for (std::size_t i = 0; i < one.outcomes.size(); ++i) {
    CHECK(one.outcomes[i].generation.tokens == many.outcomes[i].generation.tokens);
    CHECK(one.outcomes[i].prediction == many.outcomes[i].prediction);
  }
  CHECK(accuracy_csv(one) == accuracy_csv(many));
  CHECK(routing_csv(one) == routing_csv(many));
  CHECK(one.invariant_failures.empty());
}

TEST_CASE("bench report accounting") {
  const auto backend = make_toy_backend(shared_slice());
  DecodeParams p;
  const auto r = bench(*backend, shared_slice(), p);
  CHECK(check_report_invariants(r).empty());
  CHECK(r.bc_candidates == 24);
  CHECK(r.bc_kept <= r.bc_candidates);
  std::size_t n = 0;
  double weighted = 0.0;
  for (const auto& [_, s] : r.per_slice) {
    n += s.n;
    weighted += s.accuracy() * static_cast<double>(s.n);
  }
  CHECK(r.combined.n == n);
  CHECK(r.combined.accuracy() == doctest::Approx(weighted / static_cast<double>(n)).epsilon(1e-12));
  CHECK(r.routing.pct_no_context + r.routing.pct_context + r.routing.pct_fallback ==
        doctest::Approx(100.0).epsilon(1e-4));

  // A tampered report is caught.
  auto broken = r;
  broken.combined.correct += 1;
  CHECK_FALSE(check_report_invariants(broken).empty());
}

TEST_CASE("report renderers") {
  const auto backend = make_toy_backend(shared_slice());
  DecodeParams p;
  const auto r = bench(*backend, shared_slice(), p);
  const auto acc = lines_of(accuracy_csv(r));
  CHECK(acc.front() == "slice,n,accuracy");
  CHECK(acc.back().rfind("combined,", 0) == 0);
  CHECK(acc.size() == 5);
  const auto routing = lines_of(routing_csv(r));
  CHECK(routing.front() == "slice,no_context,context,fallback,any_fallback");
  CHECK(routing.back().rfind("all,", 0) == 0);
  CHECK(lines_of(items_jsonl(r, shared_slice())).size() == r.outcomes.size());
  CHECK(summary_text(r).find("nwcad") != std::string::npos);

  const auto dir = testing::scratch_dir("report");
  write_report(r, shared_slice(), dir, "run");
  for (const char* ext : {".items.jsonl", ".accuracy.csv", ".routing.csv"}) {
    CHECK(std::filesystem::exists(dir + "/run" + ext));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("a single-cell sweep equals a direct evaluation") {
  const auto backend = make_toy_backend(shared_slice());
  DecodeParams p;
  p.gate.tau = 0.2;
  const auto direct = bench(*backend, shared_slice(), p);
  const auto sw = sweep(*backend, shared_slice(), p, SweepGrid{{0.2}, {}, {}});
  REQUIRE(sw.cells.size() == 1);
  const auto& cell = sw.cells.front().report;
  CHECK(accuracy_csv(cell) == accuracy_csv(direct));
  CHECK(routing_csv(cell) == routing_csv(direct));
  REQUIRE(cell.outcomes.size() == direct.outcomes.size());
  for (std::size_t i = 0; i < cell.outcomes.size(); ++i) {
    CHECK(cell.outcomes[i].item_index == direct.outcomes[i].item_index);
    CHECK(cell.outcomes[i].generation.tokens == direct.outcomes[i].generation.tokens);
  }
}

TEST_CASE("sweep table layouts") {
  const auto backend = make_toy_backend(shared_slice());
  DecodeParams p;
  const auto tau = sweep(*backend, shared_slice(), p, SweepGrid{{0.1, 0.2, 0.3, 0.5}, {}, {}});
  auto rows = lines_of(sweep_table_csv(tau));
  CHECK(rows.size() == 5);
  CHECK(rows.front() == "tau,restated,distractor,helpful,overall");
  CHECK(rows[1].rfind("0.1,", 0) == 0);
  CHECK(tau.monotonicity_violations.empty());
  CHECK(tau.monotone_pairs == 3);
  CHECK(lines_of(sweep_stage1_csv(tau)).front() == "tau,kappa_pri,kappa_ctx,stage1_frozen");

  const auto pri = sweep(*backend, shared_slice(), p, SweepGrid{{}, {0.2, 0.3, 0.5}, {}});
  rows = lines_of(sweep_table_csv(pri));
  CHECK(rows.front() == "kappa_pri,helpful,restated,distractor");
  CHECK(rows.size() == 4);
  CHECK(pri.monotonicity_violations.empty());

  const auto ctx = sweep(*backend, shared_slice(), p, SweepGrid{{}, {}, {0.0, 0.05, 0.1}});
  rows = lines_of(sweep_table_csv(ctx));
  CHECK(rows.front() == "kappa_ctx,restated,distractor,helpful,combined");

  const auto grid = sweep(*backend, shared_slice(), p, SweepGrid{{0.2, 0.3}, {0.3}, {0.05, 0.1}});
  rows = lines_of(sweep_table_csv(grid));
  CHECK(rows.front() == "tau,kappa_pri,kappa_ctx,restated,distractor,helpful,overall");
  CHECK(rows.size() == 5);
  CHECK(grid.cells[1].gate.kappa_ctx == 0.1);  // kappa_ctx varies fastest
}

TEST_CASE("stage-1 counts on frozen traces are monotone in the thresholds") {
  const auto backend = make_toy_backend(shared_slice());
  DecodeParams p;
  const auto sel = select_items(*backend, shared_slice(), p, {});
  std::vector<std::size_t> all(shared_slice().items.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto frozen = freeze_baseline(*backend, shared_slice(), all, sel.baseline, p);
  std::size_t prev = 0;
  for (double tau : {0.0, 0.1, 0.2, 0.3, 0.5, 1.0}) {
    const auto n = stage1_count(frozen, GateConfig{tau, 0.3, 0.05, 50});
    CHECK(n >= prev);
    prev = n;
  }
  prev = SIZE_MAX;
  for (double k : {0.0, 0.3, 0.6, 0.9}) {
    const auto n = stage1_count(frozen, GateConfig{0.3, k, 0.05, 50});
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("latency plumbing") {
  const auto backend = make_toy_backend(shared_slice());
  DecodeParams p;
  std::vector<std::size_t> items = {0, 1, 2, 3};
  const auto pair = measure_latency(*backend, shared_slice(), items, p, DecodeMode::kNwcad,
                                    DecodeMode::kCadOnly, 2);
  CHECK(pair.sec_per_token_a > 0.0);
  CHECK(pair.sec_per_token_b > 0.0);
  CHECK(pair.ratio == doctest::Approx(pair.sec_per_token_a / pair.sec_per_token_b));
  const auto rows = lines_of(latency_csv(std::vector<LatencyPair>{pair}));
  CHECK(rows.front() == "pair,sec_per_token_a,sec_per_token_b,ratio");
  CHECK(rows[1].rfind("nwcad/cad,", 0) == 0);
}
