// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nwcad/backends.hpp"
#include "nwcad/decode.hpp"
#include "nwcad/eval.hpp"
#include "nwcad/gate.hpp"
#include "nwcad/replay.hpp"
#include "nwcad/slices.hpp"

namespace nwcad {

/// Runs fn(0..n-1) on up to `jobs` threads. Results must be written by
/// index; the first exception (lowest index) is rethrown after all workers
/// finish.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct SliceScore {
  std::size_t n = 0;
  std::size_t correct = 0;

  /// Percent; 0 when n == 0.
  double accuracy() const;
};

struct ItemOutcome {
  std::size_t item_index = 0;  // into Slice::items
  std::string prediction;
  bool correct = false;
  GenerationResult generation;
};

struct EvalReport {
  DecodeMode mode = DecodeMode::kNwcad;
  GateConfig gate;
  FallbackKind fallback;
  std::map<SliceLabel, SliceScore> per_slice;
  SliceScore combined;
  RoutingSummary routing;
  std::map<SliceLabel, RoutingSummary> routing_by_slice;
  std::vector<ItemOutcome> outcomes;  // slice item order
  std::size_t bc_candidates = 0;      // neutral items considered by the filter
  std::size_t bc_kept = 0;
  std::vector<std::string> invariant_failures;
};

struct BenchOptions {
  std::size_t jobs = 1;
  /// Restrict neutral slices (restated, distractor) to baseline-correct
  /// items before scoring. Helpful and scenario items are always scored.
  bool bc_filter = true;
  double bc_threshold = 0.8;
  std::size_t bc_prefix_len = 8;
};

/// Baseline decode of every item, then the item subset to score.
struct Selection {
  std::vector<GenerationResult> baseline;  // per slice item
  std::vector<std::size_t> items;          // indices into Slice::items
  std::size_t bc_candidates = 0;
  std::size_t bc_kept = 0;
};

Selection select_items(const Backend& backend, const Slice& slice, const DecodeParams& params,
                       const BenchOptions& options);

/// Decodes `items` in `params.mode` and aggregates. Invariant checks are
/// run and their failures recorded on the report.
EvalReport evaluate(const Backend& backend, const Slice& slice, std::span<const std::size_t> items,
                    const DecodeParams& params, std::size_t jobs = 1);

/// select_items followed by evaluate.
EvalReport bench(const Backend& backend, const Slice& slice, const DecodeParams& params,
                 const BenchOptions& options = {});

/// Routing shares sum to 100 within 0.01, any-fallback matches a separate
/// count, combined accuracy is the count-weighted mean of the slices.
std::vector<std::string> check_report_invariants(const EvalReport& report);

/// Threshold grid. An empty axis uses the value from the base parameters.
struct SweepGrid {
  std::vector<double> tau;
  std::vector<double> kappa_pri;
  std::vector<double> kappa_ctx;
};

/// Baseline decode paths with both streams' logits at every step, used to
/// re-route offline without re-decoding.
struct FrozenTrace {
  std::size_t item_index = 0;
  std::vector<StepSignals> steps;
};

std::vector<FrozenTrace> freeze_baseline(const Backend& backend, const Slice& slice,
                                         std::span<const std::size_t> items,
                                         std::span<const GenerationResult> baseline,
                                         const DecodeParams& params, std::size_t jobs = 1);

/// Number of frozen steps on which Stage 1 fires under `gate`.
std::size_t stage1_count(std::span<const FrozenTrace> traces, const GateConfig& gate);

struct SweepCell {
  GateConfig gate;
  EvalReport report;
  std::size_t stage1_frozen = 0;
};

struct SweepResult {
  std::vector<std::string> varied;  // subset of {"tau", "kappa_pri", "kappa_ctx"}, grid order
  std::vector<SweepCell> cells;     // tau outermost, kappa_ctx innermost
  std::size_t monotone_pairs = 0;
  std::vector<std::string> monotonicity_violations;
};

/// One evaluation per grid cell. The baseline pass and BC selection are
/// shared by all cells.
SweepResult sweep(const Backend& backend, const Slice& slice, const DecodeParams& params,
                  const SweepGrid& grid, const BenchOptions& options = {});

struct LatencyPair {
  DecodeMode mode_a = DecodeMode::kNwcad;
  DecodeMode mode_b = DecodeMode::kCoCoAOnly;
  double sec_per_token_a = 0.0;
  double sec_per_token_b = 0.0;
  double ratio = 0.0;
};

/// Decodes the same items in both modes, `rounds` times, after one untimed
/// warm-up decode per item. Items alternate between A B B A and B A A B
/// order. Reports sec/token per mode and their ratio.
LatencyPair measure_latency(const Backend& backend, const Slice& slice,
                            std::span<const std::size_t> items, const DecodeParams& params,
                            DecodeMode mode_a, DecodeMode mode_b, std::size_t rounds = 1);

// Report rendering. Column layouts are documented in README.md.

std::string accuracy_csv(const EvalReport& report);
std::string routing_csv(const EvalReport& report);
std::string items_jsonl(const EvalReport& report, const Slice& slice);
std::string summary_text(const EvalReport& report);
std::string sweep_table_csv(const SweepResult& result);
std::string sweep_stage1_csv(const SweepResult& result);
std::string latency_csv(std::span<const LatencyPair> pairs);

/// Writes <dir>/<stem>.items.jsonl, .accuracy.csv and .routing.csv.
void write_report(const EvalReport& report, const Slice& slice, const std::string& dir,
                  const std::string& stem);

/// Records each item's live decode path in `mode` and stores it as
/// <dir>/<item id>.replay.jsonl. k = 0 stores the full vocabulary.
void capture_replays(const Backend& backend, const Slice& slice, DecodeMode mode,
                     const DecodeParams& params, std::size_t k, const std::string& dir,
                     std::size_t jobs = 1);

}  // namespace nwcad
