// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nwcad/decode.hpp"
#include "nwcad/slices.hpp"

namespace nwcad {

/// SQuAD answer normalization: lowercase, drop punctuation, drop the
/// articles a/an/the as whole words, collapse whitespace. Lowercasing is
/// ASCII-only; common non-ASCII punctuation (general punctuation block,
/// guillemets, CJK and fullwidth marks) is dropped along with ASCII.
std::string squad_normalize(std::string_view s);

/// True iff the normalized prediction equals some normalized gold.
bool exact_match(std::string_view prediction, std::span<const std::string> golds);

/// Text after the last "Answer:" marker (its first non-empty line), or the
/// first non-empty line when there is no marker. Trimmed.
std::string extract_answer(std::string_view generation_text);

/// Whether `needle` occurs in `haystack` on word boundaries after both are
/// normalized.
bool contains_normalized(std::string_view haystack, std::string_view needle);

struct BaselineRun {
  const QAItem* item = nullptr;
  const GenerationResult* baseline = nullptr;
};

/// Indices of runs whose baseline answer is correct and whose no-context
/// margin stays >= threshold over the first min(prefix_len, steps) steps.
std::vector<std::size_t> bc_filter(std::span<const BaselineRun> runs, double threshold = 0.8,
                                   std::size_t prefix_len = 8);

/// Token-level route shares (percent) plus the share of traces that used the
/// fallback at least once.
struct RoutingSummary {
  double pct_no_context = 0.0;
  double pct_context = 0.0;
  double pct_fallback = 0.0;
  double pct_any_fallback = 0.0;
  std::size_t steps = 0;
  std::size_t traces = 0;
};

RoutingSummary routing_stats(std::span<const GenerationResult> results);
RoutingSummary routing_stats(std::span<const GenerationResult* const> results);

/// Total seconds over total steps.
double seconds_per_token(std::span<const GenerationResult> results);

/// seconds_per_token(a) / seconds_per_token(b).
double latency_ratio(std::span<const GenerationResult> a, std::span<const GenerationResult> b);

/// Reference values for the slice checks as reported for the original
/// augmented QA data. Kept for documentation next to the desk-scale numbers.
inline constexpr double kReportedContainmentPct = 100.0;
inline constexpr double kReportedDistractorExclusionPct = 99.3;
inline constexpr double kReportedDistractorInclusionPct = 98.5;

struct SliceValidation {
  std::size_t restated = 0, helpful = 0, distractor = 0;
  double restated_containment_pct = 100.0;   // context contains a gold answer
  double helpful_containment_pct = 100.0;
  double distractor_exclusion_pct = 100.0;   // context lacks every gold answer
  double distractor_inclusion_pct = 100.0;   // context mentions the intended distractor

  bool all_pass() const;
};

SliceValidation validate_slice(std::span<const QAItem> items);

}  // namespace nwcad
