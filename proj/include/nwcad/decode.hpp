// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nwcad/distributions.hpp"
#include "nwcad/fallback.hpp"
#include "nwcad/gate.hpp"
#include "nwcad/provider.hpp"

namespace nwcad {

enum class DecodeMode {
  kBaseline,          // no-context stream only
  kWithContext,       // context stream only
  kCadOnly,           // fixed-alpha tilt at every step
  kAdaCadOnly,        // divergence-scheduled tilt at every step
  kCoCoAOnly,         // confidence-modulated tilt at every step
  kNwcadBc,           // Stage 1, else context logits
  kNwcad,             // Stage 1, Stage 2, fallback
  kNwcadNoFallback,   // Stage 1, Stage 2, fallback replaced by context logits
};

std::string_view to_string(DecodeMode mode);
DecodeMode decode_mode_from_string(std::string_view name);
std::vector<DecodeMode> all_decode_modes();

/// The fallback used by a mode: the standalone tilt modes force their own
/// kind (keeping the parameters from `configured`), every other mode uses
/// `configured` as is.
FallbackKind effective_fallback(DecodeMode mode, const FallbackKind& configured);

struct DecodeParams {
  std::size_t max_new_tokens = 32;
  std::size_t min_new_tokens = 0;  // EOS is masked while fewer tokens were emitted
  std::size_t max_context_length = 4064;
  std::int64_t seed = 42;
  DecodeMode mode = DecodeMode::kNwcad;
  GateConfig gate;
  FallbackKind fallback;

  void validate() const;
};

struct StepRecord {
  std::size_t step_index = 0;
  RouteDecision decision;
  TokenId token;
  double per_step_seconds = 0.0;
  /// NWCAD_NoFallback only: the gate chose Fallback and the context logits
  /// were used instead.
  bool fallback_suppressed = false;
};

enum class Termination { kEos, kLength };

std::string_view to_string(Termination t);

/// `tokens` excludes the EOS token; `trace` has one record per decode step,
/// including the step that produced EOS.
struct GenerationResult {
  std::vector<TokenId> tokens;
  std::string text;
  std::vector<StepRecord> trace;
  Termination terminated_by = Termination::kLength;
  std::vector<std::string> warnings;
};

/// Tokenizes `prompt`, truncating the context head-first to
/// `max_context_length` tokens. Appends a warning when truncation happens.
EncodedPrompt encode_prompt(const Vocabulary& vocab, const PromptPair& prompt,
                            std::size_t max_context_length, std::vector<std::string>* warnings);

/// Greedy paired-stream decode in `params.mode`. Both streams always extend
/// the same emitted prefix. Baseline and WithContext go through
/// decode_single_stream and never query the other stream.
GenerationResult decode(const LogitProvider& provider, const PromptPair& prompt,
                        const DecodeParams& params);

GenerationResult decode(const LogitProvider& provider, const EncodedPrompt& prompt,
                        const DecodeParams& params);

/// Greedy decode from a single stream. Trace decisions carry the forced
/// route (NoContext for the no-context stream, Context otherwise) and that
/// stream's margin.
GenerationResult decode_single_stream(const LogitProvider& provider, const EncodedPrompt& prompt,
                                      Stream stream, const DecodeParams& params);

}  // namespace nwcad
