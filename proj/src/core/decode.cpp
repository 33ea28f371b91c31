// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/decode.hpp"

#include <chrono>
#include <optional>

#include "nwcad/error.hpp"

namespace nwcad {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::pair<DecodeMode, std::string_view> kModeNames[] = {
    {DecodeMode::kBaseline, "baseline"},       {DecodeMode::kWithContext, "with_context"},
    {DecodeMode::kCadOnly, "cad"},             {DecodeMode::kAdaCadOnly, "adacad"},
    {DecodeMode::kCoCoAOnly, "cocoa"},         {DecodeMode::kNwcadBc, "nwcad_bc"},
    {DecodeMode::kNwcad, "nwcad"},             {DecodeMode::kNwcadNoFallback, "nwcad_nofallback"},
};

LogitVector query(const LogitProvider& provider, const EncodedPrompt& prompt, Stream stream,
                  std::span<const TokenId> prefix, std::size_t step) {
  try {
    LogitVector z = provider.logits(prompt, stream, prefix);
    if (z.size() != provider.vocab_size()) {
      fail(ErrorKind::kData, "provider returned " + std::to_string(z.size()) +
                                 " logits for a vocabulary of " +
                                 std::to_string(provider.vocab_size()));
    }
    return z;
  } catch (const Error& e) {
    throw Error(e.kind(), "step " + std::to_string(step) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kData, "step " + std::to_string(step) + ": " + e.what());
  }
}

class Loop {
 public:
  Loop(const LogitProvider& provider, const DecodeParams& params)
      : provider_(provider), params_(params) {
    params_.validate();
  }

  // Appends one step; returns true when decoding should stop.
  bool emit(RouteDecision decision, LogitVector z, Clock::time_point started,
            bool fallback_suppressed = false) {
    const TokenId eos = provider_.eos();
    if (result_.tokens.size() < params_.min_new_tokens) z = z.masked(eos);
    const TokenId token = argmax_token(z);
    StepRecord rec;
    rec.step_index = result_.trace.size();
    rec.decision = std::move(decision);
    rec.token = token;
    rec.fallback_suppressed = fallback_suppressed;
    rec.per_step_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    result_.trace.push_back(std::move(rec));
    if (token == eos) {
      result_.terminated_by = Termination::kEos;
      return true;
    }
    result_.tokens.push_back(token);
    return false;
  }

  bool more() const { return result_.trace.size() < params_.max_new_tokens; }
  std::size_t step() const { return result_.trace.size(); }
  std::span<const TokenId> prefix() const { return result_.tokens; }

  GenerationResult finish(std::vector<std::string> warnings) {
    result_.text = provider_.vocabulary().decode(result_.tokens);
    result_.warnings = std::move(warnings);
    return std::move(result_);
  }

 private:
  const LogitProvider& provider_;
  DecodeParams params_;
  GenerationResult result_;
};

bool is_tilt_only(DecodeMode m) {
  return m == DecodeMode::kCadOnly || m == DecodeMode::kAdaCadOnly ||
         m == DecodeMode::kCoCoAOnly;
}

}  // namespace

std::string_view to_string(DecodeMode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "?";
}

DecodeMode decode_mode_from_string(std::string_view name) {
  for (const auto& [m, n] : kModeNames) {
    if (n == name) return m;
  }
  fail(ErrorKind::kInvalidArgument, "unknown decode mode '" + std::string(name) + "'");
}

std::vector<DecodeMode> all_decode_modes() {
  std::vector<DecodeMode> out;
  for (const auto& [m, _] : kModeNames) out.push_back(m);
  return out;
}

std::string_view to_string(Termination t) { return t == Termination::kEos ? "eos" : "length"; }

FallbackKind effective_fallback(DecodeMode mode, const FallbackKind& configured) {
  FallbackKind out = configured;
  if (mode == DecodeMode::kCadOnly) out.kind = FallbackKind::Kind::kCad;
  if (mode == DecodeMode::kAdaCadOnly) out.kind = FallbackKind::Kind::kAdaCad;
  if (mode == DecodeMode::kCoCoAOnly) out.kind = FallbackKind::Kind::kCoCoALike;
  return out;
}

void DecodeParams::validate() const {
  check_arg(max_new_tokens >= 1, "max_new_tokens must be positive");
  check_arg(min_new_tokens <= max_new_tokens, "min_new_tokens exceeds max_new_tokens");
  check_arg(max_context_length >= 1, "max_context_length must be positive");
  gate.validate();
  effective_fallback(mode, fallback).validate();
}

EncodedPrompt encode_prompt(const Vocabulary& vocab, const PromptPair& prompt,
                            std::size_t max_context_length, std::vector<std::string>* warnings) {
  EncodedPrompt out{vocab.encode(prompt.question), vocab.encode(prompt.context)};
  if (out.context.size() > max_context_length) {
    const std::size_t drop = out.context.size() - max_context_length;
    out.context.erase(out.context.begin(), out.context.begin() + static_cast<std::ptrdiff_t>(drop));
    if (warnings != nullptr) {
      warnings->push_back("context truncated from " + std::to_string(drop + max_context_length) +
                          " to " + std::to_string(max_context_length) + " tokens");
    }
  }
  return out;
}

GenerationResult decode_single_stream(const LogitProvider& provider, const EncodedPrompt& prompt,
                                      Stream stream, const DecodeParams& params) {
  Loop loop(provider, params);
  while (loop.more()) {
    const auto started = Clock::now();
    LogitVector z = query(provider, prompt, stream, loop.prefix(), loop.step());
    const double margin = top1_margin(softmax(z));
    RouteDecision d;
    if (stream == Stream::kNoContext) {
      d.route = Route::kNoContext;
      d.margin_nc = margin;
    } else {
      d.route = Route::kContext;
      d.margin_ctx = margin;
    }
    if (loop.emit(std::move(d), std::move(z), started)) break;
  }
  return loop.finish({});
}

GenerationResult decode(const LogitProvider& provider, const EncodedPrompt& prompt,
                        const DecodeParams& params) {
  if (params.mode == DecodeMode::kBaseline) {
    return decode_single_stream(provider, prompt, Stream::kNoContext, params);
  }
  if (params.mode == DecodeMode::kWithContext) {
    return decode_single_stream(provider, prompt, Stream::kContext, params);
  }

  Loop loop(provider, params);
  const FallbackKind fallback = effective_fallback(params.mode, params.fallback);
  while (loop.more()) {
    const auto started = Clock::now();
    LogitVector z_c = query(provider, prompt, Stream::kContext, loop.prefix(), loop.step());
    LogitVector z_0 = query(provider, prompt, Stream::kNoContext, loop.prefix(), loop.step());
    const StepSignals signals = StepSignals::compute(z_c, z_0, params.gate.js_top_k);

    RouteDecision d;
    bool suppressed = false;
    if (is_tilt_only(params.mode)) {
      d.divergence = signals.divergence;
      d.margin_nc = signals.margin_nc;
      d.margin_ctx = signals.margin_ctx;
      d.route = Route::kFallback;
      d.alpha = fallback.alpha(signals.divergence.value, signals.margin_ctx);
    } else {
      d = route_signals(signals, params.gate, fallback);
      if (d.route == Route::kFallback && params.mode != DecodeMode::kNwcad) {
        // NWCAD_BC stops after Stage 1; NoFallback runs Stage 2 but swaps the
        // tilt for the context logits.
        suppressed = params.mode == DecodeMode::kNwcadNoFallback;
        d.route = Route::kContext;
        d.alpha.reset();
      }
    }

    std::optional<LogitVector> z_fb;
    if (d.route == Route::kFallback) z_fb = combine_cad(z_c, z_0, *d.alpha);
    LogitVector chosen = select_logits(d, z_c, z_0, z_fb ? &*z_fb : nullptr);
    if (loop.emit(std::move(d), std::move(chosen), started, suppressed)) break;
  }
  return loop.finish({});
}

GenerationResult decode(const LogitProvider& provider, const PromptPair& prompt,
                        const DecodeParams& params) {
  std::vector<std::string> warnings;
  const EncodedPrompt encoded =
      encode_prompt(provider.vocabulary(), prompt, params.max_context_length, &warnings);
  GenerationResult r = decode(provider, encoded, params);
  r.warnings.insert(r.warnings.begin(), warnings.begin(), warnings.end());
  return r;
}

}  // namespace nwcad
