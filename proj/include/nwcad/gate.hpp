// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "nwcad/distributions.hpp"
#include "nwcad/divergence.hpp"
#include "nwcad/fallback.hpp"

namespace nwcad {

/// Thresholds for the two-stage gate.
struct GateConfig {
  double tau = 0.3;         // neutrality threshold on D
  double kappa_pri = 0.30;  // Stage-1 margin threshold on the no-context stream
  double kappa_ctx = 0.05;  // Stage-2 margin threshold on the context stream
  std::size_t js_top_k = 50;

  void validate() const;
};

enum class Route { kNoContext, kContext, kFallback };

std::string_view to_string(Route route);

/// Per-step routing outcome plus the signals it was derived from.
///
/// Two-stream decoders populate every diagnostic regardless of the branch
/// taken. Single-stream decoders (Baseline, WithContext) only see one
/// distribution, so the other stream's margin and the divergence are empty.
/// `alpha` is set iff `route == kFallback`.
struct RouteDecision {
  Route route = Route::kNoContext;
  std::optional<DivergenceValue> divergence;
  std::optional<double> margin_nc;
  std::optional<double> margin_ctx;
  std::optional<double> alpha;
};

/// Both streams' distributions at one step, computed once and shared by the
/// gate and the fallback schedule.
struct StepSignals {
  ProbVector p_c;
  ProbVector p_0;
  DivergenceValue divergence;
  double margin_nc = 0.0;
  double margin_ctx = 0.0;

  static StepSignals compute(const LogitVector& z_c, const LogitVector& z_0, std::size_t k);
};

/// Three-way routing on precomputed signals:
///   NoContext  iff D <= tau and margin_nc >= kappa_pri
///   Context    iff otherwise margin_ctx >= kappa_ctx
///   Fallback   otherwise (alpha filled from `fallback`)
RouteDecision route_signals(const StepSignals& s, const GateConfig& cfg,
                            const FallbackKind& fallback = {});

RouteDecision route_step(const LogitVector& z_c, const LogitVector& z_0, const GateConfig& cfg,
                         const FallbackKind& fallback = {});

/// The logits the decoder emits from: z_0 verbatim for NoContext, z_c for
/// Context, `z_fallback` for Fallback. Throws when the route is Fallback and
/// no fallback logits were supplied.
LogitVector select_logits(const RouteDecision& decision, const LogitVector& z_c,
                          const LogitVector& z_0, const LogitVector* z_fallback);

}  // namespace nwcad
