// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/gate.hpp"

#include <cmath>

#include "nwcad/error.hpp"

namespace nwcad {

void GateConfig::validate() const {
  check_arg(std::isfinite(tau) && std::isfinite(kappa_pri) && std::isfinite(kappa_ctx),
            "gate thresholds must be finite");
  check_arg(js_top_k >= 1, "js_top_k must be >= 1");
}

std::string_view to_string(Route route) {
  switch (route) {
    case Route::kNoContext:
      return "no_context";
    case Route::kContext:
      return "context";
    case Route::kFallback:
      return "fallback";
  }
  return "?";
}

StepSignals StepSignals::compute(const LogitVector& z_c, const LogitVector& z_0, std::size_t k) {
  check_arg(z_c.size() == z_0.size(), "context and no-context vocabularies differ");
  StepSignals s{softmax(z_c), softmax(z_0), {}, 0.0, 0.0};
  s.divergence = js_topk_union(s.p_c, s.p_0, k);
  s.margin_nc = top1_margin(s.p_0);
  s.margin_ctx = top1_margin(s.p_c);
  return s;
}

RouteDecision route_signals(const StepSignals& s, const GateConfig& cfg,
                            const FallbackKind& fallback) {
  RouteDecision d;
  d.divergence = s.divergence;
  d.margin_nc = s.margin_nc;
  d.margin_ctx = s.margin_ctx;
  if (is_neutral(s.divergence, cfg.tau) && s.margin_nc >= cfg.kappa_pri) {
    d.route = Route::kNoContext;
  } else if (s.margin_ctx >= cfg.kappa_ctx) {
    d.route = Route::kContext;
  } else {
    d.route = Route::kFallback;
    d.alpha = fallback.alpha(s.divergence.value, s.margin_ctx);
  }
  return d;
}

RouteDecision route_step(const LogitVector& z_c, const LogitVector& z_0, const GateConfig& cfg,
                         const FallbackKind& fallback) {
  cfg.validate();
  return route_signals(StepSignals::compute(z_c, z_0, cfg.js_top_k), cfg, fallback);
}

LogitVector select_logits(const RouteDecision& decision, const LogitVector& z_c,
                          const LogitVector& z_0, const LogitVector* z_fallback) {
  switch (decision.route) {
    case Route::kNoContext:
      return z_0;
    case Route::kContext:
      return z_c;
    case Route::kFallback:
      if (z_fallback == nullptr) fail(ErrorKind::kInvalidArgument, "fallback logits missing");
      return *z_fallback;
  }
  fail(ErrorKind::kInvalidArgument, "unrouted step");
}

}  // namespace nwcad
