// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/fallback.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nwcad/divergence.hpp"
#include "nwcad/error.hpp"

namespace nwcad {

void FallbackKind::validate() const {
  switch (kind) {
    case Kind::kCad:
      check_arg(std::isfinite(cad_alpha) && cad_alpha >= 0.0, "CAD alpha must be finite and >= 0");
      break;
    case Kind::kAdaCad:
      break;
    case Kind::kCoCoALike:
      check_arg(cocoa_epsilon > 0.0 && cocoa_epsilon <= 0.1, "cocoa epsilon must be in (0, 0.1]");
      check_arg(cocoa_alpha_max > 0.0 && cocoa_alpha_max <= 10.0,
                "cocoa alpha_max must be in (0, 10]");
      break;
  }
}

double FallbackKind::alpha(double divergence, double margin_ctx) const {
  switch (kind) {
    case Kind::kCad:
      return cad_alpha;
    case Kind::kAdaCad:
      return std::clamp(divergence, 0.0, 1.0);
    case Kind::kCoCoALike:
      return std::min(cocoa_alpha_max, divergence / (margin_ctx + cocoa_epsilon));
  }
  return 0.0;
}

std::string_view to_string(FallbackKind::Kind kind) {
  switch (kind) {
    case FallbackKind::Kind::kCad:
      return "cad";
    case FallbackKind::Kind::kAdaCad:
      return "adacad";
    case FallbackKind::Kind::kCoCoALike:
      return "cocoa";
  }
  return "?";
}

FallbackKind::Kind fallback_kind_from_string(std::string_view name) {
  if (name == "cad") return FallbackKind::Kind::kCad;
  if (name == "adacad") return FallbackKind::Kind::kAdaCad;
  if (name == "cocoa") return FallbackKind::Kind::kCoCoALike;
  fail(ErrorKind::kInvalidArgument, "unknown fallback '" + std::string(name) + "'");
}

LogitVector combine_cad(const LogitVector& z_c, const LogitVector& z_0, double alpha) {
  check_arg(z_c.size() == z_0.size(), "vocabulary size mismatch in combine_cad");
  check_arg(std::isfinite(alpha), "alpha must be finite");
  if (alpha == 0.0) return z_c;
  std::vector<double> out(z_c.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c = z_c.at(i);
    const double n = z_0.at(i);
    out[i] = (c == kMaskedLogit || n == kMaskedLogit) ? kMaskedLogit
                                                      : (1.0 + alpha) * c - alpha * n;
  }
  return LogitVector(std::move(out));
}

double alpha_adacad(const ProbVector& p_c, const ProbVector& p_0, std::size_t k) {
  return FallbackKind::adacad().alpha(js_topk_union(p_c, p_0, k).value, 0.0);
}

double alpha_cocoalike(const ProbVector& p_c, const ProbVector& p_0, std::size_t k,
                       double epsilon, double alpha_max) {
  const auto kind = FallbackKind::cocoa_like(epsilon, alpha_max);
  kind.validate();
  return kind.alpha(js_topk_union(p_c, p_0, k).value, top1_margin(p_c));
}

}  // namespace nwcad
