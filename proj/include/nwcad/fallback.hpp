// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

#include "nwcad/distributions.hpp"

namespace nwcad {

/// Contrastive tilt decoders. All three share the combination
/// (1 + alpha) * z_c - alpha * z_0 and differ only in how alpha is chosen:
///
///   kCad        fixed alpha (`cad_alpha`, default 1.0)
///   kAdaCad     alpha = top-K union JS divergence between the streams
///   kCoCoALike  alpha = min(alpha_max, D / (margin(p_c) + epsilon))
///
/// kCoCoALike is an in-repo surrogate for confidence-modulated tilting: the
/// tilt grows with divergence and is damped when the context stream is
/// already decisive. It is not a port of any released CoCoA code.
struct FallbackKind {
  enum class Kind { kCad, kAdaCad, kCoCoALike };

  Kind kind = Kind::kCoCoALike;
  double cad_alpha = 1.0;
  double cocoa_epsilon = 0.05;
  double cocoa_alpha_max = 2.0;

  static FallbackKind cad(double alpha = 1.0) { return {Kind::kCad, alpha}; }
  static FallbackKind adacad() { return {Kind::kAdaCad}; }
  static FallbackKind cocoa_like(double epsilon = 0.05, double alpha_max = 2.0) {
    return {Kind::kCoCoALike, 1.0, epsilon, alpha_max};
  }

  /// Throws kInvalidArgument when a parameter is out of range.
  void validate() const;

  /// Tilt strength from precomputed step signals.
  double alpha(double divergence, double margin_ctx) const;
};

std::string_view to_string(FallbackKind::Kind kind);
FallbackKind::Kind fallback_kind_from_string(std::string_view name);

/// (1 + alpha) * z_c - alpha * z_0, elementwise. alpha == 0 returns z_c
/// unchanged; otherwise a -inf in either input yields -inf.
LogitVector combine_cad(const LogitVector& z_c, const LogitVector& z_0, double alpha);

/// AdaCAD schedule: the top-K union JS divergence, clamped to [0, 1].
double alpha_adacad(const ProbVector& p_c, const ProbVector& p_0, std::size_t k);

double alpha_cocoalike(const ProbVector& p_c, const ProbVector& p_0, std::size_t k,
                       double epsilon, double alpha_max);

}  // namespace nwcad
