// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

// Generators and extended-precision reference evaluations shared by the
// unit tests and the acceptance runner.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nwcad/distributions.hpp"
#include "nwcad/scripted.hpp"

namespace nwcad::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(eng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

std::vector<double> random_logits(Rng& rng, std::size_t n, double sd = 3.0);

/// Probability vector whose 10 largest entries carry at least 1 - tail mass.
/// `head` picks the head tokens; each call draws fresh weights.
ProbVector peaked(Rng& rng, const std::vector<std::size_t>& head, std::size_t vocab, double tail);

/// A pair of peaked distributions over `vocab` tokens whose heads overlap
/// partially, giving divergences across the whole [0, 1] range.
std::pair<ProbVector, ProbVector> peaked_pair(Rng& rng, std::size_t vocab, double max_tail);

/// Scenario whose every step passes Stage 1 under the default gate: z_0 has
/// a top-1 margin of at least 0.35 and z_c is a perturbation of z_0 with
/// top-50 union divergence at most 0.25. Vocabulary size is `vocab`, EOS is
/// token 0.
ScenarioScript stage1_scenario(Rng& rng, std::size_t vocab, std::size_t steps,
                               const std::string& id);

/// Scenario with unconstrained random streams.
ScenarioScript random_scenario(Rng& rng, std::size_t vocab, std::size_t steps,
                               const std::string& id);

// Extended-precision references.
std::vector<long double> softmax_ld(const std::vector<double>& z);
long double js_ld(const std::vector<long double>& p, const std::vector<long double>& q);
std::vector<long double> cad_ld(const std::vector<double>& z_c, const std::vector<double>& z_0,
                                double alpha);

/// A unique scratch directory under the system temp dir.
std::string scratch_dir(const std::string& tag);

}  // namespace nwcad::testing
