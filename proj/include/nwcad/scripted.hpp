// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nwcad/distributions.hpp"
#include "nwcad/provider.hpp"

namespace nwcad {

enum class StepLabel { kNeutral, kDistractor, kConflict };

std::string_view to_string(StepLabel label);
StepLabel step_label_from_string(std::string_view name);

struct ScriptStep {
  LogitVector z_c;
  LogitVector z_0;
  StepLabel label = StepLabel::kNeutral;
};

/// Explicit per-step logit pairs. Step t is served whenever the caller's
/// prefix has length t, whatever its content.
struct ScenarioScript {
  std::string id;
  std::vector<ScriptStep> steps;
  std::vector<TokenId> expected_gold;

  void validate(std::size_t vocab_size) const;
};

class ScriptedProvider final : public LogitProvider {
 public:
  ScriptedProvider(Vocabulary vocab, ScenarioScript script);

  const Vocabulary& vocabulary() const override { return vocab_; }
  LogitVector logits(const EncodedPrompt& prompt, Stream stream,
                     std::span<const TokenId> prefix) const override;

  const ScenarioScript& script() const { return script_; }

 private:
  Vocabulary vocab_;
  ScenarioScript script_;
};

/// A scenario file: one vocabulary (placeholder token names) shared by a list
/// of scripts.
struct ScenarioSet {
  Vocabulary vocab;
  std::vector<ScenarioScript> scripts;
};

ScenarioSet load_scenarios(const std::string& path);
void save_scenarios(const ScenarioSet& set, const std::string& path);

}  // namespace nwcad
