// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nwcad/provider.hpp"
#include "nwcad/scripted.hpp"
#include "nwcad/toy_lm.hpp"

namespace nwcad {

/// Desk-scale analogues of the controlled QA slices:
///   restated    context restates the answer the prior already gives
///   distractor  prior confidently correct, context pushes a type-matched
///               wrong answer and never mentions the gold one
///   helpful     prior wrong, context entails the gold answer
/// Items loaded from a scenario file carry kScenario.
enum class SliceLabel { kRestated, kDistractor, kHelpful, kScenario };

std::string_view to_string(SliceLabel label);
SliceLabel slice_label_from_string(std::string_view name);
bool is_neutral_slice(SliceLabel label);

struct QAItem {
  std::string id;
  SliceLabel slice = SliceLabel::kRestated;
  std::string question;
  std::string context;
  std::vector<std::string> golds;
  std::string distractor;     // intended wrong answer, distractor items only
  double blend_lambda = 0.0;  // toy backend context weight
  std::optional<ScenarioScript> script;

  PromptPair prompt() const { return {question, context}; }
};

/// A set of items plus whatever the backends need to serve them: the toy
/// world for generated slices, the placeholder vocabulary for scenarios.
struct Slice {
  std::shared_ptr<const ToyWorld> world;
  std::optional<Vocabulary> scenario_vocab;
  std::vector<QAItem> items;

  const Vocabulary& vocabulary() const;
};

struct SliceGenConfig {
  std::size_t restated = 100;
  std::size_t distractor = 100;
  std::size_t helpful = 100;
  /// Share of distractor items whose context is strong enough to flip the
  /// with-context answer (kept below `flip_divergence_cap`).
  double flip_fraction = 0.5;
  /// Share of helpful items whose context evidence is weak (step-0
  /// divergence drawn from [0.35, 0.55]); the rest are strong.
  double weak_helpful_fraction = 0.2;
  double flip_divergence_cap = 0.27;
  std::size_t noise_sentences = 2;
  std::size_t year_pool = 100;
  std::size_t city_pool = 40;
  std::size_t name_pool = 30;
  double context_strength = 12.0;

  void validate() const;
};

/// Deterministic in (config, seed).
Slice build_slice(const SliceGenConfig& config, std::uint64_t seed);

/// Directory layout: world.json + items.jsonl.
void save_slice(const Slice& slice, const std::string& dir);

/// Accepts a slice directory or a scenario file.
Slice load_slice(const std::string& path);

/// Items as JSON lines (field names as in items.jsonl).
std::string items_to_jsonl(const std::vector<QAItem>& items);
std::vector<QAItem> items_from_jsonl(const std::string& text, const std::string& where);

}  // namespace nwcad
