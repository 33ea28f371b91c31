// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/scripted.hpp"

#include "json_util.hpp"

namespace nwcad {

std::string_view to_string(StepLabel label) {
  switch (label) {
    case StepLabel::kNeutral:
      return "neutral";
    case StepLabel::kDistractor:
      return "distractor";
    case StepLabel::kConflict:
      return "conflict";
  }
  return "?";
}

StepLabel step_label_from_string(std::string_view name) {
  if (name == "neutral") return StepLabel::kNeutral;
  if (name == "distractor") return StepLabel::kDistractor;
  if (name == "conflict") return StepLabel::kConflict;
  fail(ErrorKind::kData, "unknown step label '" + std::string(name) + "'");
}

void ScenarioScript::validate(std::size_t vocab_size) const {
  check_data(!steps.empty(), "scenario '" + id + "' has no steps");
  for (const auto& s : steps) {
    check_data(s.z_c.size() == vocab_size && s.z_0.size() == vocab_size,
               "scenario '" + id + "' has a step with the wrong vocabulary size");
  }
  for (TokenId t : expected_gold) {
    check_data(t.index() < vocab_size, "scenario '" + id + "' gold token outside vocabulary");
  }
}

ScriptedProvider::ScriptedProvider(Vocabulary vocab, ScenarioScript script)
    : vocab_(std::move(vocab)), script_(std::move(script)) {
  script_.validate(vocab_.size());
}

LogitVector ScriptedProvider::logits(const EncodedPrompt&, Stream stream,
                                     std::span<const TokenId> prefix) const {
  check_prefix(prefix);
  if (prefix.size() >= script_.steps.size()) {
    fail(ErrorKind::kData, "script underrun at step " + std::to_string(prefix.size()));
  }
  const auto& step = script_.steps[prefix.size()];
  return stream == Stream::kContext ? step.z_c : step.z_0;
}

namespace {

using detail::field;
using detail::Json;

LogitVector logits_from(const Json& j, const char* key, const std::string& where) {
  return LogitVector(field<std::vector<double>>(j, key, where));
}

}  // namespace

ScenarioSet load_scenarios(const std::string& path) {
  const Json root = detail::parse_json(detail::read_file(path), path);
  check_data(field<std::string>(root, "format", path) == "nwcad-scenarios",
             path + ": not a scenario file");
  check_data(field<int>(root, "version", path) == 1, path + ": unsupported version");
  const auto vocab_size = field<std::size_t>(root, "vocab_size", path);
  const auto eos = field<std::uint32_t>(root, "eos_id", path);
  check_data(vocab_size >= 2 && eos < vocab_size, path + ": bad vocab_size/eos_id");

  ScenarioSet set{Vocabulary::placeholder(vocab_size, TokenId(eos)), {}};
  for (const Json& s : field<Json>(root, "scenarios", path)) {
    ScenarioScript script;
    script.id = field<std::string>(s, "id", path);
    const std::string where = path + ": scenario '" + script.id + "'";
    for (auto t : field<std::vector<std::uint32_t>>(s, "expected_gold", where)) {
      script.expected_gold.emplace_back(t);
    }
    for (const Json& st : field<Json>(s, "steps", where)) {
      script.steps.push_back({logits_from(st, "z_c", where), logits_from(st, "z_0", where),
                              step_label_from_string(field<std::string>(st, "label", where))});
    }
    script.validate(vocab_size);
    set.scripts.push_back(std::move(script));
  }
  return set;
}

void save_scenarios(const ScenarioSet& set, const std::string& path) {
  Json scenarios = Json::array();
  for (const auto& script : set.scripts) {
    Json steps = Json::array();
    for (const auto& st : script.steps) {
      steps.push_back({{"label", to_string(st.label)},
                       {"z_c", std::vector<double>(st.z_c.values().begin(), st.z_c.values().end())},
                       {"z_0", std::vector<double>(st.z_0.values().begin(), st.z_0.values().end())}});
    }
    std::vector<std::uint32_t> gold;
    for (TokenId t : script.expected_gold) gold.push_back(t.value);
    scenarios.push_back({{"id", script.id}, {"expected_gold", gold}, {"steps", steps}});
  }
  const Json root = {{"format", "nwcad-scenarios"},
                     {"version", 1},
                     {"vocab_size", set.vocab.size()},
                     {"eos_id", set.vocab.eos().value},
                     {"scenarios", scenarios}};
  detail::write_file(path, root.dump(1) + "\n");
}

}  // namespace nwcad
