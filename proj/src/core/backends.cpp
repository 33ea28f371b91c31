// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/backends.hpp"

#include <optional>

#include "nwcad/error.hpp"
#include "nwcad/replay.hpp"
#include "nwcad/scripted.hpp"
#include "nwcad/toy_lm.hpp"

namespace nwcad {
namespace {

class ToyBackend final : public Backend {
 public:
  explicit ToyBackend(std::shared_ptr<const ToyWorld> world) : world_(std::move(world)) {}
  std::string_view name() const override { return "toy"; }
  std::shared_ptr<const LogitProvider> provider_for(const QAItem& item) const override {
    return std::make_shared<ToyLM>(world_, item.blend_lambda);
  }

 private:
  std::shared_ptr<const ToyWorld> world_;
};

class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(Vocabulary vocab) : vocab_(std::move(vocab)) {}
  std::string_view name() const override { return "scripted"; }
  std::shared_ptr<const LogitProvider> provider_for(const QAItem& item) const override {
    check_arg(item.script.has_value(), "item '" + item.id + "' has no scenario script");
    return std::make_shared<ScriptedProvider>(vocab_, *item.script);
  }

 private:
  Vocabulary vocab_;
};

class ReplayBackend final : public Backend {
 public:
  ReplayBackend(std::string dir, std::optional<Vocabulary> vocab)
      : dir_(std::move(dir)), vocab_(std::move(vocab)) {}
  std::string_view name() const override { return "replay"; }
  std::shared_ptr<const LogitProvider> provider_for(const QAItem& item) const override {
    return std::make_shared<ReplayProvider>(
        replay_load(replay_path(dir_, item.id), vocab_ ? &*vocab_ : nullptr));
  }

 private:
  std::string dir_;
  std::optional<Vocabulary> vocab_;
};

}  // namespace

std::string replay_path(const std::string& dir, const std::string& item_id) {
  return dir + "/" + item_id + ".replay.jsonl";
}

std::unique_ptr<Backend> make_toy_backend(const Slice& slice) {
  check_arg(slice.world != nullptr, "toy backend needs a generated slice (world.json)");
  return std::make_unique<ToyBackend>(slice.world);
}

std::unique_ptr<Backend> make_scripted_backend(const Slice& slice) {
  check_arg(slice.scenario_vocab.has_value(), "scripted backend needs a scenario file");
  return std::make_unique<ScriptedBackend>(*slice.scenario_vocab);
}

std::unique_ptr<Backend> make_replay_backend(const std::string& dir, const Slice* slice) {
  std::optional<Vocabulary> vocab;
  if (slice != nullptr && (slice->world || slice->scenario_vocab)) vocab = slice->vocabulary();
  return std::make_unique<ReplayBackend>(dir, std::move(vocab));
}

std::unique_ptr<Backend> make_backend(std::string_view kind, const Slice& slice,
                                      const std::string& replay_dir) {
  if (kind == "auto") kind = slice.scenario_vocab ? "scripted" : "toy";
  if (kind == "toy") return make_toy_backend(slice);
  if (kind == "scripted") return make_scripted_backend(slice);
  if (kind == "replay") {
    check_arg(!replay_dir.empty(), "replay backend needs a replay directory");
    return make_replay_backend(replay_dir, &slice);
  }
  fail(ErrorKind::kInvalidArgument, "unknown backend '" + std::string(kind) + "'");
}

}  // namespace nwcad
