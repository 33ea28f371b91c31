// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "nwcad/provider.hpp"
#include "nwcad/slices.hpp"

namespace nwcad {

/// Hands out the logit provider serving one QA item.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string_view name() const = 0;
  virtual std::shared_ptr<const LogitProvider> provider_for(const QAItem& item) const = 0;
};

/// Toy LM over the slice's world; each item gets its own blend_lambda.
std::unique_ptr<Backend> make_toy_backend(const Slice& slice);

/// Serves each item's embedded scenario script.
std::unique_ptr<Backend> make_scripted_backend(const Slice& slice);

/// Reads `<dir>/<item id>.replay.jsonl` per item. The slice vocabulary, when
/// present, is checked against each file's tokenizer hash.
std::unique_ptr<Backend> make_replay_backend(const std::string& dir, const Slice* slice);

/// "toy" | "scripted" | "replay" | "auto" (scripted for scenario files,
/// toy otherwise)
std::unique_ptr<Backend> make_backend(std::string_view kind, const Slice& slice,
                                      const std::string& replay_dir = {});

std::string replay_path(const std::string& dir, const std::string& item_id);

}  // namespace nwcad
