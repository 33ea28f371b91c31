// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/toy_lm.hpp"

#include <cmath>

#include "json_util.hpp"

namespace nwcad {

History History::of(std::span<const TokenId> question, std::span<const TokenId> prefix) {
  History h;
  const std::size_t n = question.size() + prefix.size();
  const auto at = [&](std::size_t i) {
    return i < question.size() ? question[i] : prefix[i - question.size()];
  };
  if (n >= 1) h.last = at(n - 1);
  if (n >= 2) h.prev = at(n - 2);
  return h;
}

void ToyWorld::validate() const {
  const std::size_t n = vocab.size();
  check_data(unigram.size() == n, "toy world unigram row does not match the vocabulary");
  for (double v : unigram) check_data(std::isfinite(v), "toy world unigram logit not finite");
  check_data(period.index() < n, "toy world period token outside vocabulary");
  check_data(std::isfinite(context_strength) && context_strength >= 0.0,
             "toy world context_strength must be finite and >= 0");
  const auto check_row = [&](const SparseRow& row) {
    for (const auto& [t, v] : row.entries) {
      check_data(t.index() < n && std::isfinite(v), "toy world row entry invalid");
    }
  };
  for (const auto& [_, row] : order1) check_row(row);
  for (const auto& [_, row] : order2) check_row(row);
}

LogitVector ToyWorld::prior(const History& h) const {
  std::vector<double> z = unigram;
  const SparseRow* row = nullptr;
  if (h.prev && h.last) {
    if (auto it = order2.find({*h.prev, *h.last}); it != order2.end()) row = &it->second;
  }
  if (row == nullptr && h.last) {
    if (auto it = order1.find(*h.last); it != order1.end()) row = &it->second;
  }
  if (row != nullptr) {
    for (const auto& [t, v] : row->entries) z[t.index()] = v;
  }
  return LogitVector(std::move(z));
}

ContextTable ContextTable::induce(std::span<const TokenId> context, TokenId period, TokenId eos) {
  ContextTable table;
  std::optional<TokenId> prev;
  std::optional<TokenId> last;
  const auto count = [&](TokenId next) {
    if (last) ++table.order1_[*last][next];
    if (prev && last) ++table.order2_[{*prev, *last}][next];
  };
  for (TokenId t : context) {
    if (t == period || t == eos) {
      count(eos);
      prev.reset();
      last.reset();
      continue;
    }
    count(t);
    prev = last;
    last = t;
  }
  count(eos);
  return table;
}

std::vector<std::pair<TokenId, double>> ContextTable::row(const History& h) const {
  const std::map<TokenId, int>* counts = nullptr;
  if (h.prev && h.last) {
    if (auto it = order2_.find({*h.prev, *h.last}); it != order2_.end()) counts = &it->second;
  }
  if (counts == nullptr && h.last) {
    if (auto it = order1_.find(*h.last); it != order1_.end()) counts = &it->second;
  }
  std::vector<std::pair<TokenId, double>> out;
  if (counts == nullptr) return out;
  int total = 0;
  for (const auto& [_, c] : *counts) total += c;
  for (const auto& [t, c] : *counts) out.emplace_back(t, static_cast<double>(c) / total);
  return out;
}

ToyLM::ToyLM(std::shared_ptr<const ToyWorld> world, double blend_lambda)
    : world_(std::move(world)), blend_lambda_(blend_lambda) {
  check_arg(world_ != nullptr, "toy LM needs a world");
  check_arg(blend_lambda_ >= 0.0 && blend_lambda_ <= 1.0, "blend_lambda must be in [0,1]");
}

LogitVector ToyLM::logits(const EncodedPrompt& prompt, Stream stream,
                          std::span<const TokenId> prefix) const {
  check_prefix(prefix);
  const History h = History::of(prompt.question, prefix);
  LogitVector prior = world_->prior(h);
  if (stream == Stream::kNoContext || blend_lambda_ == 0.0) return prior;

  const auto table = ContextTable::induce(prompt.context, world_->period, world_->vocab.eos());
  const auto row = table.row(h);
  if (row.empty()) return prior;
  std::vector<double> z(prior.values().begin(), prior.values().end());
  const double weight = blend_lambda_ * world_->context_strength;
  for (const auto& [t, freq] : row) z[t.index()] += weight * freq;
  return LogitVector(std::move(z));
}

namespace {

using detail::field;
using detail::Json;

Json row_to_json(const Vocabulary& vocab, const SparseRow& row) {
  Json out = Json::array();
  for (const auto& [t, v] : row.entries) out.push_back(Json::array({vocab.token(t), v}));
  return out;
}

TokenId word_id(const Vocabulary& vocab, const std::string& word, const std::string& where) {
  const auto id = vocab.find(word);
  check_data(id.has_value(), where + ": unknown token '" + word + "'");
  return *id;
}

SparseRow row_from_json(const Vocabulary& vocab, const Json& j, const std::string& where) {
  SparseRow row;
  check_data(j.is_array(), where + ": row must be an array");
  for (const Json& e : j) {
    check_data(e.is_array() && e.size() == 2 && e[0].is_string() && e[1].is_number(),
               where + ": row entries must be [token, logit]");
    row.entries.emplace_back(word_id(vocab, e[0].get<std::string>(), where), e[1].get<double>());
  }
  return row;
}

}  // namespace

void ToyWorld::save(const std::string& path) const {
  Json o1 = Json::array();
  for (const auto& [key, row] : order1) {
    o1.push_back({{"key", vocab.token(key)}, {"next", row_to_json(vocab, row)}});
  }
  Json o2 = Json::array();
  for (const auto& [key, row] : order2) {
    o2.push_back({{"key", Json::array({vocab.token(key.first), vocab.token(key.second)})},
                  {"next", row_to_json(vocab, row)}});
  }
  Json root = {{"format", "nwcad-toy-world"},
               {"version", 1},
               {"vocab", vocab.tokens()},
               {"eos", vocab.token(vocab.eos())},
               {"period", vocab.token(period)},
               {"context_strength", context_strength},
               {"unigram", unigram},
               {"order1", o1},
               {"order2", o2}};
  if (vocab.unk()) root["unk"] = vocab.token(*vocab.unk());
  detail::write_file(path, root.dump(1) + "\n");
}

ToyWorld ToyWorld::load(const std::string& path) {
  const Json root = detail::parse_json(detail::read_file(path), path);
  check_data(field<std::string>(root, "format", path) == "nwcad-toy-world",
             path + ": not a toy world file");
  check_data(field<int>(root, "version", path) == 1, path + ": unsupported version");
  auto tokens = field<std::vector<std::string>>(root, "vocab", path);
  const auto eos_word = field<std::string>(root, "eos", path);
  std::optional<TokenId> eos;
  std::optional<TokenId> unk;
  const std::string unk_word = root.contains("unk") ? field<std::string>(root, "unk", path) : "";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == eos_word) eos = TokenId(static_cast<std::uint32_t>(i));
    if (!unk_word.empty() && tokens[i] == unk_word) unk = TokenId(static_cast<std::uint32_t>(i));
  }
  check_data(eos.has_value(), path + ": eos token not in vocab");

  ToyWorld w;
  try {
    w.vocab = Vocabulary(std::move(tokens), *eos, unk);
  } catch (const Error& e) {
    fail(ErrorKind::kData, path + ": " + e.what());
  }
  w.period = word_id(w.vocab, field<std::string>(root, "period", path), path);
  w.context_strength = field<double>(root, "context_strength", path);
  w.unigram = field<std::vector<double>>(root, "unigram", path);
  for (const Json& e : field<Json>(root, "order1", path)) {
    const TokenId key = word_id(w.vocab, field<std::string>(e, "key", path), path);
    w.order1[key] = row_from_json(w.vocab, field<Json>(e, "next", path), path);
  }
  for (const Json& e : field<Json>(root, "order2", path)) {
    const auto key = field<std::vector<std::string>>(e, "key", path);
    check_data(key.size() == 2, path + ": order2 key must have two tokens");
    w.order2[{word_id(w.vocab, key[0], path), word_id(w.vocab, key[1], path)}] =
        row_from_json(w.vocab, field<Json>(e, "next", path), path);
  }
  w.validate();
  return w;
}

}  // namespace nwcad
