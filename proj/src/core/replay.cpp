// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/replay.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json_util.hpp"

namespace nwcad {

std::vector<StepLogits> capture_along_path(const LogitProvider& provider,
                                           const EncodedPrompt& prompt,
                                           std::span<const TokenId> path) {
  std::vector<StepLogits> out;
  out.reserve(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) {
    const auto prefix = path.first(t);
    out.push_back({provider.logits(prompt, Stream::kContext, prefix),
                   provider.logits(prompt, Stream::kNoContext, prefix)});
  }
  return out;
}

LogitVector ReplayRecord::expand(std::size_t vocab_size) const {
  std::vector<double> z(vocab_size, floor_logit);
  for (const auto& [t, v] : topk) z[t.index()] = v;
  return LogitVector(std::move(z));
}

ReplayRecord make_record(std::size_t step, Stream stream, const LogitVector& z, std::size_t k) {
  check_arg(k >= 1, "replay k must be >= 1");
  const auto v = z.values();
  for (double x : v) check_data(std::isfinite(x), "cannot record a non-finite logit");
  const std::size_t n = v.size();
  const std::size_t kk = std::min(k, n);
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return v[a] > v[b] || (v[a] == v[b] && a < b);
                    });

  ReplayRecord rec;
  rec.step = step;
  rec.stream = stream;
  for (std::size_t i = 0; i < kk; ++i) rec.topk.emplace_back(TokenId(idx[i]), v[idx[i]]);
  const double min_kept = rec.topk.back().second;
  if (kk == n) {
    rec.floor_logit = min_kept - 1.0;
    return rec;
  }
  double max_dropped = -std::numeric_limits<double>::infinity();
  for (std::size_t i = kk; i < n; ++i) max_dropped = std::max(max_dropped, v[idx[i]]);
  double sum = 0.0;
  for (std::size_t i = kk; i < n; ++i) sum += std::exp(v[idx[i]] - max_dropped);
  rec.floor_logit = max_dropped + std::log(sum / static_cast<double>(n - kk));
  if (rec.floor_logit >= min_kept) {
    rec.floor_logit = std::nextafter(min_kept, -std::numeric_limits<double>::infinity());
  }
  return rec;
}

ReplayProvider::ReplayProvider(ReplayHeader header, std::vector<ReplayRecord> records,
                               Vocabulary vocab)
    : header_(std::move(header)), records_(std::move(records)), vocab_(std::move(vocab)) {
  check_data(vocab_.size() == header_.vocab_size, "replay vocabulary size mismatch");
}

LogitVector ReplayProvider::logits(const EncodedPrompt&, Stream stream,
                                   std::span<const TokenId> prefix) const {
  check_prefix(prefix);
  const std::size_t step = prefix.size();
  if (step >= steps()) fail(ErrorKind::kData, "replay underrun at step " + std::to_string(step));
  const auto& rec = records_[2 * step + (stream == Stream::kContext ? 0 : 1)];
  return rec.expand(header_.vocab_size);
}

std::optional<std::size_t> ReplayProvider::divergence_step(std::span<const TokenId> tokens) const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i >= header_.path.size() || header_.path[i] != tokens[i]) return i;
  }
  return std::nullopt;
}

namespace {

using detail::field;
using detail::Json;

Json header_json(const ReplayHeader& h) {
  std::vector<std::uint32_t> path;
  for (TokenId t : h.path) path.push_back(t.value);
  return {{"format", "nwcad-replay"},  {"version", h.version},
          {"vocab_size", h.vocab_size}, {"k", h.k},
          {"tokenizer_hash", h.tokenizer_hash}, {"eos_id", h.eos.value},
          {"item_id", h.item_id},       {"complete", h.complete},
          {"path", path}};
}

Json record_json(const ReplayRecord& r) {
  Json topk = Json::array();
  for (const auto& [t, v] : r.topk) topk.push_back(Json::array({t.value, v}));
  return {{"step", r.step},
          {"stream", to_string(r.stream)},
          {"topk", topk},
          {"floor_logit", r.floor_logit}};
}

ReplayHeader parse_header(const Json& j, const std::string& where) {
  check_data(field<std::string>(j, "format", where) == "nwcad-replay",
             where + ": not a replay file");
  ReplayHeader h;
  h.version = field<int>(j, "version", where);
  check_data(h.version == 1, where + ": unrecognized replay version " + std::to_string(h.version));
  h.vocab_size = field<std::size_t>(j, "vocab_size", where);
  h.k = field<std::size_t>(j, "k", where);
  h.tokenizer_hash = field<std::string>(j, "tokenizer_hash", where);
  h.eos = TokenId(field<std::uint32_t>(j, "eos_id", where));
  h.item_id = field<std::string>(j, "item_id", where);
  h.complete = field<bool>(j, "complete", where);
  for (auto t : field<std::vector<std::uint32_t>>(j, "path", where)) h.path.emplace_back(t);
  check_data(h.vocab_size >= 1, where + ": vocab_size must be positive");
  check_data(h.k >= 1, where + ": k must be >= 1");
  check_data(h.eos.index() < h.vocab_size, where + ": eos_id outside vocabulary");
  for (TokenId t : h.path) check_data(t.index() < h.vocab_size, where + ": path token outside vocabulary");
  return h;
}

ReplayRecord parse_record(const Json& j, const ReplayHeader& h, const std::string& where) {
  ReplayRecord r;
  r.step = field<std::size_t>(j, "step", where);
  r.stream = stream_from_string(field<std::string>(j, "stream", where));
  r.floor_logit = field<double>(j, "floor_logit", where);
  const Json topk = field<Json>(j, "topk", where);
  check_data(topk.is_array(), where + ": topk must be an array");
  std::set<std::uint32_t> seen;
  double min_listed = std::numeric_limits<double>::infinity();
  for (const Json& e : topk) {
    check_data(e.is_array() && e.size() == 2 && e[0].is_number_unsigned() && e[1].is_number(),
               where + ": topk entries must be [token_id, logit]");
    const auto id = e[0].get<std::uint32_t>();
    const double v = e[1].get<double>();
    check_data(id < h.vocab_size, where + ": token id " + std::to_string(id) + " outside vocabulary");
    check_data(seen.insert(id).second, where + ": duplicate token id " + std::to_string(id));
    check_data(std::isfinite(v), where + ": non-finite logit");
    min_listed = std::min(min_listed, v);
    r.topk.emplace_back(TokenId(id), v);
  }
  check_data(r.topk.size() == std::min(h.k, h.vocab_size),
             where + ": expected " + std::to_string(std::min(h.k, h.vocab_size)) +
                 " topk entries, found " + std::to_string(r.topk.size()));
  check_data(std::isfinite(r.floor_logit) && r.floor_logit < min_listed,
             where + ": floor_logit must be below every listed logit");
  return r;
}

}  // namespace

std::string replay_serialize(const ReplayHeader& header, const std::vector<ReplayRecord>& records) {
  std::string out = header_json(header).dump();
  out += '\n';
  for (const auto& r : records) {
    out += record_json(r).dump();
    out += '\n';
  }
  return out;
}

void replay_write(const ReplayHeader& header, const std::vector<ReplayRecord>& records,
                  const std::string& path) {
  detail::write_file(path, replay_serialize(header, records));
}

void replay_store(const std::vector<StepLogits>& steps, std::size_t k, ReplayHeader header,
                  const std::string& path) {
  check_arg(!steps.empty(), "nothing to store");
  header.k = k;
  header.vocab_size = steps.front().z_c.size();
  std::vector<ReplayRecord> records;
  records.reserve(2 * steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    check_arg(steps[t].z_c.size() == header.vocab_size && steps[t].z_0.size() == header.vocab_size,
              "captured steps disagree on vocabulary size");
    records.push_back(make_record(t, Stream::kContext, steps[t].z_c, k));
    records.push_back(make_record(t, Stream::kNoContext, steps[t].z_0, k));
  }
  replay_write(header, records, path);
}

ReplayProvider replay_parse(const std::string& text, const std::string& where,
                            const Vocabulary* vocab) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    if (end > start) lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  check_data(!lines.empty(), where + ": empty replay file");

  ReplayHeader header = parse_header(detail::parse_json(lines[0], where + ":1"), where + ":1");
  check_data(header.complete, where + ": replay file is marked incomplete");

  std::vector<ReplayRecord> records;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string at = where + ":" + std::to_string(i + 1);
    ReplayRecord r = parse_record(detail::parse_json(lines[i], at), header, at);
    const std::size_t expected_step = records.size() / 2;
    const Stream expected_stream = records.size() % 2 == 0 ? Stream::kContext : Stream::kNoContext;
    check_data(r.step == expected_step && r.stream == expected_stream,
               at + ": expected step " + std::to_string(expected_step) + " stream " +
                   std::string(to_string(expected_stream)) + " (steps must be monotone, ctx before noctx)");
    records.push_back(std::move(r));
  }
  check_data(records.size() % 2 == 0, where + ": last step is missing its noctx record");

  Vocabulary v;
  if (vocab != nullptr) {
    check_data(vocab->size() == header.vocab_size, where + ": vocabulary size does not match");
    check_data(vocab->hash() == header.tokenizer_hash, where + ": tokenizer hash does not match");
    check_data(vocab->eos() == header.eos, where + ": eos id does not match the vocabulary");
    v = *vocab;
  } else {
    v = Vocabulary::placeholder(header.vocab_size, header.eos);
  }
  return ReplayProvider(std::move(header), std::move(records), std::move(v));
}

ReplayProvider replay_load(const std::string& path, const Vocabulary* vocab) {
  return replay_parse(detail::read_file(path), path, vocab);
}

}  // namespace nwcad
