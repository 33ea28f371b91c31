// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "nwcad/error.hpp"

namespace nwcad {
namespace {

using detail::Json;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pct(double v) { return fmt("%.2f", v); }

std::string num(double v) { return fmt("%.6g", v); }

GenerationResult decode_item(const Backend& backend, const QAItem& item,
                             const DecodeParams& params) {
  const auto provider = backend.provider_for(item);
  try {
    return decode(*provider, item.prompt(), params);
  } catch (const Error& e) {
    throw Error(e.kind(), "item '" + item.id + "': " + e.what());
  }
}

std::vector<GenerationResult> decode_all(const Backend& backend, const Slice& slice,
                                         std::span<const std::size_t> items,
                                         const DecodeParams& params, std::size_t jobs) {
  std::vector<GenerationResult> out(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    out[i] = decode_item(backend, slice.items.at(items[i]), params);
  });
  return out;
}

std::vector<std::size_t> all_indices(const Slice& slice) {
  std::vector<std::size_t> idx(slice.items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

bool uses_fallback(const GenerationResult& r) {
  return std::any_of(r.trace.begin(), r.trace.end(),
                     [](const StepRecord& s) { return s.decision.route == Route::kFallback; });
}

std::string cell_or_blank(const EvalReport& r, SliceLabel label) {
  const auto it = r.per_slice.find(label);
  return it == r.per_slice.end() || it->second.n == 0 ? std::string() : pct(it->second.accuracy());
}

}  // namespace

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double SliceScore::accuracy() const {
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

Selection select_items(const Backend& backend, const Slice& slice, const DecodeParams& params,
                       const BenchOptions& options) {
  DecodeParams base = params;
  base.mode = DecodeMode::kBaseline;
  const auto every = all_indices(slice);

  Selection sel;
  sel.baseline = decode_all(backend, slice, every, base, options.jobs);

  std::vector<BaselineRun> runs;
  std::vector<std::size_t> run_item;
  std::vector<bool> keep(slice.items.size(), true);
  for (std::size_t i = 0; i < slice.items.size(); ++i) {
    if (!options.bc_filter || !is_neutral_slice(slice.items[i].slice)) continue;
    runs.push_back({&slice.items[i], &sel.baseline[i]});
    run_item.push_back(i);
    keep[i] = false;
  }
  sel.bc_candidates = runs.size();
  for (std::size_t r : bc_filter(runs, options.bc_threshold, options.bc_prefix_len)) {
    keep[run_item[r]] = true;
    ++sel.bc_kept;
  }
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) sel.items.push_back(i);
  }
  return sel;
}

EvalReport evaluate(const Backend& backend, const Slice& slice, std::span<const std::size_t> items,
                    const DecodeParams& params, std::size_t jobs) {
  params.validate();
  EvalReport report;
  report.mode = params.mode;
  report.gate = params.gate;
  report.fallback = effective_fallback(params.mode, params.fallback);

  auto generations = decode_all(backend, slice, items, params, jobs);
  report.outcomes.resize(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const QAItem& item = slice.items.at(items[i]);
    ItemOutcome& o = report.outcomes[i];
    o.item_index = items[i];
    o.generation = std::move(generations[i]);
    o.prediction = extract_answer(o.generation.text);
    o.correct = exact_match(o.prediction, item.golds);
    auto& score = report.per_slice[item.slice];
    ++score.n;
    score.correct += o.correct ? 1 : 0;
    ++report.combined.n;
    report.combined.correct += o.correct ? 1 : 0;
  }

  if (!report.outcomes.empty()) {
    std::vector<const GenerationResult*> all;
    std::map<SliceLabel, std::vector<const GenerationResult*>> by_slice;
    for (const auto& o : report.outcomes) {
      all.push_back(&o.generation);
      by_slice[slice.items[o.item_index].slice].push_back(&o.generation);
    }
    report.routing = routing_stats(std::span<const GenerationResult* const>(all));
    for (const auto& [label, traces] : by_slice) {
      report.routing_by_slice[label] = routing_stats(std::span<const GenerationResult* const>(traces));
    }
  }
  report.invariant_failures = check_report_invariants(report);
  for (auto& msg : report.invariant_failures) msg = std::string(to_string(params.mode)) + ": " + msg;
  return report;
}

EvalReport bench(const Backend& backend, const Slice& slice, const DecodeParams& params,
                 const BenchOptions& options) {
  const Selection sel = select_items(backend, slice, params, options);
  EvalReport report = evaluate(backend, slice, sel.items, params, options.jobs);
  report.bc_candidates = sel.bc_candidates;
  report.bc_kept = sel.bc_kept;
  return report;
}

std::vector<std::string> check_report_invariants(const EvalReport& report) {
  std::vector<std::string> failures;
  const auto check_routing = [&](const RoutingSummary& r, const std::string& label) {
    if (r.traces == 0) return;
    const double sum = r.pct_no_context + r.pct_context + r.pct_fallback;
    if (std::fabs(sum - 100.0) > 0.01) {
      failures.push_back(label + " routing shares sum to " + num(sum));
    }
  };
  check_routing(report.routing, "overall");
  for (const auto& [label, r] : report.routing_by_slice) check_routing(r, std::string(to_string(label)));

  if (!report.outcomes.empty()) {
    std::size_t with_fallback = 0;
    for (const auto& o : report.outcomes) with_fallback += uses_fallback(o.generation) ? 1 : 0;
    const double counted =
        100.0 * static_cast<double>(with_fallback) / static_cast<double>(report.outcomes.size());
    if (report.routing.pct_any_fallback + 1e-9 < counted) {
      failures.push_back("any_fallback " + num(report.routing.pct_any_fallback) +
                         " below counted " + num(counted));
    }
  }

  double weighted = 0.0;
  std::size_t n = 0;
  for (const auto& [label, s] : report.per_slice) {
    weighted += static_cast<double>(s.n) * s.accuracy();
    n += s.n;
  }
  if (n != report.combined.n ||
      (n > 0 && std::fabs(weighted / static_cast<double>(n) - report.combined.accuracy()) > 1e-9)) {
    failures.push_back("combined accuracy is not the count-weighted slice mean");
  }

  for (const auto& o : report.outcomes) {
    if (o.generation.tokens.size() > o.generation.trace.size()) {
      failures.push_back("item #" + std::to_string(o.item_index) + " has more tokens than steps");
    }
    for (std::size_t t = 0; t < o.generation.trace.size(); ++t) {
      if (o.generation.trace[t].step_index != t) {
        failures.push_back("item #" + std::to_string(o.item_index) + " has unordered steps");
        break;
      }
    }
  }
  return failures;
}

std::vector<FrozenTrace> freeze_baseline(const Backend& backend, const Slice& slice,
                                         std::span<const std::size_t> items,
                                         std::span<const GenerationResult> baseline,
                                         const DecodeParams& params, std::size_t jobs) {
  check_arg(items.size() == baseline.size(), "freeze_baseline: one baseline result per item");
  std::vector<FrozenTrace> out(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    const QAItem& item = slice.items.at(items[i]);
    const auto provider = backend.provider_for(item);
    const EncodedPrompt prompt =
        encode_prompt(provider->vocabulary(), item.prompt(), params.max_context_length, nullptr);
    std::vector<TokenId> path = baseline[i].tokens;
    if (baseline[i].terminated_by == Termination::kEos) path.push_back(provider->eos());
    out[i].item_index = items[i];
    for (const auto& s : capture_along_path(*provider, prompt, path)) {
      out[i].steps.push_back(StepSignals::compute(s.z_c, s.z_0, params.gate.js_top_k));
    }
  });
  return out;
}

std::size_t stage1_count(std::span<const FrozenTrace> traces, const GateConfig& gate) {
  std::size_t n = 0;
  for (const auto& t : traces) {
    for (const auto& s : t.steps) {
      n += is_neutral(s.divergence, gate.tau) && s.margin_nc >= gate.kappa_pri ? 1 : 0;
    }
  }
  return n;
}

SweepResult sweep(const Backend& backend, const Slice& slice, const DecodeParams& params,
                  const SweepGrid& grid, const BenchOptions& options) {
  params.validate();
  const auto axis = [](const std::vector<double>& v, double fallback) {
    return v.empty() ? std::vector<double>{fallback} : v;
  };
  const auto taus = axis(grid.tau, params.gate.tau);
  const auto pris = axis(grid.kappa_pri, params.gate.kappa_pri);
  const auto ctxs = axis(grid.kappa_ctx, params.gate.kappa_ctx);

  SweepResult result;
  if (!grid.tau.empty()) result.varied.push_back("tau");
  if (!grid.kappa_pri.empty()) result.varied.push_back("kappa_pri");
  if (!grid.kappa_ctx.empty()) result.varied.push_back("kappa_ctx");

  const Selection sel = select_items(backend, slice, params, options);
  const auto every = all_indices(slice);
  const auto frozen =
      freeze_baseline(backend, slice, every, sel.baseline, params, options.jobs);

  for (double tau : taus) {
    for (double pri : pris) {
      for (double ctx : ctxs) {
        DecodeParams p = params;
        p.gate.tau = tau;
        p.gate.kappa_pri = pri;
        p.gate.kappa_ctx = ctx;
        SweepCell cell;
        cell.gate = p.gate;
        cell.report = evaluate(backend, slice, sel.items, p, options.jobs);
        cell.report.bc_candidates = sel.bc_candidates;
        cell.report.bc_kept = sel.bc_kept;
        cell.stage1_frozen = stage1_count(frozen, p.gate);
        result.cells.push_back(std::move(cell));
      }
    }
  }

  // Adjacent pairs along tau (count must not drop) and kappa_pri (must not
  // rise), all other coordinates fixed.
  const auto at = [&](std::size_t i, std::size_t j, std::size_t l) -> const SweepCell& {
    return result.cells[(i * pris.size() + j) * ctxs.size() + l];
  };
  const auto sorted_order = [](const std::vector<double>& v) {
    std::vector<std::size_t> o(v.size());
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = i;
    std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return o;
  };
  const auto ot = sorted_order(taus);
  const auto op = sorted_order(pris);
  const auto describe = [](const SweepCell& c) {
    return "(tau " + num(c.gate.tau) + ", kappa_pri " + num(c.gate.kappa_pri) + ", kappa_ctx " +
           num(c.gate.kappa_ctx) + ")";
  };
  for (std::size_t l = 0; l < ctxs.size(); ++l) {
    for (std::size_t j = 0; j < pris.size(); ++j) {
      for (std::size_t k = 1; k < ot.size(); ++k) {
        const auto& lo = at(ot[k - 1], j, l);
        const auto& hi = at(ot[k], j, l);
        ++result.monotone_pairs;
        if (hi.stage1_frozen < lo.stage1_frozen) {
          result.monotonicity_violations.push_back("stage-1 count drops from " + describe(lo) +
                                                   " to " + describe(hi));
        }
      }
    }
    for (std::size_t i = 0; i < taus.size(); ++i) {
      for (std::size_t k = 1; k < op.size(); ++k) {
        const auto& lo = at(i, op[k - 1], l);
        const auto& hi = at(i, op[k], l);
        ++result.monotone_pairs;
        if (hi.stage1_frozen > lo.stage1_frozen) {
          result.monotonicity_violations.push_back("stage-1 count rises from " + describe(lo) +
                                                   " to " + describe(hi));
        }
      }
    }
  }
  return result;
}

LatencyPair measure_latency(const Backend& backend, const Slice& slice,
                            std::span<const std::size_t> items, const DecodeParams& params,
                            DecodeMode mode_a, DecodeMode mode_b, std::size_t rounds) {
  check_arg(!items.empty(), "latency needs at least one item");
  check_arg(rounds >= 1, "latency needs at least one round");
  DecodeParams pa = params;
  pa.mode = mode_a;
  DecodeParams pb = params;
  pb.mode = mode_b;
  std::vector<GenerationResult> a;
  std::vector<GenerationResult> b;
  // Interleave per item so drift affects both modes alike. An untimed decode
  // warms the item first, and the ABBA / BAAB order alternates so that no
  // mode always holds the first timed slot.
  std::size_t turn = 0;
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t idx : items) {
      const QAItem& item = slice.items.at(idx);
      decode_item(backend, item, pa);
      auto& first = turn % 2 == 0 ? a : b;
      auto& second = turn % 2 == 0 ? b : a;
      const DecodeParams& p1 = turn % 2 == 0 ? pa : pb;
      const DecodeParams& p2 = turn % 2 == 0 ? pb : pa;
      first.push_back(decode_item(backend, item, p1));
      second.push_back(decode_item(backend, item, p2));
      second.push_back(decode_item(backend, item, p2));
      first.push_back(decode_item(backend, item, p1));
      ++turn;
    }
  }
  LatencyPair out;
  out.mode_a = mode_a;
  out.mode_b = mode_b;
  out.sec_per_token_a = seconds_per_token(a);
  out.sec_per_token_b = seconds_per_token(b);
  out.ratio = latency_ratio(a, b);
  return out;
}

std::string accuracy_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "slice,n,accuracy\n";
  for (const auto& [label, s] : report.per_slice) {
    os << to_string(label) << ',' << s.n << ',' << pct(s.accuracy()) << '\n';
  }
  os << "combined," << report.combined.n << ',' << pct(report.combined.accuracy()) << '\n';
  return os.str();
}

std::string routing_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "slice,no_context,context,fallback,any_fallback\n";
  const auto row = [&](std::string_view name, const RoutingSummary& r) {
    os << name << ',' << pct(r.pct_no_context) << ',' << pct(r.pct_context) << ','
       << pct(r.pct_fallback) << ',' << pct(r.pct_any_fallback) << '\n';
  };
  for (const auto& [label, r] : report.routing_by_slice) row(to_string(label), r);
  if (report.routing.traces > 0) row("all", report.routing);
  return os.str();
}

std::string items_jsonl(const EvalReport& report, const Slice& slice) {
  std::string out;
  for (const auto& o : report.outcomes) {
    const QAItem& item = slice.items.at(o.item_index);
    Json trace = Json::array();
    for (const auto& s : o.generation.trace) {
      Json rec = {{"step", s.step_index},
                  {"route", to_string(s.decision.route)},
                  {"token", s.token.value},
                  {"seconds", s.per_step_seconds}};
      const auto opt = [&](const char* key, const std::optional<double>& v) {
        rec[key] = v ? Json(*v) : Json(nullptr);
      };
      opt("divergence", s.decision.divergence ? std::optional(s.decision.divergence->value)
                                              : std::nullopt);
      opt("margin_nc", s.decision.margin_nc);
      opt("margin_ctx", s.decision.margin_ctx);
      opt("alpha", s.decision.alpha);
      if (s.fallback_suppressed) rec["fallback_suppressed"] = true;
      trace.push_back(std::move(rec));
    }
    std::vector<std::uint32_t> tokens;
    for (TokenId t : o.generation.tokens) tokens.push_back(t.value);
    const Json line = {{"item_id", item.id},
                       {"slice", to_string(item.slice)},
                       {"mode", to_string(report.mode)},
                       {"prediction", o.prediction},
                       {"golds", item.golds},
                       {"correct", o.correct},
                       {"terminated_by", to_string(o.generation.terminated_by)},
                       {"tokens", tokens},
                       {"warnings", o.generation.warnings},
                       {"trace", trace}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::string summary_text(const EvalReport& report) {
  std::ostringstream os;
  os << "mode " << to_string(report.mode) << "  tau " << num(report.gate.tau) << "  kappa_pri "
     << num(report.gate.kappa_pri) << "  kappa_ctx " << num(report.gate.kappa_ctx) << "  K "
     << report.gate.js_top_k << "  fallback " << to_string(report.fallback.kind) << '\n';
  if (report.bc_candidates > 0) {
    os << "baseline-correct filter kept " << report.bc_kept << " of " << report.bc_candidates
       << " neutral items\n";
  }
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %6s %9s\n", "slice", "n", "accuracy");
  os << line;
  for (const auto& [label, s] : report.per_slice) {
    std::snprintf(line, sizeof line, "%-12s %6zu %9.2f\n", std::string(to_string(label)).c_str(),
                  s.n, s.accuracy());
    os << line;
  }
  std::snprintf(line, sizeof line, "%-12s %6zu %9.2f\n", "combined", report.combined.n,
                report.combined.accuracy());
  os << line;
  if (report.routing.traces > 0) {
    std::snprintf(line, sizeof line, "routing  no_context %.2f  context %.2f  fallback %.2f  any_fallback %.2f\n",
                  report.routing.pct_no_context, report.routing.pct_context,
                  report.routing.pct_fallback, report.routing.pct_any_fallback);
    os << line;
  }
  for (const auto& f : report.invariant_failures) os << "INVARIANT FAILED: " << f << '\n';
  return os.str();
}

std::string sweep_table_csv(const SweepResult& result) {
  std::ostringstream os;
  const auto only = [&](const char* name) {
    return result.varied.size() == 1 && result.varied.front() == name;
  };
  for (const auto& c : result.cells) {
    const auto& r = c.report;
    const auto restated = cell_or_blank(r, SliceLabel::kRestated);
    const auto distractor = cell_or_blank(r, SliceLabel::kDistractor);
    const auto helpful = cell_or_blank(r, SliceLabel::kHelpful);
    const auto overall = r.combined.n == 0 ? std::string() : pct(r.combined.accuracy());
    if (&c == &result.cells.front()) {
      if (only("tau")) {
        os << "tau,restated,distractor,helpful,overall\n";
      } else if (only("kappa_pri")) {
        os << "kappa_pri,helpful,restated,distractor\n";
      } else if (only("kappa_ctx")) {
        os << "kappa_ctx,restated,distractor,helpful,combined\n";
      } else {
        os << "tau,kappa_pri,kappa_ctx,restated,distractor,helpful,overall\n";
      }
    }
    if (only("tau")) {
      os << num(c.gate.tau) << ',' << restated << ',' << distractor << ',' << helpful << ','
         << overall << '\n';
    } else if (only("kappa_pri")) {
      os << num(c.gate.kappa_pri) << ',' << helpful << ',' << restated << ',' << distractor << '\n';
    } else if (only("kappa_ctx")) {
      os << num(c.gate.kappa_ctx) << ',' << restated << ',' << distractor << ',' << helpful << ','
         << overall << '\n';
    } else {
      os << num(c.gate.tau) << ',' << num(c.gate.kappa_pri) << ',' << num(c.gate.kappa_ctx) << ','
         << restated << ',' << distractor << ',' << helpful << ',' << overall << '\n';
    }
  }
  return os.str();
}

std::string sweep_stage1_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "tau,kappa_pri,kappa_ctx,stage1_frozen\n";
  for (const auto& c : result.cells) {
    os << num(c.gate.tau) << ',' << num(c.gate.kappa_pri) << ',' << num(c.gate.kappa_ctx) << ','
       << c.stage1_frozen << '\n';
  }
  return os.str();
}

std::string latency_csv(std::span<const LatencyPair> pairs) {
  std::ostringstream os;
  os << "pair,sec_per_token_a,sec_per_token_b,ratio\n";
  for (const auto& p : pairs) {
    os << to_string(p.mode_a) << '/' << to_string(p.mode_b) << ',' << fmt("%.3e", p.sec_per_token_a)
       << ',' << fmt("%.3e", p.sec_per_token_b) << ',' << pct(p.ratio) << '\n';
  }
  return os.str();
}

void write_report(const EvalReport& report, const Slice& slice, const std::string& dir,
                  const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create '" + dir + "': " + ec.message());
  const std::string base = dir + "/" + stem;
  detail::write_file(base + ".items.jsonl", items_jsonl(report, slice));
  detail::write_file(base + ".accuracy.csv", accuracy_csv(report));
  detail::write_file(base + ".routing.csv", routing_csv(report));
}

void capture_replays(const Backend& backend, const Slice& slice, DecodeMode mode,
                     const DecodeParams& params, std::size_t k, const std::string& dir,
                     std::size_t jobs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create '" + dir + "': " + ec.message());
  DecodeParams p = params;
  p.mode = mode;
  parallel_for(slice.items.size(), jobs, [&](std::size_t i) {
    const QAItem& item = slice.items[i];
    const auto provider = backend.provider_for(item);
    const GenerationResult live = decode(*provider, item.prompt(), p);
    const EncodedPrompt prompt =
        encode_prompt(provider->vocabulary(), item.prompt(), p.max_context_length, nullptr);
    ReplayHeader header;
    header.tokenizer_hash = provider->vocabulary().hash();
    header.eos = provider->eos();
    header.item_id = item.id;
    header.path = live.tokens;
    if (live.terminated_by == Termination::kEos) header.path.push_back(provider->eos());
    const std::size_t kk = k == 0 ? provider->vocab_size() : k;
    replay_store(capture_along_path(*provider, prompt, header.path), kk, header,
                 replay_path(dir, item.id));
  });
}

}  // namespace nwcad
