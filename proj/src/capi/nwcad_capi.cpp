// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/nwcad.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "json.hpp"
#include "nwcad/backends.hpp"
#include "nwcad/error.hpp"
#include "nwcad/eval.hpp"
#include "nwcad/harness.hpp"
#include "nwcad/replay.hpp"
#include "nwcad/slices.hpp"

struct nwcad_slice {
  nwcad::Slice slice;
  std::vector<std::string> labels;
};

struct nwcad_backend {
  std::unique_ptr<nwcad::Backend> impl;
};

struct nwcad_result {
  nwcad::GenerationResult result;
  std::vector<std::uint32_t> tokens;
  std::string prediction;
  bool correct = false;
};

struct nwcad_report {
  nwcad::EvalReport report;
};

struct nwcad_sweep {
  nwcad::SweepResult result;
  std::vector<nwcad_report> reports;
};

namespace {

using namespace nwcad;

thread_local std::string g_last_error;

nwcad_status set_error(nwcad_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

nwcad_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return NWCAD_E_USAGE;
    case ErrorKind::kData: return NWCAD_E_DATA;
    case ErrorKind::kIo: return NWCAD_E_IO;
    case ErrorKind::kInvariant: return NWCAD_E_INVARIANT;
  }
  return NWCAD_E_INTERNAL;
}

template <typename F>
nwcad_status guarded(F&& f) {
  try {
    f();
    return NWCAD_OK;
  } catch (const Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(NWCAD_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(NWCAD_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(NWCAD_E_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorKind::kInvalidArgument, std::string(what) + " is NULL");
}

// Slice names arrive from the caller, so an unknown one is a usage error.
SliceLabel label_arg(std::string_view name) {
  for (SliceLabel l : {SliceLabel::kRestated, SliceLabel::kDistractor, SliceLabel::kHelpful,
                       SliceLabel::kScenario}) {
    if (to_string(l) == name) return l;
  }
  fail(ErrorKind::kInvalidArgument, "unknown slice '" + std::string(name) + "'");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

DecodeMode to_mode(nwcad_mode m) {
  check_arg(m >= NWCAD_MODE_BASELINE && m <= NWCAD_MODE_NWCAD_NOFALLBACK, "unknown decode mode");
  return static_cast<DecodeMode>(m);
}

DecodeParams to_params(const nwcad_decode_params* p) {
  require(p, "params");
  DecodeParams out;
  out.max_new_tokens = p->max_new_tokens;
  out.min_new_tokens = p->min_new_tokens;
  out.max_context_length = p->max_context_length;
  out.seed = p->seed;
  out.mode = to_mode(p->mode);
  out.gate.tau = p->tau;
  out.gate.kappa_pri = p->kappa_pri;
  out.gate.kappa_ctx = p->kappa_ctx;
  out.gate.js_top_k = p->js_top_k;
  check_arg(p->fallback >= NWCAD_FALLBACK_CAD && p->fallback <= NWCAD_FALLBACK_COCOA,
            "unknown fallback kind");
  out.fallback.kind = static_cast<FallbackKind::Kind>(p->fallback);
  out.fallback.cad_alpha = p->cad_alpha;
  out.fallback.cocoa_epsilon = p->cocoa_epsilon;
  out.fallback.cocoa_alpha_max = p->cocoa_alpha_max;
  out.validate();
  return out;
}

BenchOptions to_options(const nwcad_bench_options* o) {
  BenchOptions out;
  if (o == nullptr) return out;
  out.jobs = o->jobs;
  out.bc_filter = o->bc_filter != 0;
  out.bc_threshold = o->bc_threshold;
  out.bc_prefix_len = o->bc_prefix_len;
  return out;
}

nwcad_slice* wrap(Slice s) {
  auto* out = new nwcad_slice{std::move(s), {}};
  for (const auto& item : out->slice.items) out->labels.emplace_back(to_string(item.slice));
  return out;
}

nwcad_routing to_c(const RoutingSummary& r) {
  return {r.pct_no_context, r.pct_context, r.pct_fallback, r.pct_any_fallback, r.steps, r.traces};
}

nlohmann::json step_json(const StepRecord& s) {
  nlohmann::json j = {{"step", s.step_index},
                      {"route", to_string(s.decision.route)},
                      {"token", s.token.value},
                      {"seconds", s.per_step_seconds}};
  if (s.decision.divergence) j["divergence"] = s.decision.divergence->value;
  if (s.decision.margin_nc) j["margin_nc"] = *s.decision.margin_nc;
  if (s.decision.margin_ctx) j["margin_ctx"] = *s.decision.margin_ctx;
  if (s.decision.alpha) j["alpha"] = *s.decision.alpha;
  if (s.fallback_suppressed) j["fallback_suppressed"] = true;
  return j;
}

}  // namespace

extern "C" {

const char* nwcad_last_error(void) { return g_last_error.c_str(); }

const char* nwcad_version(void) { return "1.0.0"; }

void nwcad_string_free(char* s) { std::free(s); }

nwcad_status nwcad_mode_from_name(const char* name, nwcad_mode* out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    *out = static_cast<nwcad_mode>(decode_mode_from_string(name));
  });
}

const char* nwcad_mode_name(nwcad_mode mode) {
  if (mode < NWCAD_MODE_BASELINE || mode > NWCAD_MODE_NWCAD_NOFALLBACK) return "unknown";
  return to_string(static_cast<DecodeMode>(mode)).data();
}

nwcad_status nwcad_fallback_from_name(const char* name, nwcad_fallback_kind* out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    *out = static_cast<nwcad_fallback_kind>(fallback_kind_from_string(name));
  });
}

void nwcad_decode_params_init(nwcad_decode_params* p) {
  if (p == nullptr) return;
  const DecodeParams d;
  p->max_new_tokens = d.max_new_tokens;
  p->min_new_tokens = d.min_new_tokens;
  p->max_context_length = d.max_context_length;
  p->seed = d.seed;
  p->mode = static_cast<nwcad_mode>(d.mode);
  p->tau = d.gate.tau;
  p->kappa_pri = d.gate.kappa_pri;
  p->kappa_ctx = d.gate.kappa_ctx;
  p->js_top_k = d.gate.js_top_k;
  p->fallback = static_cast<nwcad_fallback_kind>(d.fallback.kind);
  p->cad_alpha = d.fallback.cad_alpha;
  p->cocoa_epsilon = d.fallback.cocoa_epsilon;
  p->cocoa_alpha_max = d.fallback.cocoa_alpha_max;
}

void nwcad_slice_config_init(nwcad_slice_config* c) {
  if (c == nullptr) return;
  const SliceGenConfig d;
  c->restated = d.restated;
  c->distractor = d.distractor;
  c->helpful = d.helpful;
  c->flip_fraction = d.flip_fraction;
  c->weak_helpful_fraction = d.weak_helpful_fraction;
  c->noise_sentences = d.noise_sentences;
}

void nwcad_bench_options_init(nwcad_bench_options* o) {
  if (o == nullptr) return;
  const BenchOptions d;
  o->jobs = d.jobs;
  o->bc_filter = d.bc_filter ? 1 : 0;
  o->bc_threshold = d.bc_threshold;
  o->bc_prefix_len = d.bc_prefix_len;
}

nwcad_status nwcad_slice_generate(const nwcad_slice_config* config, uint64_t seed,
                                  nwcad_slice** out) {
  return guarded([&] {
    require(out, "out");
    SliceGenConfig cfg;
    if (config != nullptr) {
      cfg.restated = config->restated;
      cfg.distractor = config->distractor;
      cfg.helpful = config->helpful;
      cfg.flip_fraction = config->flip_fraction;
      cfg.weak_helpful_fraction = config->weak_helpful_fraction;
      cfg.noise_sentences = config->noise_sentences;
    }
    *out = wrap(build_slice(cfg, seed));
  });
}

nwcad_status nwcad_slice_load(const char* path, nwcad_slice** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = wrap(load_slice(path));
  });
}

nwcad_status nwcad_slice_save(const nwcad_slice* slice, const char* dir) {
  return guarded([&] {
    require(slice, "slice");
    require(dir, "dir");
    save_slice(slice->slice, dir);
  });
}

size_t nwcad_slice_size(const nwcad_slice* slice) {
  return slice == nullptr ? 0 : slice->slice.items.size();
}

const char* nwcad_slice_item_id(const nwcad_slice* slice, size_t index) {
  if (slice == nullptr || index >= slice->slice.items.size()) return nullptr;
  return slice->slice.items[index].id.c_str();
}

const char* nwcad_slice_item_label(const nwcad_slice* slice, size_t index) {
  if (slice == nullptr || index >= slice->labels.size()) return nullptr;
  return slice->labels[index].c_str();
}

nwcad_status nwcad_slice_find(const nwcad_slice* slice, const char* id, size_t* index) {
  return guarded([&] {
    require(slice, "slice");
    require(id, "id");
    require(index, "index");
    const auto& items = slice->slice.items;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].id == id) {
        *index = i;
        return;
      }
    }
    fail(ErrorKind::kInvalidArgument, "no item with id '" + std::string(id) + "'");
  });
}

void nwcad_slice_free(nwcad_slice* slice) { delete slice; }

nwcad_status nwcad_slice_validate(const nwcad_slice* slice, nwcad_validation* out) {
  return guarded([&] {
    require(slice, "slice");
    require(out, "out");
    const SliceValidation v = validate_slice(slice->slice.items);
    *out = {v.restated,
            v.helpful,
            v.distractor,
            v.restated_containment_pct,
            v.helpful_containment_pct,
            v.distractor_exclusion_pct,
            v.distractor_inclusion_pct,
            v.all_pass() ? 1 : 0};
  });
}

nwcad_status nwcad_backend_create(const nwcad_slice* slice, const char* kind,
                                  const char* replay_dir, nwcad_backend** out) {
  return guarded([&] {
    require(slice, "slice");
    require(kind, "kind");
    require(out, "out");
    *out = new nwcad_backend{make_backend(kind, slice->slice, replay_dir ? replay_dir : "")};
  });
}

void nwcad_backend_free(nwcad_backend* backend) { delete backend; }

nwcad_status nwcad_decode_item(const nwcad_backend* backend, const nwcad_slice* slice,
                               size_t index, const nwcad_decode_params* params,
                               nwcad_result** out) {
  return guarded([&] {
    require(backend, "backend");
    require(slice, "slice");
    require(out, "out");
    check_arg(index < slice->slice.items.size(), "item index out of range");
    const DecodeParams p = to_params(params);
    const QAItem& item = slice->slice.items[index];
    const auto provider = backend->impl->provider_for(item);
    auto r = std::make_unique<nwcad_result>();
    r->result = decode(*provider, item.prompt(), p);
    for (TokenId t : r->result.tokens) r->tokens.push_back(t.value);
    r->prediction = extract_answer(r->result.text);
    r->correct = exact_match(r->prediction, item.golds);
    *out = r.release();
  });
}

const char* nwcad_result_text(const nwcad_result* r) {
  return r == nullptr ? nullptr : r->result.text.c_str();
}

const char* nwcad_result_prediction(const nwcad_result* r) {
  return r == nullptr ? nullptr : r->prediction.c_str();
}

int nwcad_result_correct(const nwcad_result* r) { return r != nullptr && r->correct ? 1 : 0; }

size_t nwcad_result_token_count(const nwcad_result* r) {
  return r == nullptr ? 0 : r->tokens.size();
}

const uint32_t* nwcad_result_tokens(const nwcad_result* r) {
  return r == nullptr ? nullptr : r->tokens.data();
}

size_t nwcad_result_step_count(const nwcad_result* r) {
  return r == nullptr ? 0 : r->result.trace.size();
}

nwcad_status nwcad_result_step(const nwcad_result* r, size_t i, nwcad_step* out) {
  return guarded([&] {
    require(r, "result");
    require(out, "out");
    check_arg(i < r->result.trace.size(), "step index out of range");
    const StepRecord& s = r->result.trace[i];
    const auto& d = s.decision;
    *out = {};
    out->index = s.step_index;
    out->route = static_cast<nwcad_route>(d.route);
    out->token = s.token.value;
    out->seconds = s.per_step_seconds;
    out->has_divergence = d.divergence ? 1 : 0;
    out->has_margin_nc = d.margin_nc ? 1 : 0;
    out->has_margin_ctx = d.margin_ctx ? 1 : 0;
    out->has_alpha = d.alpha ? 1 : 0;
    out->divergence = d.divergence ? d.divergence->value : 0.0;
    out->margin_nc = d.margin_nc.value_or(0.0);
    out->margin_ctx = d.margin_ctx.value_or(0.0);
    out->alpha = d.alpha.value_or(0.0);
    out->fallback_suppressed = s.fallback_suppressed ? 1 : 0;
  });
}

int nwcad_result_ended_with_eos(const nwcad_result* r) {
  return r != nullptr && r->result.terminated_by == Termination::kEos ? 1 : 0;
}

char* nwcad_result_to_json(const nwcad_result* r) {
  if (r == nullptr) return nullptr;
  try {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& s : r->result.trace) trace.push_back(step_json(s));
    const nlohmann::json j = {{"text", r->result.text},
                              {"prediction", r->prediction},
                              {"correct", r->correct},
                              {"tokens", r->tokens},
                              {"terminated_by", to_string(r->result.terminated_by)},
                              {"warnings", r->result.warnings},
                              {"trace", trace}};
    return dup(j.dump());
  } catch (...) {
    set_error(NWCAD_E_INTERNAL, "cannot serialize result");
    return nullptr;
  }
}

void nwcad_result_free(nwcad_result* r) { delete r; }

nwcad_status nwcad_bench(const nwcad_backend* backend, const nwcad_slice* slice,
                         const nwcad_decode_params* params, const nwcad_bench_options* options,
                         nwcad_report** out) {
  return guarded([&] {
    require(backend, "backend");
    require(slice, "slice");
    require(out, "out");
    auto r = std::make_unique<nwcad_report>();
    r->report = bench(*backend->impl, slice->slice, to_params(params), to_options(options));
    *out = r.release();
  });
}

nwcad_status nwcad_report_accuracy(const nwcad_report* r, const char* slice, size_t* n,
                                   double* accuracy) {
  return guarded([&] {
    require(r, "report");
    require(slice, "slice");
    SliceScore score;
    if (std::string_view(slice) == "combined") {
      score = r->report.combined;
    } else {
      const SliceLabel label = label_arg(slice);
      const auto it = r->report.per_slice.find(label);
      if (it != r->report.per_slice.end()) score = it->second;
    }
    if (n != nullptr) *n = score.n;
    if (accuracy != nullptr) *accuracy = score.accuracy();
  });
}

nwcad_status nwcad_report_routing(const nwcad_report* r, const char* slice, nwcad_routing* out) {
  return guarded([&] {
    require(r, "report");
    require(slice, "slice");
    require(out, "out");
    if (std::string_view(slice) == "all") {
      check_arg(r->report.routing.traces > 0, "no routed traces");
      *out = to_c(r->report.routing);
      return;
    }
    const auto it = r->report.routing_by_slice.find(label_arg(slice));
    check_arg(it != r->report.routing_by_slice.end(), "no routed traces for '" + std::string(slice) + "'");
    *out = to_c(it->second);
  });
}

size_t nwcad_report_invariant_failure_count(const nwcad_report* r) {
  return r == nullptr ? 0 : r->report.invariant_failures.size();
}

const char* nwcad_report_invariant_failure(const nwcad_report* r, size_t i) {
  if (r == nullptr || i >= r->report.invariant_failures.size()) return nullptr;
  return r->report.invariant_failures[i].c_str();
}

char* nwcad_report_summary(const nwcad_report* r) {
  return r == nullptr ? nullptr : dup(summary_text(r->report));
}

char* nwcad_report_routing_csv(const nwcad_report* r) {
  return r == nullptr ? nullptr : dup(routing_csv(r->report));
}

nwcad_status nwcad_report_write(const nwcad_report* r, const nwcad_slice* slice, const char* dir,
                                const char* stem) {
  return guarded([&] {
    require(r, "report");
    require(slice, "slice");
    require(dir, "dir");
    require(stem, "stem");
    write_report(r->report, slice->slice, dir, stem);
  });
}

void nwcad_report_free(nwcad_report* r) { delete r; }

nwcad_status nwcad_sweep_run(const nwcad_backend* backend, const nwcad_slice* slice,
                             const nwcad_decode_params* params, const nwcad_sweep_grid* grid,
                             const nwcad_bench_options* options, nwcad_sweep** out) {
  return guarded([&] {
    require(backend, "backend");
    require(slice, "slice");
    require(grid, "grid");
    require(out, "out");
    const auto axis = [](const double* v, std::size_t n, const char* name) {
      check_arg(n == 0 || v != nullptr, std::string(name) + " values are NULL");
      return std::vector<double>(v, v + n);
    };
    SweepGrid g;
    g.tau = axis(grid->tau, grid->n_tau, "tau");
    g.kappa_pri = axis(grid->kappa_pri, grid->n_kappa_pri, "kappa_pri");
    g.kappa_ctx = axis(grid->kappa_ctx, grid->n_kappa_ctx, "kappa_ctx");
    auto s = std::make_unique<nwcad_sweep>();
    s->result = sweep(*backend->impl, slice->slice, to_params(params), g, to_options(options));
    for (const auto& cell : s->result.cells) s->reports.push_back({cell.report});
    *out = s.release();
  });
}

size_t nwcad_sweep_cell_count(const nwcad_sweep* s) {
  return s == nullptr ? 0 : s->result.cells.size();
}

const nwcad_report* nwcad_sweep_cell_report(const nwcad_sweep* s, size_t i) {
  if (s == nullptr || i >= s->reports.size()) return nullptr;
  return &s->reports[i];
}

size_t nwcad_sweep_cell_stage1(const nwcad_sweep* s, size_t i) {
  if (s == nullptr || i >= s->result.cells.size()) return 0;
  return s->result.cells[i].stage1_frozen;
}

size_t nwcad_sweep_monotone_pairs(const nwcad_sweep* s) {
  return s == nullptr ? 0 : s->result.monotone_pairs;
}

size_t nwcad_sweep_violation_count(const nwcad_sweep* s) {
  return s == nullptr ? 0 : s->result.monotonicity_violations.size();
}

const char* nwcad_sweep_violation(const nwcad_sweep* s, size_t i) {
  if (s == nullptr || i >= s->result.monotonicity_violations.size()) return nullptr;
  return s->result.monotonicity_violations[i].c_str();
}

char* nwcad_sweep_table_csv(const nwcad_sweep* s) {
  return s == nullptr ? nullptr : dup(sweep_table_csv(s->result));
}

char* nwcad_sweep_stage1_csv(const nwcad_sweep* s) {
  return s == nullptr ? nullptr : dup(sweep_stage1_csv(s->result));
}

nwcad_status nwcad_sweep_write(const nwcad_sweep* s, const nwcad_slice* slice, const char* dir) {
  return guarded([&] {
    require(s, "sweep");
    require(slice, "slice");
    require(dir, "dir");
    std::filesystem::create_directories(dir);
    const std::string d = dir;
    for (std::size_t i = 0; i < s->result.cells.size(); ++i) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "cell-%03zu", i);
      write_report(s->result.cells[i].report, slice->slice, d, stem);
    }
    const auto put = [&](const std::string& name, const std::string& text) {
      std::FILE* f = std::fopen((d + "/" + name).c_str(), "wb");
      if (f == nullptr) fail(ErrorKind::kIo, "cannot write '" + d + "/" + name + "'");
      const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
      if (std::fclose(f) != 0 || !ok) fail(ErrorKind::kIo, "write failed for '" + name + "'");
    };
    put("sweep.csv", sweep_table_csv(s->result));
    put("sweep_stage1.csv", sweep_stage1_csv(s->result));
  });
}

void nwcad_sweep_free(nwcad_sweep* s) { delete s; }

nwcad_status nwcad_latency(const nwcad_backend* backend, const nwcad_slice* slice,
                           const nwcad_decode_params* params, nwcad_mode mode_a,
                           nwcad_mode mode_b, size_t rounds, size_t max_items,
                           nwcad_latency_pair* out) {
  return guarded([&] {
    require(backend, "backend");
    require(slice, "slice");
    require(out, "out");
    const DecodeParams p = to_params(params);
    std::size_t n = slice->slice.items.size();
    if (max_items > 0 && max_items < n) n = max_items;
    std::vector<std::size_t> items(n);
    for (std::size_t i = 0; i < n; ++i) items[i] = i;
    const LatencyPair l = measure_latency(*backend->impl, slice->slice, items, p, to_mode(mode_a),
                                          to_mode(mode_b), rounds);
    *out = {mode_a, mode_b, l.sec_per_token_a, l.sec_per_token_b, l.ratio};
  });
}

char* nwcad_latency_csv(const nwcad_latency_pair* pairs, size_t n) {
  if (pairs == nullptr && n > 0) return nullptr;
  try {
    std::vector<LatencyPair> v;
    for (std::size_t i = 0; i < n; ++i) {
      v.push_back({to_mode(pairs[i].mode_a), to_mode(pairs[i].mode_b), pairs[i].sec_per_token_a,
                   pairs[i].sec_per_token_b, pairs[i].ratio});
    }
    return dup(latency_csv(v));
  } catch (const std::exception& e) {
    set_error(NWCAD_E_USAGE, e.what());
    return nullptr;
  }
}

nwcad_status nwcad_replay_check(const char* path, const nwcad_slice* slice,
                                nwcad_replay_info* out) {
  return guarded([&] {
    require(path, "path");
    const Vocabulary* vocab = nullptr;
    if (slice != nullptr && (slice->slice.world || slice->slice.scenario_vocab)) {
      vocab = &slice->slice.vocabulary();
    }
    const ReplayProvider r = replay_load(path, vocab);
    if (out != nullptr) {
      *out = {r.header().vocab_size, r.header().k, r.steps(), r.header().eos.value};
    }
  });
}

nwcad_status nwcad_capture_replays(const nwcad_backend* backend, const nwcad_slice* slice,
                                   const nwcad_decode_params* params, size_t k, const char* dir,
                                   size_t jobs) {
  return guarded([&] {
    require(backend, "backend");
    require(slice, "slice");
    require(dir, "dir");
    const DecodeParams p = to_params(params);
    capture_replays(*backend->impl, slice->slice, p.mode, p, k, dir, jobs);
  });
}

char* nwcad_normalize_answer(const char* s) {
  return s == nullptr ? nullptr : dup(squad_normalize(s));
}

nwcad_status nwcad_exact_match(const char* prediction, const char* const* golds, size_t n_golds,
                               int* out) {
  return guarded([&] {
    require(prediction, "prediction");
    require(out, "out");
    check_arg(n_golds == 0 || golds != nullptr, "golds is NULL");
    std::vector<std::string> g;
    for (std::size_t i = 0; i < n_golds; ++i) {
      require(golds[i], "gold answer");
      g.emplace_back(golds[i]);
    }
    *out = exact_match(prediction, g) ? 1 : 0;
  });
}

}  // extern "C"
