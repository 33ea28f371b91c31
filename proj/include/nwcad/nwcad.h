/* Copyright 2026 The NWCAD Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the NWCAD decoding engine.
 *
 * Conventions:
 *   - Every fallible call returns an nwcad_status. On failure a message is
 *     available from nwcad_last_error() on the calling thread until the next
 *     failing call on that thread.
 *   - Objects are opaque and released with their *_free function. Passing
 *     NULL to a *_free function is a no-op.
 *   - char* results owned by the caller are released with nwcad_string_free.
 *     const char* results are borrowed from the object that returned them.
 */
#ifndef NWCAD_NWCAD_H_
#define NWCAD_NWCAD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(NWCAD_BUILDING)
#define NWCAD_API __declspec(dllexport)
#else
#define NWCAD_API __declspec(dllimport)
#endif
#else
#define NWCAD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nwcad_status {
  NWCAD_OK = 0,
  NWCAD_E_USAGE = 1,     /* invalid argument or configuration */
  NWCAD_E_DATA = 2,      /* malformed input file or provider contract violation */
  NWCAD_E_INVARIANT = 3, /* an internal consistency check failed */
  NWCAD_E_IO = 4,
  NWCAD_E_INTERNAL = 5
} nwcad_status;

typedef enum nwcad_mode {
  NWCAD_MODE_BASELINE = 0,
  NWCAD_MODE_WITH_CONTEXT = 1,
  NWCAD_MODE_CAD = 2,
  NWCAD_MODE_ADACAD = 3,
  NWCAD_MODE_COCOA = 4,
  NWCAD_MODE_NWCAD_BC = 5,
  NWCAD_MODE_NWCAD = 6,
  NWCAD_MODE_NWCAD_NOFALLBACK = 7
} nwcad_mode;

typedef enum nwcad_fallback_kind {
  NWCAD_FALLBACK_CAD = 0,
  NWCAD_FALLBACK_ADACAD = 1,
  NWCAD_FALLBACK_COCOA = 2
} nwcad_fallback_kind;

typedef enum nwcad_route {
  NWCAD_ROUTE_NO_CONTEXT = 0,
  NWCAD_ROUTE_CONTEXT = 1,
  NWCAD_ROUTE_FALLBACK = 2
} nwcad_route;

NWCAD_API const char* nwcad_last_error(void);
NWCAD_API const char* nwcad_version(void);
NWCAD_API void nwcad_string_free(char* s);

/* Names: baseline, with_context, cad, adacad, cocoa, nwcad_bc, nwcad,
 * nwcad_nofallback. */
NWCAD_API nwcad_status nwcad_mode_from_name(const char* name, nwcad_mode* out);
NWCAD_API const char* nwcad_mode_name(nwcad_mode mode);
/* Names: cad, adacad, cocoa. */
NWCAD_API nwcad_status nwcad_fallback_from_name(const char* name, nwcad_fallback_kind* out);

/* ---- parameters ------------------------------------------------------- */

typedef struct nwcad_decode_params {
  size_t max_new_tokens;     /* 32 */
  size_t min_new_tokens;     /* 0 */
  size_t max_context_length; /* 4064 */
  int64_t seed;              /* 42 */
  nwcad_mode mode;           /* NWCAD_MODE_NWCAD */
  double tau;                /* 0.3 */
  double kappa_pri;          /* 0.30 */
  double kappa_ctx;          /* 0.05 */
  size_t js_top_k;           /* 50 */
  nwcad_fallback_kind fallback; /* NWCAD_FALLBACK_COCOA */
  double cad_alpha;          /* 1.0 */
  double cocoa_epsilon;      /* 0.05 */
  double cocoa_alpha_max;    /* 2.0 */
} nwcad_decode_params;

NWCAD_API void nwcad_decode_params_init(nwcad_decode_params* p);

typedef struct nwcad_slice_config {
  size_t restated;              /* 100 */
  size_t distractor;            /* 100 */
  size_t helpful;               /* 100 */
  double flip_fraction;         /* 0.5 */
  double weak_helpful_fraction; /* 0.2 */
  size_t noise_sentences;       /* 2 */
} nwcad_slice_config;

NWCAD_API void nwcad_slice_config_init(nwcad_slice_config* c);

typedef struct nwcad_bench_options {
  size_t jobs;          /* 1 */
  int bc_filter;        /* 1: score neutral slices on baseline-correct items only */
  double bc_threshold;  /* 0.8 */
  size_t bc_prefix_len; /* 8 */
} nwcad_bench_options;

NWCAD_API void nwcad_bench_options_init(nwcad_bench_options* o);

/* ---- slices ----------------------------------------------------------- */

typedef struct nwcad_slice nwcad_slice;

NWCAD_API nwcad_status nwcad_slice_generate(const nwcad_slice_config* config, uint64_t seed,
                                            nwcad_slice** out);
/* A slice directory (world.json + items.jsonl) or a scenario file. */
NWCAD_API nwcad_status nwcad_slice_load(const char* path, nwcad_slice** out);
NWCAD_API nwcad_status nwcad_slice_save(const nwcad_slice* slice, const char* dir);
NWCAD_API size_t nwcad_slice_size(const nwcad_slice* slice);
NWCAD_API const char* nwcad_slice_item_id(const nwcad_slice* slice, size_t index);
NWCAD_API const char* nwcad_slice_item_label(const nwcad_slice* slice, size_t index);
NWCAD_API nwcad_status nwcad_slice_find(const nwcad_slice* slice, const char* id, size_t* index);
NWCAD_API void nwcad_slice_free(nwcad_slice* slice);

typedef struct nwcad_validation {
  size_t restated, helpful, distractor;
  double restated_containment_pct;
  double helpful_containment_pct;
  double distractor_exclusion_pct;
  double distractor_inclusion_pct;
  int all_pass;
} nwcad_validation;

NWCAD_API nwcad_status nwcad_slice_validate(const nwcad_slice* slice, nwcad_validation* out);

/* ---- backends --------------------------------------------------------- */

typedef struct nwcad_backend nwcad_backend;

/* kind: "toy", "scripted", "replay" (replay_dir required) or "auto"
 * (scripted for scenario files, toy otherwise). The backend
 * keeps its own reference to whatever it needs from the slice. */
NWCAD_API nwcad_status nwcad_backend_create(const nwcad_slice* slice, const char* kind,
                                            const char* replay_dir, nwcad_backend** out);
NWCAD_API void nwcad_backend_free(nwcad_backend* backend);

/* ---- single decodes --------------------------------------------------- */

typedef struct nwcad_result nwcad_result;

typedef struct nwcad_step {
  size_t index;
  nwcad_route route;
  uint32_t token;
  double seconds;
  int has_divergence, has_margin_nc, has_margin_ctx, has_alpha;
  double divergence, margin_nc, margin_ctx, alpha;
  int fallback_suppressed;
} nwcad_step;

NWCAD_API nwcad_status nwcad_decode_item(const nwcad_backend* backend, const nwcad_slice* slice,
                                         size_t index, const nwcad_decode_params* params,
                                         nwcad_result** out);
NWCAD_API const char* nwcad_result_text(const nwcad_result* r);
/* The extracted answer and whether it matches a gold answer. */
NWCAD_API const char* nwcad_result_prediction(const nwcad_result* r);
NWCAD_API int nwcad_result_correct(const nwcad_result* r);
NWCAD_API size_t nwcad_result_token_count(const nwcad_result* r);
NWCAD_API const uint32_t* nwcad_result_tokens(const nwcad_result* r);
NWCAD_API size_t nwcad_result_step_count(const nwcad_result* r);
NWCAD_API nwcad_status nwcad_result_step(const nwcad_result* r, size_t i, nwcad_step* out);
NWCAD_API int nwcad_result_ended_with_eos(const nwcad_result* r);
NWCAD_API char* nwcad_result_to_json(const nwcad_result* r);
NWCAD_API void nwcad_result_free(nwcad_result* r);

/* ---- benchmark reports ------------------------------------------------ */

typedef struct nwcad_report nwcad_report;

typedef struct nwcad_routing {
  double pct_no_context, pct_context, pct_fallback, pct_any_fallback;
  size_t steps, traces;
} nwcad_routing;

NWCAD_API nwcad_status nwcad_bench(const nwcad_backend* backend, const nwcad_slice* slice,
                                   const nwcad_decode_params* params,
                                   const nwcad_bench_options* options, nwcad_report** out);
/* slice: "restated", "distractor", "helpful", "scenario" or "combined".
 * Reports n = 0 for a slice with no scored items. */
NWCAD_API nwcad_status nwcad_report_accuracy(const nwcad_report* r, const char* slice, size_t* n,
                                             double* accuracy);
/* slice as above, or "all"; NWCAD_E_USAGE when nothing was routed there. */
NWCAD_API nwcad_status nwcad_report_routing(const nwcad_report* r, const char* slice,
                                            nwcad_routing* out);
NWCAD_API size_t nwcad_report_invariant_failure_count(const nwcad_report* r);
NWCAD_API const char* nwcad_report_invariant_failure(const nwcad_report* r, size_t i);
NWCAD_API char* nwcad_report_summary(const nwcad_report* r);
NWCAD_API char* nwcad_report_routing_csv(const nwcad_report* r);
/* Writes <dir>/<stem>.items.jsonl, .accuracy.csv, .routing.csv. */
NWCAD_API nwcad_status nwcad_report_write(const nwcad_report* r, const nwcad_slice* slice,
                                          const char* dir, const char* stem);
NWCAD_API void nwcad_report_free(nwcad_report* r);

/* ---- sweeps ----------------------------------------------------------- */

typedef struct nwcad_sweep nwcad_sweep;

/* Empty axes (n == 0) take the value from params. */
typedef struct nwcad_sweep_grid {
  const double* tau;
  size_t n_tau;
  const double* kappa_pri;
  size_t n_kappa_pri;
  const double* kappa_ctx;
  size_t n_kappa_ctx;
} nwcad_sweep_grid;

NWCAD_API nwcad_status nwcad_sweep_run(const nwcad_backend* backend, const nwcad_slice* slice,
                                       const nwcad_decode_params* params,
                                       const nwcad_sweep_grid* grid,
                                       const nwcad_bench_options* options, nwcad_sweep** out);
NWCAD_API size_t nwcad_sweep_cell_count(const nwcad_sweep* s);
NWCAD_API const nwcad_report* nwcad_sweep_cell_report(const nwcad_sweep* s, size_t i);
NWCAD_API size_t nwcad_sweep_cell_stage1(const nwcad_sweep* s, size_t i);
NWCAD_API size_t nwcad_sweep_monotone_pairs(const nwcad_sweep* s);
NWCAD_API size_t nwcad_sweep_violation_count(const nwcad_sweep* s);
NWCAD_API const char* nwcad_sweep_violation(const nwcad_sweep* s, size_t i);
NWCAD_API char* nwcad_sweep_table_csv(const nwcad_sweep* s);
NWCAD_API char* nwcad_sweep_stage1_csv(const nwcad_sweep* s);
/* Writes sweep.csv, sweep_stage1.csv and cell-NNN.* reports into dir. */
NWCAD_API nwcad_status nwcad_sweep_write(const nwcad_sweep* s, const nwcad_slice* slice,
                                         const char* dir);
NWCAD_API void nwcad_sweep_free(nwcad_sweep* s);

/* ---- latency ---------------------------------------------------------- */

typedef struct nwcad_latency_pair {
  nwcad_mode mode_a, mode_b;
  double sec_per_token_a, sec_per_token_b, ratio;
} nwcad_latency_pair;

/* Decodes the first max_items items (0 = all) for `rounds` rounds, alternating
 * A B B A and B A A B order per item after an untimed warm-up decode;
 * params->mode is ignored. */
NWCAD_API nwcad_status nwcad_latency(const nwcad_backend* backend, const nwcad_slice* slice,
                                     const nwcad_decode_params* params, nwcad_mode mode_a,
                                     nwcad_mode mode_b, size_t rounds, size_t max_items,
                                     nwcad_latency_pair* out);
NWCAD_API char* nwcad_latency_csv(const nwcad_latency_pair* pairs, size_t n);

/* ---- replay files ----------------------------------------------------- */

typedef struct nwcad_replay_info {
  size_t vocab_size;
  size_t k;
  size_t steps;
  uint32_t eos_id;
} nwcad_replay_info;

/* Parses and validates a replay file; with a slice, the tokenizer hash must
 * match the slice vocabulary. */
NWCAD_API nwcad_status nwcad_replay_check(const char* path, const nwcad_slice* slice,
                                          nwcad_replay_info* out);
/* Captures every item along its live decode path in params->mode and writes
 * <dir>/<item id>.replay.jsonl. k = 0 keeps the full vocabulary. */
NWCAD_API nwcad_status nwcad_capture_replays(const nwcad_backend* backend,
                                             const nwcad_slice* slice,
                                             const nwcad_decode_params* params, size_t k,
                                             const char* dir, size_t jobs);

/* ---- scoring ---------------------------------------------------------- */

NWCAD_API char* nwcad_normalize_answer(const char* s);
NWCAD_API nwcad_status nwcad_exact_match(const char* prediction, const char* const* golds,
                                         size_t n_golds, int* out);

#ifdef __cplusplus
}
#endif

#endif /* NWCAD_NWCAD_H_ */
