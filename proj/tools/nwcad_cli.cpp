// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the engine only through nwcad.h.
//
// Exit codes: 0 success, 1 usage, 2 data or I/O error, 3 invariant failure.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nwcad/nwcad.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInvariant = 3;

// Thrown to unwind with a specific exit code after printing the message.
struct Exit {
  int code;
};

int exit_code(nwcad_status s) {
  switch (s) {
    case NWCAD_OK: return kExitOk;
    case NWCAD_E_USAGE: return kExitUsage;
    case NWCAD_E_DATA:
    case NWCAD_E_IO: return kExitData;
    case NWCAD_E_INVARIANT:
    case NWCAD_E_INTERNAL: return kExitInvariant;
  }
  return kExitInvariant;
}

void check(nwcad_status s, const std::string& what) {
  if (s == NWCAD_OK) return;
  std::cerr << "error: " << what << ": " << nwcad_last_error() << '\n';
  throw Exit{exit_code(s)};
}

struct StringDeleter {
  void operator()(char* s) const { nwcad_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

std::string take(char* s) {
  OwnedString owned(s);
  return owned ? std::string(owned.get()) : std::string();
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T* get() const { return p; }
  T** out() { return &p; }
};

using SliceHandle = Handle<nwcad_slice, nwcad_slice_free>;
using BackendHandle = Handle<nwcad_backend, nwcad_backend_free>;
using ResultHandle = Handle<nwcad_result, nwcad_result_free>;
using ReportHandle = Handle<nwcad_report, nwcad_report_free>;
using SweepHandle = Handle<nwcad_sweep, nwcad_sweep_free>;

// Options shared by the subcommands that decode.
struct RunOptions {
  nwcad_decode_params params{};
  std::string mode = "nwcad";
  std::string fallback = "cocoa";
  std::string backend = "auto";
  std::string slices;
  std::string replay_dir;
  std::string out_dir;
  std::size_t jobs = 1;
  bool no_bc_filter = false;

  RunOptions() {
    nwcad_decode_params_init(&params);
    if (const char* env = std::getenv("NWCAD_OUTPUT_DIR")) out_dir = env;
  }

  nwcad_decode_params resolved() {
    nwcad_decode_params p = params;
    check(nwcad_mode_from_name(mode.c_str(), &p.mode), "--mode");
    check(nwcad_fallback_from_name(fallback.c_str(), &p.fallback), "--fallback");
    return p;
  }

  nwcad_bench_options bench_options() const {
    nwcad_bench_options o;
    nwcad_bench_options_init(&o);
    o.jobs = jobs;
    o.bc_filter = no_bc_filter ? 0 : 1;
    return o;
  }
};

void add_decode_flags(CLI::App* cmd, RunOptions& o) {
  auto& p = o.params;
  cmd->add_option("--mode", o.mode,
                  "baseline | with_context | cad | adacad | cocoa | nwcad_bc | nwcad | "
                  "nwcad_nofallback")
      ->capture_default_str();
  cmd->add_option("--max-new-tokens", p.max_new_tokens)->capture_default_str();
  cmd->add_option("--min-new-tokens", p.min_new_tokens, "EOS is masked until this many tokens")
      ->capture_default_str();
  cmd->add_option("--max-context-length", p.max_context_length,
                  "context tokens kept (head-first truncation)")
      ->capture_default_str();
  cmd->add_option("--seed", p.seed, "seed for slice generation and bookkeeping")
      ->capture_default_str();
  cmd->add_option("--tau", p.tau, "neutrality threshold on the JS divergence")
      ->capture_default_str();
  cmd->add_option("--kappa-pri", p.kappa_pri, "Stage-1 margin threshold (no-context stream)")
      ->capture_default_str();
  cmd->add_option("--kappa-ctx", p.kappa_ctx, "Stage-2 margin threshold (context stream)")
      ->capture_default_str();
  cmd->add_option("--js-topk", p.js_top_k, "top-K union size for the divergence")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--fallback", o.fallback, "cad | adacad | cocoa")->capture_default_str();
  cmd->add_option("--cad-alpha", p.cad_alpha)->capture_default_str();
  cmd->add_option("--cocoa-eps", p.cocoa_epsilon)->capture_default_str();
  cmd->add_option("--cocoa-alpha-max", p.cocoa_alpha_max)->capture_default_str();
  cmd->add_option("--backend", o.backend, "toy | scripted | replay | auto")->capture_default_str();
  cmd->add_option("--slices", o.slices,
                  "slice directory or scenario file (default: generate from --seed)");
  cmd->add_option("--replay-dir", o.replay_dir, "directory of <item id>.replay.jsonl files");
}

void add_run_flags(CLI::App* cmd, RunOptions& o) {
  add_decode_flags(cmd, o);
  cmd->add_option("--jobs", o.jobs, "worker threads")->capture_default_str()->check(
      CLI::PositiveNumber);
  cmd->add_option("--out-dir", o.out_dir, "report directory (default: $NWCAD_OUTPUT_DIR)");
  cmd->add_flag("--no-bc-filter", o.no_bc_filter,
                "score every neutral item instead of the baseline-correct subset");
}

void open_slice(const RunOptions& o, SliceHandle& slice) {
  if (o.slices.empty()) {
    nwcad_slice_config cfg;
    nwcad_slice_config_init(&cfg);
    check(nwcad_slice_generate(&cfg, static_cast<std::uint64_t>(o.params.seed), slice.out()),
          "generating slice");
  } else {
    check(nwcad_slice_load(o.slices.c_str(), slice.out()), "loading " + o.slices);
  }
}

void open_backend(const RunOptions& o, const SliceHandle& slice, BackendHandle& backend) {
  check(nwcad_backend_create(slice.get(), o.backend.c_str(),
                             o.replay_dir.empty() ? nullptr : o.replay_dir.c_str(), backend.out()),
        "backend");
}

std::vector<double> parse_values(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(start, end - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      std::cerr << "error: " << flag << ": '" << item << "' is not a number\n";
      throw Exit{kExitUsage};
    }
    start = end + 1;
  }
  return out;
}

int run_decode(RunOptions& o, const std::string& item_id, bool json) {
  SliceHandle slice;
  BackendHandle backend;
  open_slice(o, slice);
  open_backend(o, slice, backend);
  std::size_t index = 0;
  if (item_id.empty()) {
    if (nwcad_slice_size(slice.get()) == 0) {
      std::cerr << "error: slice has no items\n";
      return kExitData;
    }
  } else {
    check(nwcad_slice_find(slice.get(), item_id.c_str(), &index), "--item");
  }
  const nwcad_decode_params p = o.resolved();
  ResultHandle result;
  check(nwcad_decode_item(backend.get(), slice.get(), index, &p, result.out()), "decode");
  if (json) {
    std::cout << take(nwcad_result_to_json(result.get())) << '\n';
    return kExitOk;
  }
  std::cout << "item " << nwcad_slice_item_id(slice.get(), index) << " ("
            << nwcad_slice_item_label(slice.get(), index) << ")  mode " << nwcad_mode_name(p.mode)
            << '\n'
            << "text: " << nwcad_result_text(result.get()) << '\n'
            << "answer: " << nwcad_result_prediction(result.get())
            << (nwcad_result_correct(result.get()) ? "  [correct]" : "  [wrong]") << '\n';
  static const char* kRoutes[] = {"no_context", "context", "fallback"};
  for (std::size_t i = 0; i < nwcad_result_step_count(result.get()); ++i) {
    nwcad_step s;
    check(nwcad_result_step(result.get(), i, &s), "trace");
    std::cout << "  step " << s.index << "  " << kRoutes[s.route] << "  token " << s.token;
    if (s.has_divergence) std::cout << "  D " << s.divergence;
    if (s.has_margin_nc) std::cout << "  m_nc " << s.margin_nc;
    if (s.has_margin_ctx) std::cout << "  m_ctx " << s.margin_ctx;
    if (s.has_alpha) std::cout << "  alpha " << s.alpha;
    std::cout << '\n';
  }
  return kExitOk;
}

void measure_latency_pairs(RunOptions& o, const SliceHandle& slice,
                           const BackendHandle& backend, std::size_t items) {
  std::vector<nwcad_latency_pair> pairs;
  for (auto [fallback, base] : {std::pair{NWCAD_FALLBACK_CAD, NWCAD_MODE_CAD},
                                std::pair{NWCAD_FALLBACK_ADACAD, NWCAD_MODE_ADACAD},
                                std::pair{NWCAD_FALLBACK_COCOA, NWCAD_MODE_COCOA}}) {
    nwcad_decode_params p = o.resolved();
    p.fallback = fallback;
    nwcad_latency_pair pair;
    check(nwcad_latency(backend.get(), slice.get(), &p, NWCAD_MODE_NWCAD, base, 1, items, &pair),
          "latency");
    pairs.push_back(pair);
  }
  const std::string csv = take(nwcad_latency_csv(pairs.data(), pairs.size()));
  std::cout << "\nlatency (sec/token)\n" << csv;
  if (!o.out_dir.empty()) {
    std::filesystem::create_directories(o.out_dir);
    std::ofstream(o.out_dir + "/latency.csv") << csv;
  }
}

int run_bench(RunOptions& o, bool latency, std::size_t latency_items) {
  SliceHandle slice;
  BackendHandle backend;
  open_slice(o, slice);
  open_backend(o, slice, backend);
  const nwcad_decode_params p = o.resolved();
  const nwcad_bench_options opts = o.bench_options();
  ReportHandle report;
  check(nwcad_bench(backend.get(), slice.get(), &p, &opts, report.out()), "bench");
  std::cout << take(nwcad_report_summary(report.get()));
  std::cout << '\n' << take(nwcad_report_routing_csv(report.get()));
  if (!o.out_dir.empty()) {
    check(nwcad_report_write(report.get(), slice.get(), o.out_dir.c_str(), nwcad_mode_name(p.mode)),
          "writing report");
    std::cout << "reports written to " << o.out_dir << '\n';
  }
  if (latency) measure_latency_pairs(o, slice, backend, latency_items);
  return nwcad_report_invariant_failure_count(report.get()) == 0 ? kExitOk : kExitInvariant;
}

struct SweepOptions {
  std::string param;
  std::string values;
  std::string tau_values, kappa_pri_values, kappa_ctx_values;
};

int run_sweep(RunOptions& o, const SweepOptions& s) {
  std::vector<double> tau, pri, ctx;
  if (!s.param.empty() != !s.values.empty()) {
    std::cerr << "error: --param and --values go together\n";
    return kExitUsage;
  }
  if (!s.param.empty()) {
    auto v = parse_values(s.values, "--values");
    if (s.param == "tau") {
      tau = v;
    } else if (s.param == "kappa_pri" || s.param == "kappa-pri") {
      pri = v;
    } else if (s.param == "kappa_ctx" || s.param == "kappa-ctx") {
      ctx = v;
    } else {
      std::cerr << "error: --param must be tau, kappa_pri or kappa_ctx\n";
      return kExitUsage;
    }
  }
  const auto extend = [](std::vector<double>& axis, const std::string& text, const char* flag) {
    if (text.empty()) return;
    if (!axis.empty()) {
      std::cerr << "error: " << flag << " repeats the --param axis\n";
      throw Exit{kExitUsage};
    }
    axis = parse_values(text, flag);
  };
  extend(tau, s.tau_values, "--tau-values");
  extend(pri, s.kappa_pri_values, "--kappa-pri-values");
  extend(ctx, s.kappa_ctx_values, "--kappa-ctx-values");
  if (tau.empty() && pri.empty() && ctx.empty()) {
    std::cerr << "error: sweep needs --param/--values or at least one --*-values grid\n";
    return kExitUsage;
  }

  SliceHandle slice;
  BackendHandle backend;
  open_slice(o, slice);
  open_backend(o, slice, backend);
  const nwcad_decode_params p = o.resolved();
  const nwcad_bench_options opts = o.bench_options();
  const nwcad_sweep_grid grid{tau.data(), tau.size(), pri.data(), pri.size(), ctx.data(), ctx.size()};
  SweepHandle sweep;
  check(nwcad_sweep_run(backend.get(), slice.get(), &p, &grid, &opts, sweep.out()), "sweep");

  std::cout << take(nwcad_sweep_table_csv(sweep.get())) << '\n'
            << take(nwcad_sweep_stage1_csv(sweep.get()));
  const std::size_t violations = nwcad_sweep_violation_count(sweep.get());
  std::cout << "frozen-trace monotonicity: " << nwcad_sweep_monotone_pairs(sweep.get()) - violations
            << " of " << nwcad_sweep_monotone_pairs(sweep.get()) << " adjacent pairs hold\n";
  for (std::size_t i = 0; i < violations; ++i) {
    std::cout << "  violation: " << nwcad_sweep_violation(sweep.get(), i) << '\n';
  }
  std::size_t failures = 0;
  for (std::size_t i = 0; i < nwcad_sweep_cell_count(sweep.get()); ++i) {
    const nwcad_report* r = nwcad_sweep_cell_report(sweep.get(), i);
    for (std::size_t f = 0; f < nwcad_report_invariant_failure_count(r); ++f, ++failures) {
      std::cout << "INVARIANT FAILED: cell " << i << ": " << nwcad_report_invariant_failure(r, f)
                << '\n';
    }
  }
  if (!o.out_dir.empty()) {
    check(nwcad_sweep_write(sweep.get(), slice.get(), o.out_dir.c_str()), "writing sweep");
    std::cout << "sweep written to " << o.out_dir << '\n';
  }
  return violations == 0 && failures == 0 ? kExitOk : kExitInvariant;
}

void print_validation(const nwcad_validation& v) {
  std::cout << "restated   " << v.restated << " items, context contains gold: "
            << v.restated_containment_pct << "%\n"
            << "helpful    " << v.helpful << " items, context contains gold: "
            << v.helpful_containment_pct << "%\n"
            << "distractor " << v.distractor << " items, context excludes gold: "
            << v.distractor_exclusion_pct << "%, mentions distractor: "
            << v.distractor_inclusion_pct << "%\n";
}

struct GenOptions {
  std::string out;
  std::int64_t seed = 42;
  nwcad_slice_config config{};
  GenOptions() { nwcad_slice_config_init(&config); }
};

int run_gen(GenOptions& g, const std::string& default_root) {
  if (g.out.empty()) {
    if (default_root.empty()) {
      std::cerr << "error: gen-slices needs --out (or NWCAD_OUTPUT_DIR)\n";
      return kExitUsage;
    }
    g.out = default_root + "/slices";
  }
  SliceHandle slice;
  check(nwcad_slice_generate(&g.config, static_cast<std::uint64_t>(g.seed), slice.out()),
        "generating slice");
  check(nwcad_slice_save(slice.get(), g.out.c_str()), "writing " + g.out);
  nwcad_validation v;
  check(nwcad_slice_validate(slice.get(), &v), "validate");
  std::cout << "wrote " << nwcad_slice_size(slice.get()) << " items to " << g.out << '\n';
  print_validation(v);
  return v.all_pass ? kExitOk : kExitInvariant;
}

int run_validate(const std::string& path) {
  SliceHandle slice;
  check(nwcad_slice_load(path.c_str(), slice.out()), "loading " + path);
  nwcad_validation v;
  check(nwcad_slice_validate(slice.get(), &v), "validate");
  print_validation(v);
  std::cout << (v.all_pass ? "slice checks pass\n" : "slice checks FAILED\n");
  return v.all_pass ? kExitOk : kExitInvariant;
}

struct ReplayOptions {
  std::vector<std::string> files;
  std::string capture_dir;
  std::size_t k = 0;
};

int run_replay_check(RunOptions& o, ReplayOptions& r) {
  SliceHandle slice;
  if (!o.slices.empty() || !r.capture_dir.empty()) open_slice(o, slice);
  if (!r.capture_dir.empty()) {
    BackendHandle backend;
    open_backend(o, slice, backend);
    const nwcad_decode_params p = o.resolved();
    check(nwcad_capture_replays(backend.get(), slice.get(), &p, r.k, r.capture_dir.c_str(), o.jobs),
          "capture");
    for (std::size_t i = 0; i < nwcad_slice_size(slice.get()); ++i) {
      r.files.push_back(r.capture_dir + "/" + nwcad_slice_item_id(slice.get(), i) + ".replay.jsonl");
    }
    std::cout << "captured " << nwcad_slice_size(slice.get()) << " items in mode "
              << nwcad_mode_name(p.mode) << " to " << r.capture_dir << '\n';
  }
  if (r.files.empty()) {
    std::cerr << "error: replay-check needs files or --capture\n";
    return kExitUsage;
  }
  int worst = kExitOk;
  for (const auto& f : r.files) {
    nwcad_replay_info info;
    const nwcad_status s = nwcad_replay_check(f.c_str(), slice.get(), &info);
    if (s == NWCAD_OK) {
      std::cout << "ok    " << f << "  vocab " << info.vocab_size << "  k " << info.k << "  steps "
                << info.steps << '\n';
    } else {
      std::cout << "FAIL  " << f << ": " << nwcad_last_error() << '\n';
      worst = std::max(worst, exit_code(s));
    }
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"No-worse context-aware decoding: decode, benchmark and sweep."};
  app.set_config("--config", "", "TOML/INI file of flag values; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();  // lets --config follow the subcommand name

  RunOptions decode_opts;
  std::string item_id;
  bool json = false;
  auto* decode = app.add_subcommand("decode", "decode one item and print the routed trace");
  add_decode_flags(decode, decode_opts);
  decode->add_option("--item", item_id, "item id (default: first item)");
  decode->add_flag("--json", json, "print the full result as JSON");

  RunOptions bench_opts;
  bool latency = false;
  std::size_t latency_items = 30;
  auto* bench = app.add_subcommand("bench", "score a mode on every slice");
  add_run_flags(bench, bench_opts);
  bench->add_flag("--latency", latency, "also time nwcad against each standalone tilt decoder");
  bench->add_option("--latency-items", latency_items, "items per latency workload (0 = all)")
      ->capture_default_str();

  RunOptions sweep_opts;
  SweepOptions sweep_spec;
  auto* sweep = app.add_subcommand("sweep", "evaluate a threshold grid");
  add_run_flags(sweep, sweep_opts);
  sweep->add_option("--param", sweep_spec.param, "tau | kappa_pri | kappa_ctx");
  sweep->add_option("--values", sweep_spec.values, "comma-separated values for --param");
  sweep->add_option("--tau-values", sweep_spec.tau_values, "comma-separated tau grid");
  sweep->add_option("--kappa-pri-values", sweep_spec.kappa_pri_values,
                    "comma-separated kappa_pri grid");
  sweep->add_option("--kappa-ctx-values", sweep_spec.kappa_ctx_values,
                    "comma-separated kappa_ctx grid");

  GenOptions gen_opts;
  auto* gen = app.add_subcommand("gen-slices", "generate restated/distractor/helpful slices");
  gen->add_option("--out", gen_opts.out, "output directory (default: $NWCAD_OUTPUT_DIR/slices)");
  gen->add_option("--seed", gen_opts.seed)->capture_default_str();
  gen->add_option("--restated", gen_opts.config.restated)->capture_default_str();
  gen->add_option("--distractor", gen_opts.config.distractor)->capture_default_str();
  gen->add_option("--helpful", gen_opts.config.helpful)->capture_default_str();
  gen->add_option("--flip-fraction", gen_opts.config.flip_fraction,
                  "share of distractor items strong enough to flip with-context decoding")
      ->capture_default_str();
  gen->add_option("--weak-helpful-fraction", gen_opts.config.weak_helpful_fraction)
      ->capture_default_str();
  gen->add_option("--noise-sentences", gen_opts.config.noise_sentences)->capture_default_str();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check slice containment/exclusion properties");
  validate->add_option("--slices", validate_path, "slice directory or scenario file")->required();

  RunOptions replay_opts;
  ReplayOptions replay_spec;
  auto* replay = app.add_subcommand("replay-check", "validate replay files, optionally capturing them first");
  add_decode_flags(replay, replay_opts);
  replay->add_option("files", replay_spec.files, "replay files to check");
  replay->add_option("--capture", replay_spec.capture_dir,
                     "capture every slice item along its live path in --mode into this directory");
  replay->add_option("--k", replay_spec.k, "top-k kept per stream when capturing (0 = full vocab)")
      ->capture_default_str();
  replay->add_option("--jobs", replay_opts.jobs)->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*decode) return run_decode(decode_opts, item_id, json);
    if (*bench) return run_bench(bench_opts, latency, latency_items);
    if (*sweep) return run_sweep(sweep_opts, sweep_spec);
    if (*gen) {
      const char* env = std::getenv("NWCAD_OUTPUT_DIR");
      return run_gen(gen_opts, env ? env : "");
    }
    if (*validate) return run_validate(validate_path);
    if (*replay) return run_replay_check(replay_opts, replay_spec);
  } catch (const Exit& e) {
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
