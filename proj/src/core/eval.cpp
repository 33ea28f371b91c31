// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/eval.hpp"

#include <algorithm>
#include <cstdint>

#include "nwcad/error.hpp"

namespace nwcad {
namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

bool is_unicode_punct(std::uint32_t cp) {
  switch (cp) {
    case 0x00A1: case 0x00A7: case 0x00AB: case 0x00B6: case 0x00B7: case 0x00BB: case 0x00BF:
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x3001 && cp <= 0x303F) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
         (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
         (cp >= 0xFF5B && cp <= 0xFF65);
}

// Length and code point of the UTF-8 sequence at s[i]; length 1 and the raw
// byte for malformed input.
std::pair<std::size_t, std::uint32_t> utf8_at(std::string_view s, std::size_t i) {
  const auto b = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  std::uint32_t cp = b;
  if (b >= 0xC0 && b < 0xE0) {
    len = 2;
    cp = b & 0x1F;
  } else if (b >= 0xE0 && b < 0xF0) {
    len = 3;
    cp = b & 0x0F;
  } else if (b >= 0xF0 && b < 0xF8) {
    len = 4;
    cp = b & 0x07;
  } else {
    return {1, b};
  }
  if (i + len > s.size()) return {1, b};
  for (std::size_t k = 1; k < len; ++k) {
    const auto c = static_cast<unsigned char>(s[i + k]);
    if ((c & 0xC0) != 0x80) return {1, b};
    cp = (cp << 6) | (c & 0x3F);
  }
  return {len, cp};
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f' ||
         (c >= 0x1C && c <= 0x1F);
}

// Word characters after punctuation removal: ASCII alphanumerics and any
// non-ASCII byte.
bool is_word(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string_view first_nonempty_line(std::string_view s) {
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    const auto line = trim(s.substr(start, end - start));
    if (!line.empty()) return line;
    start = end + 1;
  }
  return {};
}

}  // namespace

std::string squad_normalize(std::string_view s) {
  std::string no_punct;
  no_punct.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      if (!is_ascii_punct(c)) {
        no_punct += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
      }
      ++i;
      continue;
    }
    const auto [len, cp] = utf8_at(s, i);
    if (!is_unicode_punct(cp)) no_punct.append(s.substr(i, len));
    i += len;
  }

  std::string no_articles;
  no_articles.reserve(no_punct.size());
  for (std::size_t i = 0; i < no_punct.size();) {
    if (!is_word(static_cast<unsigned char>(no_punct[i]))) {
      no_articles += no_punct[i++];
      continue;
    }
    std::size_t j = i;
    while (j < no_punct.size() && is_word(static_cast<unsigned char>(no_punct[j]))) ++j;
    const std::string_view word(no_punct.data() + i, j - i);
    if (word == "a" || word == "an" || word == "the") {
      no_articles += ' ';
    } else {
      no_articles.append(word);
    }
    i = j;
  }

  std::string out;
  out.reserve(no_articles.size());
  for (std::size_t i = 0; i < no_articles.size();) {
    while (i < no_articles.size() && is_space(static_cast<unsigned char>(no_articles[i]))) ++i;
    std::size_t j = i;
    while (j < no_articles.size() && !is_space(static_cast<unsigned char>(no_articles[j]))) ++j;
    if (j > i) {
      if (!out.empty()) out += ' ';
      out.append(no_articles, i, j - i);
    }
    i = j;
  }
  return out;
}

bool exact_match(std::string_view prediction, std::span<const std::string> golds) {
  check_arg(!golds.empty(), "exact_match needs at least one gold answer");
  const std::string p = squad_normalize(prediction);
  return std::any_of(golds.begin(), golds.end(),
                     [&](const std::string& g) { return squad_normalize(g) == p; });
}

std::string extract_answer(std::string_view text) {
  static constexpr std::string_view kMarker = "Answer:";
  const std::size_t pos = text.rfind(kMarker);
  if (pos != std::string_view::npos) {
    return std::string(first_nonempty_line(text.substr(pos + kMarker.size())));
  }
  return std::string(first_nonempty_line(text));
}

bool contains_normalized(std::string_view haystack, std::string_view needle) {
  const std::string n = squad_normalize(needle);
  if (n.empty()) return false;
  const std::string h = " " + squad_normalize(haystack) + " ";
  return h.find(" " + n + " ") != std::string::npos;
}

std::vector<std::size_t> bc_filter(std::span<const BaselineRun> runs, double threshold,
                                   std::size_t prefix_len) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& run = runs[i];
    check_arg(run.item != nullptr, "bc_filter run without an item");
    if (run.baseline == nullptr) {
      fail(ErrorKind::kInvalidArgument, "item '" + run.item->id + "' has no baseline trace");
    }
    if (!exact_match(extract_answer(run.baseline->text), run.item->golds)) continue;
    const std::size_t n = std::min(prefix_len, run.baseline->trace.size());
    bool confident = true;
    for (std::size_t t = 0; t < n; ++t) {
      const auto& margin = run.baseline->trace[t].decision.margin_nc;
      if (!margin) {
        fail(ErrorKind::kInvalidArgument,
             "item '" + run.item->id + "' trace lacks no-context margins");
      }
      if (*margin < threshold) {
        confident = false;
        break;
      }
    }
    if (confident) kept.push_back(i);
  }
  return kept;
}

RoutingSummary routing_stats(std::span<const GenerationResult* const> results) {
  check_arg(!results.empty(), "routing_stats needs at least one trace");
  std::size_t counts[3] = {0, 0, 0};
  std::size_t with_fallback = 0;
  RoutingSummary s;
  for (const GenerationResult* r : results) {
    bool any = false;
    for (const auto& rec : r->trace) {
      ++counts[static_cast<int>(rec.decision.route)];
      any = any || rec.decision.route == Route::kFallback;
    }
    with_fallback += any ? 1 : 0;
    s.steps += r->trace.size();
  }
  s.traces = results.size();
  check_arg(s.steps > 0, "routing_stats over traces with no steps");
  const double steps = static_cast<double>(s.steps);
  s.pct_no_context = 100.0 * static_cast<double>(counts[0]) / steps;
  s.pct_context = 100.0 * static_cast<double>(counts[1]) / steps;
  s.pct_fallback = 100.0 * static_cast<double>(counts[2]) / steps;
  s.pct_any_fallback = 100.0 * static_cast<double>(with_fallback) / static_cast<double>(s.traces);
  return s;
}

RoutingSummary routing_stats(std::span<const GenerationResult> results) {
  std::vector<const GenerationResult*> ptrs;
  ptrs.reserve(results.size());
  for (const auto& r : results) ptrs.push_back(&r);
  return routing_stats(std::span<const GenerationResult* const>(ptrs));
}

double seconds_per_token(std::span<const GenerationResult> results) {
  double seconds = 0.0;
  std::size_t steps = 0;
  for (const auto& r : results) {
    for (const auto& rec : r.trace) seconds += rec.per_step_seconds;
    steps += r.trace.size();
  }
  check_arg(steps > 0, "no timed steps");
  return seconds / static_cast<double>(steps);
}

double latency_ratio(std::span<const GenerationResult> a, std::span<const GenerationResult> b) {
  check_arg(!a.empty() && !b.empty(), "latency_ratio needs two non-empty trace sets");
  const double denom = seconds_per_token(b);
  check_arg(denom > 0.0, "latency_ratio: zero denominator");
  return seconds_per_token(a) / denom;
}

bool SliceValidation::all_pass() const {
  return restated_containment_pct == 100.0 && helpful_containment_pct == 100.0 &&
         distractor_exclusion_pct == 100.0 && distractor_inclusion_pct == 100.0;
}

SliceValidation validate_slice(std::span<const QAItem> items) {
  SliceValidation v;
  std::size_t restated_ok = 0, helpful_ok = 0, excluded = 0, included = 0;
  const auto mentions_gold = [](const QAItem& item) {
    return std::any_of(item.golds.begin(), item.golds.end(),
                       [&](const std::string& g) { return contains_normalized(item.context, g); });
  };
  for (const auto& item : items) {
    switch (item.slice) {
      case SliceLabel::kRestated:
        ++v.restated;
        restated_ok += mentions_gold(item) ? 1 : 0;
        break;
      case SliceLabel::kHelpful:
        ++v.helpful;
        helpful_ok += mentions_gold(item) ? 1 : 0;
        break;
      case SliceLabel::kDistractor:
        ++v.distractor;
        excluded += mentions_gold(item) ? 0 : 1;
        included += contains_normalized(item.context, item.distractor) ? 1 : 0;
        break;
      case SliceLabel::kScenario:
        break;
    }
  }
  const auto pct = [](std::size_t ok, std::size_t n) {
    return n == 0 ? 100.0 : 100.0 * static_cast<double>(ok) / static_cast<double>(n);
  };
  v.restated_containment_pct = pct(restated_ok, v.restated);
  v.helpful_containment_pct = pct(helpful_ok, v.helpful);
  v.distractor_exclusion_pct = pct(excluded, v.distractor);
  v.distractor_inclusion_pct = pct(included, v.distractor);
  return v;
}

}  // namespace nwcad
