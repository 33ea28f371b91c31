// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "nwcad/slices.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <unordered_set>

#include "json_util.hpp"
#include "nwcad/distributions.hpp"
#include "nwcad/divergence.hpp"

namespace nwcad {

std::string_view to_string(SliceLabel label) {
  switch (label) {
    case SliceLabel::kRestated:
      return "restated";
    case SliceLabel::kDistractor:
      return "distractor";
    case SliceLabel::kHelpful:
      return "helpful";
    case SliceLabel::kScenario:
      return "scenario";
  }
  return "?";
}

SliceLabel slice_label_from_string(std::string_view name) {
  if (name == "restated") return SliceLabel::kRestated;
  if (name == "distractor") return SliceLabel::kDistractor;
  if (name == "helpful") return SliceLabel::kHelpful;
  if (name == "scenario") return SliceLabel::kScenario;
  fail(ErrorKind::kData, "unknown slice label '" + std::string(name) + "'");
}

bool is_neutral_slice(SliceLabel label) {
  return label == SliceLabel::kRestated || label == SliceLabel::kDistractor;
}

const Vocabulary& Slice::vocabulary() const {
  if (world) return world->vocab;
  if (scenario_vocab) return *scenario_vocab;
  fail(ErrorKind::kInvalidArgument, "slice has no vocabulary");
}

void SliceGenConfig::validate() const {
  check_arg(restated + distractor + helpful > 0, "slice config requests no items");
  check_arg(flip_fraction >= 0.0 && flip_fraction <= 1.0, "flip_fraction must be in [0,1]");
  check_arg(weak_helpful_fraction >= 0.0 && weak_helpful_fraction <= 1.0,
            "weak_helpful_fraction must be in [0,1]");
  check_arg(flip_divergence_cap > 0.0 && flip_divergence_cap < 1.0,
            "flip_divergence_cap must be in (0,1)");
  check_arg(context_strength > 0.0 && std::isfinite(context_strength),
            "context_strength must be positive");
  // Distractor construction needs adjacent years plus spare tokens for noise
  // sentences that avoid both the gold and the distractor answer.
  check_arg(year_pool >= 8 && year_pool <= 1000, "year_pool must be in [8, 1000]");
  check_arg(city_pool >= 6, "city_pool must be >= 6");
  check_arg(name_pool >= 6, "name_pool must be >= 6");
}

namespace {

using detail::field;
using detail::Json;

constexpr std::array kCities = {
    "paris",     "london",    "berlin",   "madrid",    "rome",       "vienna",  "prague",
    "oslo",      "lisbon",    "dublin",   "athens",    "warsaw",     "budapest", "helsinki",
    "stockholm", "brussels",  "amsterdam", "geneva",   "zurich",     "munich",  "milan",
    "naples",    "seville",   "porto",    "krakow",    "riga",       "tallinn", "vilnius",
    "sofia",     "bucharest", "belgrade", "zagreb",    "ljubljana",  "bratislava", "copenhagen",
    "edinburgh", "cardiff",   "lyon",     "marseille", "hamburg"};
constexpr std::array kFirstNames = {
    "michael", "richard", "samuel",  "arlen",   "woody",   "james",   "robert",  "john",
    "david",   "william", "thomas",  "charles", "daniel",  "matthew", "anthony", "mark",
    "paul",    "steven",  "andrew",  "joshua",  "kenneth", "kevin",   "brian",   "george",
    "edward",  "ronald",  "timothy", "jason",   "jeffrey", "ryan"};
constexpr std::array kLastNames = {
    "gambon",   "harris", "elliott",  "ness",     "harrelson", "smith",  "johnson", "brown",
    "jones",    "miller", "davis",    "wilson",   "moore",     "taylor", "anderson", "jackson",
    "white",    "martin", "thompson", "garcia",   "clark",     "lewis",  "walker",  "hall",
    "allen",    "young",  "king",     "wright",   "scott",     "green"};

enum class AnswerType { kYear, kCity, kName };

const std::array<std::vector<std::string>, 3> kQuestionPrefix = {
    std::vector<std::string>{"what", "year", "marks", "the", "founding", "of"},
    std::vector<std::string>{"which", "city", "hosted", "the", "first", "summit", "of"},
    std::vector<std::string>{"who", "played", "the", "lead", "role", "in"}};

// Generator-local RNG with platform-independent derived draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 eng_;
};

using Answer = std::vector<std::string>;

struct Pools {
  std::vector<std::string> years, cities, firsts, lasts;

  explicit Pools(const SliceGenConfig& c) {
    for (std::size_t i = 0; i < c.year_pool; ++i) years.push_back(std::to_string(1900 + i));
    for (std::size_t i = 0; i < std::min(c.city_pool, kCities.size()); ++i) cities.push_back(kCities[i]);
    const std::size_t names = std::min({c.name_pool, kFirstNames.size(), kLastNames.size()});
    for (std::size_t i = 0; i < names; ++i) {
      firsts.push_back(kFirstNames[i]);
      lasts.push_back(kLastNames[i]);
    }
  }

  Answer random(AnswerType type, Rng& rng) const {
    switch (type) {
      case AnswerType::kYear:
        return {years[rng.index(years.size())]};
      case AnswerType::kCity:
        return {cities[rng.index(cities.size())]};
      case AnswerType::kName:
        return {firsts[rng.index(firsts.size())], lasts[rng.index(lasts.size())]};
    }
    return {};
  }

  // Type-matched wrong answer whose first token differs from gold's. Years
  // use an adjacent year.
  Answer confusable(AnswerType type, const Answer& gold, Rng& rng) const {
    if (type == AnswerType::kYear) {
      const int g = std::stoi(gold[0]);
      const int lo = std::stoi(years.front());
      const int hi = std::stoi(years.back());
      for (;;) {
        const int offset = static_cast<int>(rng.index(3)) + 1;
        const int cand = rng.uniform() < 0.5 ? g - offset : g + offset;
        if (cand >= lo && cand <= hi) return {std::to_string(cand)};
      }
    }
    for (;;) {
      Answer cand = random(type, rng);
      if (cand[0] != gold[0]) {
        if (type == AnswerType::kName && cand[1] == gold[1]) continue;
        return cand;
      }
    }
  }
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// Pronounceable pseudo-words for entity names.
std::string entity_name(Rng& rng) {
  static constexpr std::string_view kOnsets = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  static constexpr std::array<std::string_view, 4> kCodas = {"x", "n", "r", "k"};
  std::string s;
  for (int i = 0; i < 3; ++i) {
    s += kOnsets[rng.index(kOnsets.size())];
    s += kVowels[rng.index(kVowels.size())];
  }
  s += kCodas[rng.index(kCodas.size())];
  return s;
}

// Draft of one item before the vocabulary is frozen.
struct Draft {
  SliceLabel slice;
  AnswerType type;
  std::string entity;
  Answer gold;
  Answer runner_up;   // the prior's second choice at step 0
  Answer belief;      // what the prior decodes (gold unless helpful)
  Answer pushed;      // what the context asserts
  double gap = 0.0;   // prior logit gap top vs runner-up at step 0
  double top = 0.0;   // prior logit of the top step-0 candidate
  double delta = 0.0; // context evidence added at step 0 (= lambda * strength)
  std::vector<Answer> noise;
  std::vector<std::string> noise_entities;
};

constexpr double kChainLogit = 12.0;
constexpr double kTypeEosLogit = 11.0;
constexpr double kUnigramEos = 1.5;
constexpr double kSpecialLogit = -4.0;

// Step-0 prior row on a vocabulary-free index: `background` holds every other
// token's unigram logit.
double step0_divergence(const std::vector<double>& background, double top, double runner,
                        double runner_boost, double top_boost) {
  std::vector<double> z0 = background;
  z0.push_back(top);
  z0.push_back(runner);
  std::vector<double> zc = z0;
  zc[zc.size() - 2] += top_boost;
  zc[zc.size() - 1] += runner_boost;
  return js_full(softmax(LogitVector(zc)), softmax(LogitVector(z0))).value;
}

// Smallest boost in [lo, hi] reaching `target` divergence, by bisection.
// `divergence` is non-decreasing in the boost on this range.
double solve_boost(const std::function<double(double)>& divergence, double target, double lo,
                   double hi) {
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (divergence(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Slice build_slice(const SliceGenConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const Pools pools(config);
  const std::size_t total = config.restated + config.distractor + config.helpful;

  std::set<std::string> reserved;
  for (const auto& p : kQuestionPrefix) reserved.insert(p.begin(), p.end());
  for (const auto* pool : {&pools.years, &pools.cities, &pools.firsts, &pools.lasts}) {
    reserved.insert(pool->begin(), pool->end());
  }
  std::vector<std::string> entities;
  std::unordered_set<std::string> used;
  const std::size_t extra_entities = std::max<std::size_t>(8, total / 4);
  for (std::size_t guard = 0; entities.size() < total + extra_entities; ++guard) {
    check_arg(guard < 100 * (total + extra_entities), "cannot draw enough distinct entity names");
    std::string e = entity_name(rng);
    if (reserved.count(e) == 0 && used.insert(e).second) entities.push_back(e);
  }
  // Entities past `total` only appear in noise sentences.
  const std::vector<std::string> noise_entities(entities.begin() + static_cast<std::ptrdiff_t>(total),
                                                entities.end());

  // Unigram background, indexed later by vocabulary id. Drawn per pool word
  // below; this sample stands in for it while solving step-0 boosts.
  std::vector<double> background_sample;
  const std::size_t approx_vocab = reserved.size() + entities.size() + 4;
  for (std::size_t i = 0; i < approx_vocab; ++i) background_sample.push_back(rng.uniform(-0.5, 0.5));
  background_sample.push_back(kUnigramEos);

  std::vector<SliceLabel> labels;
  labels.insert(labels.end(), config.restated, SliceLabel::kRestated);
  labels.insert(labels.end(), config.distractor, SliceLabel::kDistractor);
  labels.insert(labels.end(), config.helpful, SliceLabel::kHelpful);

  const std::size_t flips = static_cast<std::size_t>(
      std::llround(config.flip_fraction * static_cast<double>(config.distractor)));
  const std::size_t weak = static_cast<std::size_t>(
      std::llround(config.weak_helpful_fraction * static_cast<double>(config.helpful)));
  std::size_t distractor_seen = 0;
  std::size_t helpful_seen = 0;

  std::vector<Draft> drafts;
  drafts.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    Draft d;
    d.slice = labels[i];
    d.type = static_cast<AnswerType>(rng.index(3));
    d.entity = entities[i];
    d.gold = pools.random(d.type, rng);
    d.top = kChainLogit + rng.uniform();

    if (d.slice == SliceLabel::kRestated) {
      d.runner_up = pools.confusable(d.type, d.gold, rng);
      d.belief = d.gold;
      d.pushed = d.gold;
      d.gap = rng.uniform(2.6, 5.0);
      d.delta = rng.uniform(1.0, 8.0);
    } else if (d.slice == SliceLabel::kDistractor) {
      d.runner_up = pools.confusable(d.type, d.gold, rng);
      d.belief = d.gold;
      d.pushed = d.runner_up;
      const bool flip = distractor_seen++ < flips;
      if (flip) {
        // Enough evidence to overturn the prior's choice in the context
        // stream, while the two streams stay within the divergence cap.
        bool found = false;
        for (int attempt = 0; attempt < 64 && !found; ++attempt) {
          d.gap = rng.uniform(2.6, 3.4);
          const auto div = [&](double boost) {
            return step0_divergence(background_sample, d.top, d.top - d.gap, boost, 0.0);
          };
          const double lo = d.gap + 0.05;
          if (div(lo) >= config.flip_divergence_cap) continue;
          const double hi = solve_boost(div, config.flip_divergence_cap, lo, config.context_strength);
          if (hi - lo < 0.05) continue;
          d.delta = rng.uniform(lo, hi - 0.02);
          found = true;
        }
        check_arg(found, "cannot construct a flipping distractor under the divergence cap");
      } else {
        d.gap = rng.uniform(2.6, 5.0);
        d.delta = rng.uniform(0.5, d.gap - 0.4);
      }
    } else {
      d.belief = pools.confusable(d.type, d.gold, rng);
      d.runner_up = d.gold;
      d.pushed = d.gold;
      d.gap = rng.uniform(1.5, 4.0);
      const bool is_weak = helpful_seen++ < weak;
      if (is_weak) {
        const double target = rng.uniform(0.35, 0.55);
        const auto div = [&](double boost) {
          return step0_divergence(background_sample, d.top, d.top - d.gap, boost, 0.0);
        };
        check_arg(div(config.context_strength) > target,
                  "context_strength too small for weak helpful items");
        d.delta = solve_boost(div, target, 0.0, config.context_strength);
      } else {
        d.delta = rng.uniform(d.gap + 3.0, std::min(config.context_strength, d.gap + 8.0));
      }
    }
    check_arg(d.delta <= config.context_strength, "context evidence exceeds context_strength");

    std::set<std::string> banned(d.gold.begin(), d.gold.end());
    banned.insert(d.pushed.begin(), d.pushed.end());
    for (std::size_t s = 0; s < config.noise_sentences; ++s) {
      Answer a;
      do {
        a = pools.random(static_cast<AnswerType>(rng.index(3)), rng);
      } while (std::any_of(a.begin(), a.end(), [&](const auto& w) { return banned.count(w) > 0; }));
      d.noise.push_back(a);
      d.noise_entities.push_back(noise_entities[rng.index(noise_entities.size())]);
    }
    drafts.push_back(std::move(d));
  }

  // Vocabulary: specials, question words, answer pools, entities.
  std::vector<std::string> words = {"</s>", "<unk>", "."};
  for (const auto& w : reserved) words.push_back(w);
  for (const auto& e : entities) words.push_back(e);
  auto world = std::make_shared<ToyWorld>();
  world->vocab = Vocabulary(words, TokenId(0), TokenId(1));
  world->period = TokenId(2);
  world->context_strength = config.context_strength;
  const Vocabulary& vocab = world->vocab;
  const auto id = [&](const std::string& w) { return *vocab.find(w); };
  const TokenId eos = vocab.eos();

  world->unigram.resize(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) world->unigram[i] = rng.uniform(-0.5, 0.5);
  world->unigram[eos.index()] = kUnigramEos;
  world->unigram[1] = kSpecialLogit;
  world->unigram[2] = kSpecialLogit;

  // Type-level knowledge: single-token answers end; first names continue
  // with some last name.
  for (const auto* pool : {&pools.years, &pools.cities, &pools.lasts}) {
    for (const auto& w : *pool) world->order1[id(w)] = SparseRow{{{eos, kTypeEosLogit}}};
  }
  for (const auto& f : pools.firsts) {
    SparseRow row;
    for (const auto& l : pools.lasts) row.entries.emplace_back(id(l), 5.0 + rng.uniform(-0.5, 0.5));
    world->order1[id(f)] = std::move(row);
  }

  Slice slice;
  slice.items.reserve(total);
  std::array<std::size_t, 3> counters{};
  for (const Draft& d : drafts) {
    const TokenId e = id(d.entity);
    const Answer& top_answer = d.belief;
    world->order1[e] = SparseRow{{{id(top_answer[0]), d.top}, {id(d.runner_up[0]), d.top - d.gap}}};
    if (top_answer.size() == 2) {
      world->order2[{e, id(top_answer[0])}] = SparseRow{{{id(top_answer[1]), kChainLogit + rng.uniform()}}};
      world->order2[{id(top_answer[0]), id(top_answer[1])}] = SparseRow{{{eos, kChainLogit}}};
    } else {
      world->order2[{e, id(top_answer[0])}] = SparseRow{{{eos, kChainLogit}}};
    }

    std::vector<std::vector<std::string>> sentences;
    std::vector<std::string> main = {d.entity};
    main.insert(main.end(), d.pushed.begin(), d.pushed.end());
    sentences.push_back(main);
    for (std::size_t s = 0; s < d.noise.size(); ++s) {
      std::vector<std::string> n = {d.noise_entities[s]};
      n.insert(n.end(), d.noise[s].begin(), d.noise[s].end());
      sentences.push_back(n);
    }
    rng.shuffle(sentences);
    std::string context;
    for (const auto& s : sentences) {
      if (!context.empty()) context += ' ';
      context += join(s) + " .";
    }

    QAItem item;
    const std::size_t slot = static_cast<std::size_t>(d.slice);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "-%04zu", counters[slot]++);
    item.id = std::string(to_string(d.slice)) + buf;
    item.slice = d.slice;
    auto q = kQuestionPrefix[static_cast<std::size_t>(d.type)];
    q.push_back(d.entity);
    item.question = join(q);
    item.context = context;
    item.golds = {join(d.gold)};
    if (d.slice == SliceLabel::kDistractor) item.distractor = join(d.pushed);
    item.blend_lambda = d.delta / config.context_strength;
    slice.items.push_back(std::move(item));
  }
  world->validate();
  slice.world = std::move(world);
  return slice;
}

std::string items_to_jsonl(const std::vector<QAItem>& items) {
  std::string out;
  for (const auto& item : items) {
    check_arg(!item.script, "scripted items are stored in scenario files");
    const Json j = {{"id", item.id},
                    {"slice", to_string(item.slice)},
                    {"question", item.question},
                    {"context", item.context},
                    {"golds", item.golds},
                    {"distractor", item.distractor},
                    {"blend_lambda", item.blend_lambda}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<QAItem> items_from_jsonl(const std::string& text, const std::string& where) {
  std::vector<QAItem> items;
  std::size_t start = 0;
  std::size_t line = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line;
    if (end > start) {
      const std::string at = where + ":" + std::to_string(line);
      const Json j = detail::parse_json(text.substr(start, end - start), at);
      QAItem item;
      item.id = field<std::string>(j, "id", at);
      item.slice = slice_label_from_string(field<std::string>(j, "slice", at));
      item.question = field<std::string>(j, "question", at);
      item.context = field<std::string>(j, "context", at);
      item.golds = field<std::vector<std::string>>(j, "golds", at);
      item.distractor = j.contains("distractor") ? field<std::string>(j, "distractor", at) : "";
      item.blend_lambda = field<double>(j, "blend_lambda", at);
      check_data(!item.golds.empty(), at + ": item needs at least one gold answer");
      check_data(item.blend_lambda >= 0.0 && item.blend_lambda <= 1.0,
                 at + ": blend_lambda must be in [0,1]");
      items.push_back(std::move(item));
    }
    start = end + 1;
  }
  return items;
}

void save_slice(const Slice& slice, const std::string& dir) {
  check_arg(slice.world != nullptr, "only toy slices can be saved as a directory");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create '" + dir + "': " + ec.message());
  slice.world->save(dir + "/world.json");
  detail::write_file(dir + "/items.jsonl", items_to_jsonl(slice.items));
}

Slice load_slice(const std::string& path) {
  namespace fs = std::filesystem;
  Slice slice;
  if (fs::is_directory(path)) {
    slice.world = std::make_shared<ToyWorld>(ToyWorld::load(path + "/world.json"));
    const std::string items_path = path + "/items.jsonl";
    slice.items = items_from_jsonl(detail::read_file(items_path), items_path);
    std::set<std::string> ids;
    for (const auto& item : slice.items) {
      check_data(ids.insert(item.id).second, items_path + ": duplicate item id '" + item.id + "'");
    }
    return slice;
  }
  ScenarioSet set = load_scenarios(path);
  slice.scenario_vocab = set.vocab;
  for (auto& script : set.scripts) {
    QAItem item;
    item.id = script.id;
    item.slice = SliceLabel::kScenario;
    item.golds = {set.vocab.decode(script.expected_gold)};
    item.script = std::move(script);
    slice.items.push_back(std::move(item));
  }
  return slice;
}

}  // namespace nwcad
