// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "nwcad/divergence.hpp"
#include "nwcad/gate.hpp"

namespace nwcad::testing {

std::vector<double> random_logits(Rng& rng, std::size_t n, double sd) {
  std::vector<double> z(n);
  for (auto& v : z) v = rng.normal(0.0, sd);
  return z;
}

ProbVector peaked(Rng& rng, const std::vector<std::size_t>& head, std::size_t vocab, double tail) {
  std::vector<double> p(vocab, 0.0);
  double head_sum = 0.0;
  std::vector<double> w(head.size());
  for (auto& x : w) {
    x = std::exp(rng.normal(0.0, 1.5));
    head_sum += x;
  }
  for (std::size_t i = 0; i < head.size(); ++i) p[head[i]] = (1.0 - tail) * w[i] / head_sum;
  std::vector<double> t(vocab, 0.0);
  double tail_sum = 0.0;
  for (std::size_t i = 0; i < vocab; ++i) {
    if (p[i] == 0.0) {
      t[i] = rng.uniform(0.0, 1.0);
      tail_sum += t[i];
    }
  }
  for (std::size_t i = 0; i < vocab; ++i) {
    if (t[i] > 0.0) p[i] = tail * t[i] / tail_sum;
  }
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= s;
  return ProbVector::from_values(std::move(p));
}

std::pair<ProbVector, ProbVector> peaked_pair(Rng& rng, std::size_t vocab, double max_tail) {
  std::vector<std::size_t> ids(vocab);
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  std::vector<std::size_t> head_p(ids.begin(), ids.begin() + 10);
  // q keeps a random number of p's head tokens and replaces the rest.
  const std::size_t shared = rng.index(11);
  std::vector<std::size_t> head_q(head_p.begin(), head_p.begin() + static_cast<long>(shared));
  for (std::size_t i = 10; head_q.size() < 10; ++i) head_q.push_back(ids[i]);
  return {peaked(rng, head_p, vocab, rng.uniform(0.0, max_tail)),
          peaked(rng, head_q, vocab, rng.uniform(0.0, max_tail))};
}

ScenarioScript stage1_scenario(Rng& rng, std::size_t vocab, std::size_t steps,
                               const std::string& id) {
  ScenarioScript s;
  s.id = id;
  for (std::size_t t = 0; t < steps; ++t) {
    for (;;) {
      auto z0 = random_logits(rng, vocab, 1.5);
      z0[rng.index(vocab)] += rng.uniform(3.0, 8.0);
      auto zc = z0;
      const double sd = rng.uniform(0.0, 0.6);
      for (auto& v : zc) v += rng.normal(0.0, sd);
      LogitVector lc(zc), l0(z0);
      const auto sig = StepSignals::compute(lc, l0, 50);
      if (sig.margin_nc >= 0.35 && sig.divergence.value <= 0.25) {
        s.steps.push_back({std::move(lc), std::move(l0), StepLabel::kNeutral});
        break;
      }
    }
  }
  return s;
}

ScenarioScript random_scenario(Rng& rng, std::size_t vocab, std::size_t steps,
                               const std::string& id) {
  ScenarioScript s;
  s.id = id;
  for (std::size_t t = 0; t < steps; ++t) {
    auto z0 = random_logits(rng, vocab, rng.uniform(0.5, 4.0));
    auto zc = rng.chance(0.5) ? random_logits(rng, vocab, rng.uniform(0.5, 4.0)) : z0;
    if (zc == z0) {
      for (auto& v : zc) v += rng.normal(0.0, rng.uniform(0.0, 2.0));
    }
    s.steps.push_back({LogitVector(zc), LogitVector(z0), StepLabel::kConflict});
  }
  return s;
}

std::vector<long double> softmax_ld(const std::vector<double>& z) {
  long double mx = -INFINITY;
  for (double v : z) mx = std::max<long double>(mx, v);
  std::vector<long double> p(z.size());
  long double sum = 0.0L;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::isinf(z[i]) ? 0.0L : std::exp(static_cast<long double>(z[i]) - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

long double js_ld(const std::vector<long double>& p, const std::vector<long double>& q) {
  long double kl_p = 0.0L, kl_q = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const long double m = 0.5L * (p[i] + q[i]);
    if (p[i] > 0.0L) kl_p += p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0L) kl_q += q[i] * std::log2(q[i] / m);
  }
  return 0.5L * kl_p + 0.5L * kl_q;
}

std::vector<long double> cad_ld(const std::vector<double>& z_c, const std::vector<double>& z_0,
                                double alpha) {
  std::vector<long double> out(z_c.size());
  const long double a = alpha;
  for (std::size_t i = 0; i < z_c.size(); ++i) {
    out[i] = (1.0L + a) * static_cast<long double>(z_c[i]) - a * static_cast<long double>(z_0[i]);
  }
  return out;
}

std::string scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("nwcad-" + tag + "-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace nwcad::testing
