/*
 * Copyright 2026 The heis-tsp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "heis/analyze.hpp"
#include "pipeline.hpp"

using namespace heis;
using heis::testing::Pipeline;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double uni(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Point rnd(std::mt19937_64& rng, double s = 2.0) { return {uni(rng, -s, s), uni(rng, -s, s), uni(rng, -s, s)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1
Outcome metric_axioms() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  long tri = 0, sym = 0, left = 0, dil = 0, rot = 0, zero = 0;
  for (double eta : {0.1, 1.0, 16.0}) {
    const MetricCtx ctx(eta);
    for (int i = 0; i < 10000; ++i) {
      const Point a = rnd(rng), b = rnd(rng), c = rnd(rng), g = rnd(rng);
      const double ab = distance(ctx, a, b), bc = distance(ctx, b, c), ac = distance(ctx, a, c);
      if (ac > (ab + bc) * (1 + 1e-12)) ++tri;
      if (std::fabs(ab - distance(ctx, b, a)) > 1e-12 * ab) ++sym;
      if (std::fabs(distance(ctx, multiply(g, a), multiply(g, b)) - ab) > 1e-12 * ab) ++left;
      const double lam = uni(rng, 0.01, 10.0);
      if (std::fabs(distance(ctx, dilate(a, lam), dilate(b, lam)) - lam * ab) > 1e-12 * lam * ab)
        ++dil;
      const double th = uni(rng, -std::numbers::pi, std::numbers::pi);
      if (std::fabs(distance(ctx, rotate_z(a, th), rotate_z(b, th)) - ab) > 1e-12 * ab) ++rot;
      if (distance(ctx, a, a) != 0.0 || !(ab > 0)) ++zero;
    }
  }
  const double t = seconds_since(t0);
  const bool ok = tri + sym + left + dil + rot + zero == 0 && t < 5.0;
  return {ok, fmt("3x10^4 triples; triangle %ld, symmetry %ld, left-invariance %ld, dilation %ld, "
                  "rotation %ld, identity %ld failures; %.2f s",
                  tri, sym, left, dil, rot, zero, t)};
}

// 2
Outcome prop4() {
  const auto t0 = std::chrono::steady_clock::now();
  long viol = 0, n = 0;
  double worst = 1e300;
  for (double eps : {0.02, 0.05, 0.1}) {
    const auto r = verify_prop4(CurvatureConfig::with_default_eta(eps, 100000, 17));
    viol += r.violations;
    n += r.samples;
    worst = std::min(worst, r.min_slack);
  }
  const double t = seconds_since(t0);
  return {viol == 0 && n == 300000 && t < 60.0,
          fmt("%ld configurations, %ld violations, min relative slack %.3g; %.1f s", n, viol,
              worst, t)};
}

// 3
Outcome helper_lemmas() {
  const auto a = verify_concave_power(10000, 23);
  long viol = a.violations;
  double worst = a.min_slack;
  long trials = a.trials;
  for (double eta : {1.0, 16.0}) {
    const auto b = verify_power_curvature(MetricCtx(eta), 10000, 29);
    viol += b.violations;
    trials += b.trials;
    worst = std::min(worst, b.min_slack);
  }
  return {viol == 0 && worst >= -1e-12,
          fmt("%ld trials, %ld violations, min slack %.3g", trials, viol, worst)};
}

// Closed curves of the generator corpus, scaled to diameter of order one.
struct Instance {
  std::string name;
  std::unique_ptr<Pipeline> p;
  Prefiltration pre;
  Filtration f;
};

std::vector<Instance>& corpus_filtrations() {
  static std::vector<Instance> all;
  if (!all.empty()) return all;
  const MetricCtx ctx(1.0);
  std::vector<std::pair<std::string, Curve>> curves;
  curves.emplace_back("oscillating q=1", gen_oscillating(1.0, 0.4, 3, 1.0).curve);
  curves.emplace_back("oscillating q=0.6", gen_oscillating(0.6, 0.5, 3, 1.0).curve);
  curves.emplace_back("square", gen_lifted_square(0.5));
  curves.emplace_back("walk", gen_random_walk(16, 1.0 / 16, 3));
  for (auto& [name, c] : curves) {
    Instance in;
    in.name = name;
    in.p = std::make_unique<Pipeline>(ctx, close_by_retrace(densify(c, 2e-3)),
                                      std::vector<int>{10, 20}, 10.0, 10);
    in.pre = prefiltration_from_cubes(ctx, *in.p->idx, in.p->ff.forests[in.p->family_with(10)]);
    in.f = complete_filtration(ctx, in.p->c, in.pre, std::ldexp(1.0, -10));
    all.push_back(std::move(in));
  }
  return all;
}

// 4
Outcome lemma8() {
  const MetricCtx ctx(1.0);
  size_t arcs = 0, bad = 0;
  double worst = 1e300;
  for (auto& in : corpus_filtrations()) {
    const auto& f = in.f;
    for (int lv = f.m; lv <= f.n_max(); ++lv)
      for (const auto& a : f.level(lv)) {
        if (!(a.diam > 0)) continue;
        const auto r = check_lemma8(ctx, in.p->c, carc_measure(ctx, in.p->c, a.dom));
        worst = std::min(worst, r.slack / r.diam);
        if (r.slack < -1e-10 * r.diam || !r.end_ok) ++bad;
        ++arcs;
      }
  }
  return {bad == 0 && arcs >= 500,
          fmt("%zu arcs over %zu filtrations, %zu failures, min slack/diam %.3g", arcs,
              corpus_filtrations().size(), bad, worst)};
}

// 5
Outcome filtration() {
  const MetricCtx ctx(1.0);
  size_t instances = 0, failures = 0, arcs = 0, tele = 0, tele_bad = 0;
  double chord = 0.0;
  std::string first;
  auto note = [&](bool ok, const std::string& what) {
    if (!ok && first.empty()) first = what;
    failures += !ok;
  };
  for (auto& in : corpus_filtrations()) {
    const auto pa = audit_prefiltration(ctx, in.p->c, in.pre);
    const auto fa = audit_filtration(ctx, in.p->c, in.pre, in.f);
    note(pa.ok(), in.name + ": " + pa.first_failure);
    note(fa.ok(), in.name + ": " + fa.first_failure);
    chord = std::max(chord, fa.worst_chord_ratio);
    arcs += fa.arcs;
    for (size_t i = 0; i < in.f.level(in.f.m).size(); ++i) {
      const auto tr = telescope(ctx, in.p->c, in.f, in.f.m, i);
      tele_bad += !tr.ok;
      ++tele;
    }
    ++instances;
  }
  // Three levels J apart; level n0 + 2J would need samples near 2^-32, so start coarser.
  {
    Pipeline p(ctx, heis::testing::closed_oscillating(3, 2e-3), {4, 14, 24}, 10.0, 10);
    const auto pre = prefiltration_from_cubes(ctx, *p.idx, p.ff.forests[p.family_with(4)]);
    const auto f = complete_filtration(ctx, p.c, pre, std::ldexp(1.0, -10));
    const auto pa = audit_prefiltration(ctx, p.c, pre);
    const auto fa = audit_filtration(ctx, p.c, pre, f);
    note(pa.ok() && pre.levels.size() == 3, "three levels: " + pa.first_failure);
    note(fa.ok(), "three levels: " + fa.first_failure);
    chord = std::max(chord, fa.worst_chord_ratio);
    arcs += fa.arcs;
    for (size_t i = 0; i < f.level(f.m).size(); ++i) {
      tele_bad += !telescope(ctx, p.c, f, f.m, i).ok;
      ++tele;
    }
    ++instances;
  }
  // The library entry point, with its own telescoping and arc-to-segment sweep.
  ParamSet ps;
  ps.stages = 3;
  const int n0 = first_G_level(ps.A);
  const auto run = filtration_audit(ps, {n0, n0 + ps.J});
  note(run.ok(), "library audit");
  tele += run.telescoped;
  tele_bad += run.telescope_failures;
  ++instances;
  return {failures == 0 && tele_bad == 0 && tele > 0,
          fmt("%zu instances, %zu arcs, %zu property failures%s%s; chord sum/length <= %.6f; "
              "%zu telescoped arcs, %zu failures",
              instances, arcs + run.filt.arcs, failures, first.empty() ? "" : " first: ",
              first.c_str(), chord, tele, tele_bad)};
}

// 6
Outcome cubes() {
  size_t total[2] = {0, 0}, viol = 0;
  double worst = 0.0;
  const int Js[2] = {10, 100};
  for (double eta : {1.0, 16.0}) {
    const MetricCtx ctx(eta);
    for (uint64_t seed : {1u, 2u}) {
      const auto K = densify(gen_random_walk(60, 0.02, seed), 0.002).p;
      const auto balls = multiresolution(build_nets(ctx, K, 0, 16), K, 10.0);
      for (int j = 0; j < 2; ++j) {
        const int J = Js[j];
        const auto sp = split_families(ctx, balls, J, 3.0, 1.0);
        for (const auto& fam : sp.families) {
          std::vector<Ball> fb;
          for (size_t i : fam) fb.push_back(balls[i]);
          const auto a = audit_cubes(ctx, build_cubes(ctx, fb, J, 3.0), 100, seed);
          viol += a.prop1_violations + a.prop2_violations + a.prop3_violations;
          if (a.worst_prop1_ratio > 1 + std::ldexp(1.0, -J + 2) + 1e-9) ++viol;
          worst = std::max(worst, a.worst_prop1_ratio);
          total[j] += a.cubes;
        }
      }
    }
  }
  return {viol == 0 && total[0] >= 200 && total[1] >= 200,
          fmt("%zu cubes at J=10, %zu at J=100, %zu violations, max d(center,Q)/r %.6f",
              total[0], total[1], viol, worst)};
}

// 7
Outcome beta_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const MetricCtx ctx(1.0);
  std::mt19937_64 rng(71);
  int bad = 0, n = 0;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    std::vector<Planar> poly;
    Planar mid{0, 0};
    switch (k % 3) {
      case 0: {  // corner
        const double phi = uni(rng, 0.3, 2.8);
        poly = {{-1, 0}, {0, 0}, {std::cos(phi), std::sin(phi)}};
        break;
      }
      case 1: {  // tent
        const double h = uni(rng, 0.05, 0.6);
        poly = {{-1, 0}, {0, h}, {1, 0}};
        mid = {0, h};
        break;
      }
      default: {  // two strands joined by a short turn
        const double w = uni(rng, 0.02, 0.3);
        poly = {{-1, 0}, {1, 0}, {1, w}, {-1, w}};
        mid = {0, w / 2};
      }
    }
    const Curve c = lift_planar(poly);
    // Center halfway between the lifted points above mid that are closest to it in the plane,
    // so both strands of the last family pass through the ball.
    Point lo{0, 0, 1e300}, hi{0, 0, -1e300};
    double best = 1e300;
    for (const auto& p : densify(c, 1e-3).p)
      best = std::min(best, std::hypot(p.x - mid[0], p.y - mid[1]));
    for (const auto& p : densify(c, 1e-3).p)
      if (std::hypot(p.x - mid[0], p.y - mid[1]) <= best + 1e-9) {
        if (p.z < lo.z) lo = p;
        if (p.z > hi.z) hi = p;
      }
    const Point center{(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2};
    const double r = 0.5;
    auto K = curve_points_in_ball(ctx, c, Ball{center, r, 0, 0}, r / 16);
    // A random left translation, rotation and dilation of the whole instance.
    const Point g = rnd(rng, 1.0);
    const double th = uni(rng, -3, 3), lam = uni(rng, 0.5, 2.0);
    auto move = [&](const Point& p) { return multiply(g, dilate(rotate_z(p, th), lam)); };
    for (auto& p : K) p = move(p);
    const Ball B{move(center), r * lam, 0, 0};
    const double fast = beta_ball(ctx, K, B).beta;
    const double grid = beta_ball_grid(ctx, K, B, 50).beta;
    const double rel = std::fabs(fast - grid) / grid;
    worst = std::max(worst, rel);
    bad += !(rel <= 0.02);
    ++n;
  }
  const double t = seconds_since(t0);
  return {bad == 0 && t < 120.0,
          fmt("%d instances, %d outside 2%%, worst relative gap %.4f; %.1f s", n, bad, worst, t)};
}

// 8
Outcome dichotomy_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  ParamSet ps;
  ps.A = 3;
  const auto rows = dichotomy(ps, {2, 4, 6, 8});
  const double t = seconds_since(t0);
  bool increasing = true, bounded = true;
  for (size_t i = 0; i < rows.size(); ++i) {
    bounded &= rows[i].length <= rows[i].length_bound * (1 + 1e-12);
    if (i) increasing &= rows[i].sum_p2 > rows[i - 1].sum_p2;
  }
  const double r2 = rows[3].sum_p2 / rows[1].sum_p2, r4 = rows[3].sum_p4 / rows[1].sum_p4;
  std::string d = "sum_p2";
  for (const auto& r : rows) d += fmt(" %.4f", r.sum_p2);
  d += "; sum_p4";
  for (const auto& r : rows) d += fmt(" %.5f", r.sum_p4);
  d += fmt("; stage8/stage4: p2 %.3f (need > 1.5), p4 %.3f (need <= 1.25); length %s; %.0f s",
           r2, r4, bounded ? "bounded" : "UNBOUNDED", t);
  return {increasing && r2 > 1.5 && r4 <= 1.25 && bounded && t < 600.0, d};
}

// 9
Outcome main_bound_stability() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = main_bound(ParamSet{});
  bool ok = true;
  std::string d;
  for (const auto& r : rows) {
    ok &= r.rel_change() <= 0.10;
    if (r.curve == "segment") ok &= r.ratio_lo == 0.0 && r.ratio_hi == 0.0;
    d += fmt("%s %.3g->%.3g (%.1f%%); ", r.curve.c_str(), r.ratio_lo, r.ratio_hi,
             100 * r.rel_change());
  }
  return {ok, d + fmt("%.0f s", seconds_since(t0))};
}

// 10
Outcome martingale() {
  const MetricCtx ctx(1.0);
  size_t trees = 0, bad = 0;
  double worst = 0.0;  // max density / bound
  for (int M : {1, 3, 5}) {
    auto check = [&](const MartingaleTree& t, uint64_t seed) {
      const auto rep = verify_martingale(t, 5000, seed);
      bad += !(rep.ok() && rep.prop_i == 0 && rep.prop_iii == 0 && rep.conservation == 0 &&
               rep.max_density <= rep.density_bound && rep.sum_diam <= rep.sum_bound);
      worst = std::max(worst, rep.max_density / rep.density_bound);
      ++trees;
    };
    for (uint64_t s = 1; s <= 3; ++s) check(random_martingale_tree(6, M, 0.01, 1.0, s), s);
    // Cubes of a curve, with level gaps of J_M - 10 so the forest has depth.
    const int gap = std::max(1, martingale_J(M, 0.01) - 10);
    std::vector<int> levels;
    for (int lv = 8; lv <= 8 + 3 * gap && lv <= 20; lv += gap) levels.push_back(lv);
    Pipeline p(ctx, heis::testing::closed_oscillating(3, 2e-3), levels, 2.0, gap);
    for (const auto& forest : p.ff.forests)
      check(martingale_from_cubes(ctx, p.c, *p.idx, forest, M, 0.01), 7);
  }
  return {bad == 0, fmt("%zu trees, %zu failures, max density/bound %.3g", trees, bad, worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"metric axioms and isometries", metric_axioms},
      {"curvature inequality Monte-Carlo", prop4},
      {"helper lemmas", helper_lemmas},
      {"segment-to-arc bound on filtration arcs", lemma8},
      {"filtration audit", filtration},
      {"cube audit", cubes},
      {"beta optimizer vs grid oracle", beta_oracle},
      {"dichotomy trend", dichotomy_trend},
      {"main-bound stability", main_bound_stability},
      {"martingale", martingale}};
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%-4s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
