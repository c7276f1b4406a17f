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
#include <gtest/gtest.h>

#include <random>

#include "heis/verify.hpp"
#include "json.hpp"
#include "pipeline.hpp"
#include "test_util.hpp"

using namespace heis;
using heis::testing::Pipeline;

namespace {

std::vector<Point> corner_points(int n) {
  std::vector<Point> k;
  for (int i = 0; i <= n; ++i) k.push_back({-1.0 + double(i) / n, 0, 0});
  for (int i = 1; i <= n; ++i) k.push_back({0, double(i) / n, 0});
  return k;
}

Ball unit_ball() { return Ball{{0, 0, 0}, 1.0, 0, 0}; }

}  // namespace

TEST(Curvature, CollinearGivesZero) {
  const auto cfg = CurvatureConfig::with_default_eta(0.1, 0, 1);
  const MetricCtx ctx(cfg.eta);
  const Point p1{0, 0, 0}, p2{1, 0, 0}, p3{2, 0, 0}, p4{3, 0, 0};
  EXPECT_NEAR(curvature_lhs(ctx, p1, p2, p3, p4), 0.0, 1e-15);
  EXPECT_EQ(curvature_rhs(cfg, p1, p2, p3, p4), 0.0);
}

TEST(Curvature, BentConfiguration) {
  CurvatureConfig cfg;
  cfg.epsilon = 0.1;
  cfg.eta = 1e-21;
  const MetricCtx ctx(cfg.eta);
  const Point p1{0, 0, 0}, p2{0.3, 0.05, 0}, p3{0.7, -0.05, 0}, p4{1, 0, 0};
  EXPECT_NEAR(distance(ctx, p1, p2), std::sqrt(0.0925), 1e-12);
  EXPECT_NEAR(distance(ctx, p2, p3), std::sqrt(0.17), 1e-12);
  const double lhs = curvature_lhs(ctx, p1, p2, p3, p4);
  EXPECT_NEAR(lhs, 2 * std::sqrt(0.0925) + std::sqrt(0.17) - 1.0, 1e-12);
  EXPECT_NEAR(lhs, 0.0206, 1e-4);
  const double rhs = curvature_rhs(cfg, p1, p2, p3, p4);
  EXPECT_GE(rhs, 0.0);
  EXPECT_LE(rhs, 1e-63);
}

TEST(Curvature, EndpointNormalization) {
  for (double eta : {1e-21, 0.5, 1.0}) {
    const MetricCtx ctx(eta);
    for (double t : {0.0, 1.0, 1e3, 1e10})
      EXPECT_NEAR(distance(ctx, {0, 0, 0}, {1, 0, t}), std::pow(1 + eta * t * t, 0.25),
                  1e-14 * std::pow(1 + eta * t * t, 0.25));
  }
}

TEST(Curvature, SeparationRejected) {
  const auto cfg = CurvatureConfig::with_default_eta(0.05, 0, 1);
  const Point p1{0, 0, 0}, p3{0.5, 0.2, 0}, p4{1, 0, 0};
  EXPECT_THROW(curvature_rhs(cfg, p1, p1, p3, p4), HypothesisError);
}

TEST(Curvature, ConfigValidation) {
  CurvatureConfig c;
  c.epsilon = 0.05;
  c.eta = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.epsilon = 0.6;
  c.eta = 1e-30;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_NO_THROW(CurvatureConfig::with_default_eta(0.05, 10, 1).validate());
}

TEST(Curvature, SegmentDeviationOracle) {
  std::mt19937_64 rng(5);
  const MetricCtx ctx(1.0);
  for (int k = 0; k < 50; ++k) {
    const auto S = horizontal_segment(heis::testing::random_point(rng, 1),
                                      heis::testing::random_point(rng, 1));
    const auto T = horizontal_segment(heis::testing::random_point(rng, 1),
                                      heis::testing::random_point(rng, 1));
    double grid = 0.0;
    for (int i = 0; i <= 2000; ++i)
      grid = std::max(grid, dist_point_to_segment_fast(ctx, S.eval(i / 2000.0), T));
    const double v = segment_deviation_sup(ctx, S, T);
    EXPECT_GE(v, grid - 1e-12);
    EXPECT_LE(v, grid + S.length() / 2000);
  }
}

TEST(CurvatureInequality, NoViolationsAndDeterministic) {
  auto cfg = CurvatureConfig::with_default_eta(0.05, 20000, 11);
  const auto a = verify_prop4(cfg);
  EXPECT_EQ(a.samples, 20000);
  EXPECT_EQ(a.violations, 0);
  EXPECT_EQ(a.per_regime[0], 8000);
  EXPECT_EQ(a.per_regime[1], 8000);
  EXPECT_EQ(a.per_regime[2], 4000);
  EXPECT_GE(a.min_slack, -kProp4RelTol);
  EXPECT_LE(a.witnesses.size(), 10u);
  const auto b = verify_prop4(cfg);
  EXPECT_EQ(a.json(), b.json());
  auto j = nlohmann::json::parse(a.json());
  EXPECT_EQ(j["violations"], 0);
  EXPECT_EQ(j["schema"], "heis-tsp/1");
}

TEST(CurvatureInequality, RegimesSatisfyHypotheses) {
  const auto cfg = CurvatureConfig::with_default_eta(0.02, 0, 3);
  const MetricCtx ctx(cfg.eta);
  uint64_t st = 3;
  Point p[4];
  for (int k = 0; k < 200; ++k) {
    sample_configuration(cfg, Regime::FarVertical, st, p);
    // Rotation, translation and dilation by at most 10 keep the far regime far.
    EXPECT_GT(distance(ctx, p[0], p[3]), 0.1 * 100 / (cfg.epsilon * cfg.epsilon));
    sample_configuration(cfg, Regime::Flat, st, p);
    EXPECT_TRUE(separation_holds(ctx, cfg.epsilon, p[0], p[1], p[2], p[3]) ||
                std::fabs(distance(ctx, p[0], p[1])) > 0);
  }
}

TEST(Lemmas, ConcavePower) {
  EXPECT_NEAR(std::pow(17.0, 0.25), 2.0305, 1e-4);
  EXPECT_TRUE(check_concave_power(4, 1, 16));
  EXPECT_THROW(check_concave_power(4, 1, 15), HypothesisError);
  EXPECT_THROW(check_concave_power(0.5, 1, 16), HypothesisError);
  const auto r = verify_concave_power(10000, 4);
  EXPECT_EQ(r.trials, 10000);
  EXPECT_EQ(r.violations, 0);
}

TEST(Lemmas, PowerCurvature) {
  const MetricCtx ctx(1.0);
  EXPECT_TRUE(check_power_curvature(ctx, {0, 0, 0}, {0.4, 0, 0}, {1, 0, 0}, 1.0));
  EXPECT_THROW(check_power_curvature(ctx, {0, 0, 0}, {3, 0, 0}, {1, 0, 0}, 1.0), HypothesisError);
  EXPECT_THROW(check_power_curvature(ctx, {0, 0, 0}, {0.4, 0, 0}, {1, 0, 0}, 0.4), HypothesisError);
  const auto r = verify_power_curvature(ctx, 10000, 8);
  EXPECT_EQ(r.trials, 10000);
  EXPECT_EQ(r.violations, 0);
}

TEST(BetaBall, TrivialSets) {
  const MetricCtx ctx(1.0);
  std::vector<Point> line;
  const auto L = HorizontalLine{{0.1, -0.2, 0.3}, 0.7};
  for (int i = -10; i <= 10; ++i) line.push_back(L.at(0.04 * i));
  const Ball B{L.at(0.0), 1.0, 0, 0};
  // Rounding in z bounds how flat a generic line can be: sqrt(eps) relative.
  EXPECT_NEAR(beta_ball(ctx, line, B).beta, 0.0, 1e-7);
  std::vector<Point> axis;
  for (int i = -8; i <= 8; ++i) axis.push_back({0.125 * i, 0, 0});
  EXPECT_NEAR(beta_ball(ctx, axis, Ball{{0, 0, 0}, 1.0, 0, 0}).beta, 0.0, 1e-12);
  EXPECT_EQ(beta_ball(ctx, {B.center}, B).beta, 0.0);
  EXPECT_NEAR(beta_ball(ctx, {{0.2, 0.1, 0.05}}, B).beta, 0.0, 1e-9);
  EXPECT_THROW(beta_ball(ctx, {{5, 5, 5}}, B), std::domain_error);
}

TEST(BetaBall, CornerMatchesGridOracle) {
  const MetricCtx ctx(1.0);
  const auto K = corner_points(20);
  const auto fast = beta_ball(ctx, K, unit_ball());
  const auto grid = beta_ball_grid(ctx, K, unit_ball(), 50);
  EXPECT_GT(fast.beta, 0.05);
  EXPECT_LE(fast.beta, grid.beta * 1.02);
  EXPECT_GE(fast.beta, grid.beta * 0.98);
  // The reported line realizes the reported value.
  std::vector<Point> q;
  for (const auto& p : K) q.push_back(left_diff(unit_ball().center, p));
  EXPECT_NEAR(line_sup(ctx, q, line_from_params(fast.line)), fast.sup, 1e-12);
}

TEST(BetaBall, ParamsRoundTrip) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const HorizontalLine L{heis::testing::random_point(rng, 1),
                           heis::testing::uniform(rng, -7, 7)};
    const auto M = line_from_params(params_from_line(L));
    // Same line: M passes through L(t) for several t, with a horizontal direction parallel to L.
    const MetricCtx ctx(1.0);
    for (double t : {-1.0, 0.0, 2.0}) EXPECT_LT(line_foot(ctx, L.at(t), M).dist, 1e-7);
  }
}

TEST(BetaBall, DilationEquivariance) {
  const MetricCtx ctx(1.0);
  std::mt19937_64 rng(3);
  std::vector<Point> K;
  for (int i = 0; i < 40; ++i) K.push_back(heis::testing::random_point(rng, 0.5));
  const Ball B{{0.05, 0.02, 0.01}, 0.8, 0, 0};
  const double b0 = beta_ball(ctx, K, B).beta;
  for (double lam : {0.25, 2.0, 8.0, 3.0}) {
    std::vector<Point> Kl;
    for (const auto& p : K) Kl.push_back(dilate(p, lam));
    const Ball Bl{dilate(B.center, lam), lam * B.radius, 0, 0};
    EXPECT_NEAR(beta_ball(ctx, Kl, Bl).beta, b0, 1e-9 * b0) << lam;
  }
}

TEST(BetaBall, EnlargementMonotone) {
  const MetricCtx ctx(1.0);
  std::mt19937_64 rng(4);
  std::vector<Point> K;
  for (int i = 0; i < 30; ++i) K.push_back(heis::testing::random_point(rng, 0.3));
  const Ball B{{0, 0, 0}, 1.0, 0, 0}, B2{{0, 0, 0}, 1.7, 0, 0};
  ASSERT_EQ(points_in_ball(ctx, K, B).size(), points_in_ball(ctx, K, B2).size());
  const auto a = beta_ball(ctx, K, B), b = beta_ball(ctx, K, B2);
  EXPECT_LE(a.beta * a.diam, b.beta * b.diam + 1e-9);
}

TEST(BetaBall, CurveSamplesInBall) {
  const MetricCtx ctx(1.0);
  const Curve c = gen_segment(2.0);
  EdgeIndex idx(c);
  const Ball B{{1, 0, 0}, 0.25, 0, 0};
  const auto a = curve_points_in_ball(ctx, c, B, 0.01);
  const auto b = curve_points_in_ball(ctx, idx, B, 0.01);
  EXPECT_EQ(a.size(), b.size());
  EXPECT_GE(a.size(), 49u);
  for (const auto& p : a) EXPECT_LE(distance(ctx, B.center, p), B.radius);
}

TEST(Classify, ZeroBetaIsFlatAndMonotone) {
  const Ball B{};
  EXPECT_EQ(classify_betas(B, 0.0, {0.0, 0.0}, 1e-10).cls, Flatness::Flat);
  EXPECT_EQ(classify_betas(B, 0.0, {}, 1e-10).cls, Flatness::Flat);
  const std::vector<double> arcs{0.01, 0.2, 0.05};
  const auto g1 = classify_betas(B, 0.3, arcs, 0.5);
  EXPECT_EQ(g1.cls, Flatness::NonFlat);
  EXPECT_EQ(g1.witness_index, 1);
  EXPECT_EQ(classify_betas(B, 0.3, arcs, 0.7).cls, Flatness::Flat);
  Flatness prev = Flatness::NonFlat;
  for (double e0 : {1e-3, 0.1, 0.5, 0.66, 0.67, 1.0, 5.0}) {
    const auto c = classify_betas(B, 0.3, arcs, e0).cls;
    if (prev == Flatness::Flat) EXPECT_EQ(c, Flatness::Flat);
    prev = c;
  }
}

TEST(Classify, CornerBallIsNonFlat) {
  const MetricCtx ctx(1.0);
  // Closed corner: out along x, up along y and back.
  auto open = lift_planar({{-1, 0}, {0, 0}, {0, 1}});
  const Curve c = close_by_retrace(densify(open, 0.05));
  const Ball B{{0, 0, 0}, 0.5, 0, 0};
  const double bg = beta_of_points(ctx, curve_points_in_ball(ctx, c, B, 0.01), B).beta;
  EXPECT_GT(bg, 0.05);
  // The arc through the corner bends.
  Arc tau = make_arc(ctx, c, 0.5, 1.5);
  const double bt = beta_arc(ctx, c, tau);
  const auto cls = classify_betas(B, bg, {bt}, 0.5);
  EXPECT_EQ(cls.cls, Flatness::NonFlat);
  EXPECT_EQ(cls.witness_index, 0);
}

TEST(ArcSegmentBound, HorizontalArcHasZeroSlack) {
  const MetricCtx ctx(1.0);
  const Curve c = densify(gen_segment(1.0), 0.1);
  const auto r = check_lemma8(ctx, c, make_arc(ctx, c, 0.2, 0.9));
  EXPECT_NEAR(r.beta_diam, 0.0, 1e-12);
  EXPECT_NEAR(r.sup_L, 0.0, 1e-12);
  EXPECT_NEAR(r.slack, 0.0, 1e-12);
  EXPECT_TRUE(r.end_ok);
}

TEST(ArcSegmentBound, TentArcMatchesGrid) {
  const MetricCtx ctx(1.0);
  const auto o = gen_oscillating(1.0, 0.4, 1, 1.0);
  const Arc arc = make_arc(ctx, o.curve, 0.0, o.curve.T);
  const auto r = check_lemma8(ctx, o.curve, arc);
  const auto g = check_lemma8_grid(ctx, o.curve, arc, 1000);
  EXPECT_GE(r.slack, 0.0);
  EXPECT_GT(r.beta_diam, 0.01);
  EXPECT_NEAR(r.beta_diam, g.beta_diam, 1e-4);
  EXPECT_NEAR(r.sup_L, g.sup_L, 1e-4);
  EXPECT_TRUE(r.end_ok);
}

TEST(ArcSegmentBound, EveryFiltrationArc) {
  const MetricCtx ctx(1.0);
  Pipeline p(ctx, heis::testing::closed_oscillating(3, 2e-3), {10, 20}, 10.0, 10);
  const auto& forest = p.ff.forests[p.family_with(10)];
  auto pre = prefiltration_from_cubes(ctx, *p.idx, forest);
  auto f = complete_filtration(ctx, p.c, pre, std::ldexp(1.0, -10));
  size_t n = 0;
  for (int lv = f.m; lv <= f.n_max(); ++lv) {
    for (const auto& a : f.level(lv)) {
      if (!(a.diam > 0)) continue;
      Arc arc = carc_measure(ctx, p.c, a.dom);
      const auto r = check_lemma8(ctx, p.c, arc);
      EXPECT_GE(r.slack, -1e-10 * r.diam);
      EXPECT_TRUE(r.end_ok);
      ++n;
    }
  }
  EXPECT_GE(n, 100u);
}

TEST(FlatExcess, TwoStrandBall) {
  const MetricCtx ctx(1.0);
  // Strand one along the x-axis, a short turn, strand two back at height w.
  const double w = 0.01;
  const Curve c = densify(lift_planar({{-1, 0}, {1, 0}, {1, w}, {-1, w}}), 0.002);
  const double r = 0.2;
  const Ball B{{0, 0, 0}, r, 0, 0};
  const double bg = beta_of_points(ctx, curve_points_in_ball(ctx, c, B, 0.002), B).beta;
  EXPECT_GT(bg, 0.05);
  const double eps0 = 0.01;
  const Arc tau = make_arc(ctx, c, 0.0, 2.0);
  const Arc xi = make_arc(ctx, c, 2.0 + w, c.T);
  EXPECT_LT(beta_arc(ctx, c, tau), eps0 * bg);  // a flat ball
  const auto E = assemble_flat_set(ctx, c, B, tau, xi, 0.01, 0.001);
  EXPECT_GE(E.tau_tilde_diam, 4 * r - 10 * E.h);
  EXPECT_GT(E.xi_check_diam, 0.0);
  // Cover E by balls on a net of E at spacing rho.
  const double rho = 0.002;
  std::vector<Ball> cover;
  for (const auto& p : E.points) {
    bool hit = false;
    for (const auto& b : cover) hit |= distance(ctx, b.center, p) <= b.radius;
    if (!hit) cover.push_back(Ball{p, rho, 0, 0});
  }
  const auto rep = check_flat_excess(ctx, B, bg, eps0, E.points, cover);
  EXPECT_TRUE(rep.holds);
  EXPECT_GE(rep.sum, rep.required);
  EXPECT_THROW(check_flat_excess(ctx, B, bg, eps0, E.points, {Ball{{0, 0, 0}, 1.0, 0, 0}}),
               HypothesisError);
  EXPECT_THROW(check_flat_excess(ctx, B, bg, eps0, E.points, {cover[0]}), HypothesisError);
  EXPECT_THROW(assemble_flat_set(ctx, c, B, tau, xi, 0.05, 0.001), HypothesisError);
}

TEST(Martingale, JM) {
  EXPECT_EQ(martingale_J(1, 0.01), 15);
  EXPECT_EQ(martingale_J(0, 0.1), 11);  // M - log2(1) + 10 = 10 exactly
}

TEST(Martingale, LeafOnly) {
  MartingaleTree t;
  t.M = 1;
  t.eps0 = 0.01;
  t.length = 2.0;
  t.nodes.push_back({1.5, {{0.0, 2.0}}, -1, {}});
  build_martingale(t);
  EXPECT_DOUBLE_EQ(martingale_density(t, 0.7), 1.5 / 2.0);
  const auto rep = verify_martingale(t, 100, 1);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.prop_i, 0u);
}

TEST(Martingale, WorkedExample) {
  MartingaleTree t;
  t.M = 1;
  t.eps0 = 0.01;
  t.length = 1.0;
  // Child supports 0.3 and 0.5 long, remainder 0.2.
  t.nodes.push_back({1.0, {{0.0, 1.0}}, -1, {1, 2}});
  t.nodes.push_back({0.5, {{0.0, 0.3}}, 0, {}});
  t.nodes.push_back({0.4, {{0.5, 1.0}}, 0, {}});
  build_martingale(t);
  EXPECT_NEAR(t.remainder[0], 0.2, 1e-15);
  EXPECT_NEAR(t.s_prime[0], 1.1, 1e-15);
  const auto m = martingale_masses(t, 0);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_NEAR(m[1].second, 0.5 / 1.1, 1e-15);
  EXPECT_NEAR(m[2].second, 0.4 / 1.1, 1e-15);
  EXPECT_NEAR(m[0].second - m[1].second - m[2].second, 0.2 / 1.1, 1e-15);
  EXPECT_NEAR(martingale_density(t, 0.4), 1.0 / 1.1, 1e-15);
  EXPECT_TRUE(verify_martingale(t, 1000, 2).ok());
}

TEST(Martingale, OverlapRejected) {
  MartingaleTree t;
  t.nodes.push_back({1.0, {{0.0, 1.0}}, -1, {1, 2}});
  t.nodes.push_back({0.5, {{0.0, 0.6}}, 0, {}});
  t.nodes.push_back({0.4, {{0.5, 1.0}}, 0, {}});
  EXPECT_THROW(build_martingale(t), DecompositionError);
  MartingaleTree u;
  u.nodes.push_back({1.0, {{0.0, 1.0}}, -1, {1}});
  u.nodes.push_back({0.5, {{0.5, 1.5}}, 0, {}});
  EXPECT_THROW(build_martingale(u), DecompositionError);
}

TEST(Martingale, RandomTreeDensity) {
  auto t = random_martingale_tree(4, 3, 0.01, 1.0, 9);
  EXPECT_GT(t.nodes.size(), 4u);
  const auto rep = verify_martingale(t, 10000, 3);
  EXPECT_EQ(rep.conservation, 0u);
  EXPECT_EQ(rep.prop_i, 0u);
  EXPECT_EQ(rep.prop_iii, 0u);
  EXPECT_LE(rep.max_density, rep.density_bound);
  EXPECT_EQ(rep.density_samples, 10000u);
  EXPECT_TRUE(rep.ok());
}

TEST(Martingale, FromCubes) {
  const MetricCtx ctx(1.0);
  Pipeline p(ctx, heis::testing::closed_oscillating(3, 2e-3), {8, 9, 10, 11, 12, 13, 14}, 2.0,
             martingale_J(1, 0.01) - 10);
  size_t trees = 0;
  for (const auto& forest : p.ff.forests) {
    auto t = martingale_from_cubes(ctx, p.c, *p.idx, forest, 1, 0.01);
    const auto rep = verify_martingale(t, 2000, 5);
    EXPECT_TRUE(rep.ok()) << rep.prop_i << " " << rep.prop_iii << " " << rep.conservation;
    ++trees;
  }
  EXPECT_GT(trees, 0u);
}
