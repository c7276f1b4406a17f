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

#include <cmath>
#include <cstdio>
#include <numbers>

#include "heis/curves.hpp"
#include "test_util.hpp"

using namespace heis;

namespace {

double planar_length(const std::vector<Planar>& pts) {
  double s = 0;
  for (size_t k = 0; k + 1 < pts.size(); ++k)
    s += std::hypot(pts[k + 1][0] - pts[k][0], pts[k + 1][1] - pts[k][1]);
  return s;
}

// Dense oracle: sup over a fine parameter grid of the grid-minimized distance to L_tau.
double beta_grid_oracle(const MetricCtx& ctx, const Curve& c, const Arc& arc, int nt, int ns) {
  const auto L = L_tau(c, arc);
  double sup = 0;
  for (int i = 0; i <= nt; ++i) {
    const Point g = c.eval(arc.a + (arc.b - arc.a) * i / nt);
    double best = 1e300;
    for (int j = 0; j <= ns; ++j) best = std::min(best, distance(ctx, g, L.eval(double(j) / ns)));
    sup = std::max(sup, best);
  }
  return sup / arc.diam;
}

}  // namespace

TEST(CurveLength, Examples) {
  MetricCtx ctx(1.0);
  EXPECT_NEAR(curve_length(ctx, close_by_retrace(gen_segment(1.0))), 2.0, 1e-15);
  EXPECT_NEAR(curve_length(ctx, gen_lifted_square(1.0)), 4.0, 1e-15);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Planar> pts{{0, 0}};
    for (int i = 0; i < 50; ++i)
      pts.push_back({pts.back()[0] + heis::testing::uniform(rng, -1, 1),
                     pts.back()[1] + heis::testing::uniform(rng, -1, 1)});
    EXPECT_NEAR(curve_length(ctx, lift_planar(pts)), planar_length(pts), 1e-9);
  }
}

TEST(Lift, Examples) {
  Curve a = lift_planar({{0, 0}, {1, 0}});
  EXPECT_EQ(a.p[1], (Point{1, 0, 0}));
  Curve sq = gen_lifted_square(1.0);
  EXPECT_NEAR(sq.p.back().x, 0.0, 1e-15);
  EXPECT_NEAR(sq.p.back().y, 0.0, 1e-15);
  // Signed area oracle: z gains the enclosed area, 1 for the unit square.
  double area = 0;
  const std::vector<Planar> loop{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}};
  for (size_t k = 0; k + 1 < loop.size(); ++k)
    area += 0.5 * (loop[k][0] * loop[k + 1][1] - loop[k + 1][0] * loop[k][1]);
  EXPECT_NEAR(sq.p.back().z, area, 1e-15);
  EXPECT_NEAR(sq.p.back().z, 1.0, 1e-15);
  Curve back = lift_planar({{0.5, 0.25}, {1.75, -0.5}, {0.5, 0.25}});
  EXPECT_EQ(back.p.back(), back.p.front());
}

TEST(Lift, ProjectionIsInput) {
  std::mt19937_64 rng(12);
  std::vector<Planar> pts{{0.5, -0.25}};
  for (int i = 0; i < 100; ++i)
    pts.push_back({pts.back()[0] + heis::testing::uniform(rng, -1, 1),
                   pts.back()[1] + heis::testing::uniform(rng, -1, 1)});
  Curve c = lift_planar(pts);
  for (size_t k = 0; k < pts.size(); ++k) {
    EXPECT_NEAR(c.p[k].x, pts[k][0], 1e-12);
    EXPECT_NEAR(c.p[k].y, pts[k][1], 1e-12);
  }
}

TEST(ArcDiameter, Examples) {
  MetricCtx ctx(1.0);
  Curve seg = gen_segment(1.0);
  EXPECT_EQ(arc_diameter(ctx, seg, 0.4, 0.4), 0.0);
  EXPECT_NEAR(arc_diameter(ctx, seg, 0.0, 1.0), 1.0, 1e-15);
  Curve osc = densify(gen_oscillating(0.6, 0.5, 2, 1.0).curve, 0.01);
  Curve fine = densify(osc, 0.001);
  const double a = 0.1, b = 0.8;
  const double d1 = arc_diameter(ctx, osc, a, b), d2 = arc_diameter(ctx, fine, a, b);
  EXPECT_NEAR(d1, d2, 0.01 * d2);
}

TEST(ArcDiameter, PrunedMatchesBrute) {
  MetricCtx ctx(1.0);
  Curve w = densify(gen_random_walk(40, 0.3, 5), 0.005);
  const ArcChain ch = arc_chain(w, 0.0, w.T);
  ASSERT_GT(ch.q.size(), 1000u);
  double brute = 0;
  for (size_t i = 0; i < ch.q.size(); ++i)
    for (size_t j = i + 1; j < ch.q.size(); ++j)
      brute = std::max(brute, distance(ctx, ch.q[i], ch.q[j]));
  EXPECT_NEAR(chain_diameter(ctx, ch), brute, 1e-12 * brute);
}

TEST(ArcChain, MatchesAbsoluteEvaluation) {
  MetricCtx ctx(1.0);
  Curve c = close_by_retrace(densify(gen_oscillating(0.6, 0.5, 3, 1.0).curve, 0.02));
  for (double a : {0.0, 0.137, 0.9, c.T - 0.3}) {
    const double b = a + 0.55;
    const ArcChain ch = arc_chain(c, a, b);
    const Point ga = c.eval(a);
    for (size_t i = 0; i < ch.q.size(); ++i) {
      const Point abs = multiply(ga, ch.q[i]);
      const Point ref = c.eval(ch.u[i]);
      EXPECT_LT(distance(ctx, abs, ref), 1e-6);
    }
  }
}

TEST(LTau, Examples) {
  MetricCtx ctx(1.0);
  Curve seg = gen_segment(2.0);
  Arc arc = make_arc(ctx, seg, 0.5, 1.5);
  auto L = L_tau(seg, arc);
  EXPECT_EQ(L.end(), seg.eval(1.5));
  Curve jump = Curve::from_samples({0.0, 3.0}, {{0, 0, 0}, {1, 0, 5}}, 3.0, false);
  validate_curve(ctx, jump);
  Arc whole{0.0, 3.0, arc_diameter(ctx, jump, 0.0, 3.0)};
  auto L2 = L_tau(jump, whole);
  EXPECT_EQ(L2.start, (Point{0, 0, 0}));
  EXPECT_EQ(L2.end(), (Point{1, 0, 0}));
  EXPECT_EQ(L2.eval(0.25), (Point{0.25, 0, 0}));
}

TEST(BetaArc, Examples) {
  MetricCtx ctx(1.0);
  Curve seg = densify(gen_segment(1.0), 0.1);
  EXPECT_NEAR(beta_arc(ctx, seg, make_arc(ctx, seg, 0.1, 0.9)), 0.0, 1e-7);
  EXPECT_THROW(beta_arc(ctx, seg, make_arc(ctx, seg, 0.3, 0.3)), std::domain_error);

  Curve tent = densify(gen_oscillating(1.0, 0.2, 1, 1.0).curve, 0.01);
  Arc whole = make_arc(ctx, tent, 0.0, tent.T);
  const double b = beta_arc(ctx, tent, whole);
  EXPECT_GT(b, 0.1);
  EXPECT_NEAR(b, beta_grid_oracle(ctx, tent, whole, 2000, 2000), 1e-4);
}

TEST(BetaArc, BoundedByTwo) {
  MetricCtx ctx(1.0);
  std::mt19937_64 rng(13);
  Curve w = close_by_retrace(densify(gen_random_walk(30, 0.2, 9), 0.02));
  for (int i = 0; i < 300; ++i) {
    const double a = heis::testing::uniform(rng, 0, w.T), len = heis::testing::uniform(rng, 0.01, w.T);
    Arc arc = make_arc(ctx, w, a, a + len);
    if (arc.diam > 0) EXPECT_LE(beta_arc(ctx, w, arc), 2.0);
  }
}

TEST(BetaArc, DilationEquivariant) {
  MetricCtx ctx(1.0);
  Curve c = densify(gen_oscillating(0.6, 0.5, 3, 1.0).curve, 0.01);
  for (double lam : {0.01, 0.5, 7.0}) {
    Curve d = dilate_curve(c, lam);
    for (double a : {0.0, 0.2, 0.45}) {
      const double b0 = beta_arc(ctx, c, make_arc(ctx, c, a, a + 0.3));
      const double b1 = beta_arc(ctx, d, make_arc(ctx, d, lam * a, lam * (a + 0.3)));
      EXPECT_NEAR(b0, b1, 1e-6 * (1 + b0));
    }
  }
}

TEST(Oscillating, Examples) {
  MetricCtx ctx(1.0);
  auto s0 = gen_oscillating(0.6, 0.5, 0, 2.0);
  EXPECT_NEAR(curve_length(ctx, s0.curve), 2.0, 1e-15);
  auto s1 = gen_oscillating(0.6, 0.5, 1, 2.0);
  EXPECT_NEAR(curve_length(ctx, s1.curve), 2.0 / std::cos(0.5), 1e-12);
  auto s8 = gen_oscillating(0.6, 0.5, 8, 1.0);
  double prod = 1.0;
  for (int k = 1; k <= 8; ++k) prod /= std::cos(0.5 / std::pow(k, 0.6));
  EXPECT_NEAR(curve_length(ctx, s8.curve), prod, 1e-9);
  EXPECT_NEAR(s8.length_bound, prod, 1e-12);
  EXPECT_FALSE(s8.flagged);
  EXPECT_TRUE(gen_oscillating(0.5, 0.5, 2, 1.0).flagged);
  EXPECT_EQ(s8.curve.size(), (1u << 8) + 1);
}

TEST(Curves, LipschitzCertificate) {
  MetricCtx ctx(1.0);
  std::vector<Curve> cs{gen_segment(1), gen_lifted_circle(64), gen_lifted_square(),
                        gen_random_walk(50, 0.1, 3), gen_oscillating(0.6, 0.5, 6, 1).curve};
  for (const auto& c : cs) {
    EXPECT_LE(lipschitz_excess(ctx, c), 1e-9);
    EXPECT_LE(lipschitz_excess(ctx, densify(c, 0.003)), 1e-9);
    EXPECT_LE(lipschitz_excess(ctx, close_by_retrace(c)), 1e-9);
  }
}

TEST(Curves, MidpointGapTrend) {
  MetricCtx ctx(1.0);
  double prev = 1e300;
  for (double phi : {0.1, 0.01, 0.001}) {
    HorizontalLine L1{{}, 0.0}, L2{{}, phi};
    double mx = 0;
    for (int i = 0; i <= 1000; ++i)
      mx = std::max(mx, distance(ctx, L1.at(i / 1000.0), L2.at(i / 1000.0)));
    const auto e1 = project_pi(L1.at(1)), e2 = project_pi(L2.at(1));
    const double planar_gap = std::hypot(e1[0] - e2[0], e1[1] - e2[1]);
    EXPECT_GE(mx, 0.3 * std::sqrt(planar_gap));
    EXPECT_LT(mx, prev);
    prev = mx;
  }
}

TEST(CurveIO, RoundTripAndValidation) {
  MetricCtx ctx(1.0);
  Curve c = close_by_retrace(gen_lifted_square(1.0));
  const std::string path = ::testing::TempDir() + "sq.curve";
  write_curve(path, c);
  Curve r = read_curve(ctx, path);
  EXPECT_TRUE(r.closed);
  EXPECT_EQ(r.size(), c.size());
  EXPECT_NEAR(curve_length(ctx, r), 8.0, 1e-12);
  Curve open = gen_lifted_square(1.0);
  write_curve(path, open);
  EXPECT_FALSE(read_curve(ctx, path).closed);
  std::FILE* f = std::fopen(path.c_str(), "w");
  std::fprintf(f, "T=1\n0 0 0 0\n0.5 1 0 0\n");
  std::fclose(f);
  EXPECT_THROW(read_curve(ctx, path), std::runtime_error);
}
