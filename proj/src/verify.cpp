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
#include "heis/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include <quadmath.h>

#include "json.hpp"

namespace heis {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// splitmix64 stream; keeps reports identical across standard libraries.
struct Rng {
  uint64_t& s;
  uint64_t next() {
    uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uni() { return double(next() >> 11) * 0x1.0p-53; }
  double uni(double lo, double hi) { return lo + (hi - lo) * uni(); }
  double sign() { return (next() & 1) ? 1.0 : -1.0; }
};

double golden_max(const auto& f, double lo, double hi, double tol, double best) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  best = std::max({best, f1, f2});
  for (int it = 0; it < 200 && b - a > tol; ++it) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    }
    best = std::max({best, f1, f2});
  }
  return best;
}

// sup of f on [lo,hi] for f with Lipschitz constant lip: n+1 samples, then golden search in
// every cell whose Lipschitz bound still beats the running max.
double lipschitz_sup(const auto& f, double lo, double hi, double lip, int n, double tol) {
  if (!(hi > lo)) return f(lo);
  std::vector<double> v(size_t(n) + 1);
  const double step = (hi - lo) / n;
  double best = -kInf;
  for (int i = 0; i <= n; ++i) best = std::max(best, v[size_t(i)] = f(lo + i * step));
  for (int i = 0; i < n; ++i) {
    const double bound = 0.5 * (v[size_t(i)] + v[size_t(i) + 1]) + 0.5 * lip * step;
    if (bound > best) best = golden_max(f, lo + i * step, lo + (i + 1) * step, tol, best);
  }
  return best;
}

double pair_diam(const MetricCtx& ctx, const Point* p, int n) {
  double d = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) d = std::max(d, distance(ctx, p[i], p[j]));
  return d;
}

}  // namespace

// ---- curvature inequality ----

void CurvatureConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::invalid_argument("epsilon must lie in (0,1/2)");
  if (!(eta > 0.0 && eta < std::pow(epsilon / 10.0, 10.0)))
    throw std::invalid_argument("eta must lie in (0, (epsilon/10)^10)");
  if (samples < 0) throw std::invalid_argument("negative sample count");
}

CurvatureConfig CurvatureConfig::with_default_eta(double epsilon, long samples, uint64_t seed) {
  CurvatureConfig c;
  c.epsilon = epsilon;
  c.eta = 0.5 * std::pow(epsilon / 10.0, 10.0);
  c.samples = samples;
  c.seed = seed;
  return c;
}

double curvature_lhs(const MetricCtx& ctx, const Point& p1, const Point& p2, const Point& p3,
                     const Point& p4) {
  return distance(ctx, p1, p2) + distance(ctx, p2, p3) + distance(ctx, p3, p4) -
         distance(ctx, p1, p4);
}

bool separation_holds(const MetricCtx& ctx, double epsilon, const Point& p1, const Point& p2,
                      const Point& p3, const Point& p4) {
  const double bound = epsilon * distance(ctx, p1, p4);
  for (const Point* p : {&p2, &p3})
    if (std::min(distance(ctx, *p, p1), distance(ctx, *p, p4)) < bound) return false;
  return true;
}

double segment_deviation_sup(const MetricCtx& ctx, const HorizontalSegment& S,
                             const HorizontalSegment& target, double tol) {
  auto f = [&](double t) { return dist_point_to_segment_fast(ctx, S.eval(t), target); };
  if (S.degenerate()) return f(0.0);
  return lipschitz_sup(f, 0.0, 1.0, S.length(), 16, tol);
}

double curvature_rhs(const CurvatureConfig& cfg, const Point& p1, const Point& p2,
                     const Point& p3, const Point& p4) {
  const MetricCtx ctx(cfg.eta);
  if (!separation_holds(ctx, cfg.epsilon, p1, p2, p3, p4))
    throw HypothesisError("middle points closer than epsilon d(p1,p4) to an endpoint");
  const Point p[4] = {p1, p2, p3, p4};
  const double diam = pair_diam(ctx, p, 4);
  if (!(diam > 0.0)) return 0.0;
  const auto target = horizontal_segment(p1, p4);
  double dev = 0.0;
  for (int i = 0; i < 3; ++i)
    dev = std::max(dev, segment_deviation_sup(ctx, horizontal_segment(p[i], p[i + 1]), target));
  const double e2 = cfg.epsilon * cfg.epsilon;
  const double d2 = dev * dev;
  return e2 * e2 * cfg.eta * cfg.eta / (1e14 * diam * diam * diam) * d2 * d2;
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Flat: return "flat";
    case Regime::Vertical: return "vertical";
    case Regime::FarVertical: return "far-vertical";
  }
  return "?";
}

void sample_configuration(const CurvatureConfig& cfg, Regime r, uint64_t& state, Point out[4],
                          long* rejected) {
  const MetricCtx ctx(cfg.eta);
  Rng rng{state};
  for (;;) {
    // Normal form p1 = 0, p4 = (1,0,t), then a random rotation, dilation and translation.
    double t = 0.0, D = 1.0;
    if (r == Regime::Flat) {
      t = rng.sign() * std::pow(10.0, rng.uni(-4.0, 0.0));
    } else if (r == Regime::Vertical) {
      t = rng.sign() * std::pow(10.0, rng.uni(0.0, 4.0)) / std::sqrt(cfg.eta);
    } else {
      const double R = 100.0 / (cfg.epsilon * cfg.epsilon) * std::pow(10.0, rng.uni(0.0, 1.0));
      t = rng.sign() * std::sqrt((R * R * R * R - 1.0) / cfg.eta);
    }
    D = std::pow(1.0 + cfg.eta * t * t, 0.25);
    Point p[4] = {{0, 0, 0}, {}, {}, {1.0, 0.0, t}};
    for (int i = 1; i <= 2; ++i) {
      if (r == Regime::Flat) {
        p[i].x = rng.uni(-0.2, 1.2);
        p[i].y = rng.sign() * std::pow(10.0, rng.uni(-5.0, -0.5));
        p[i].z = rng.sign() * std::pow(10.0, rng.uni(-5.0, 0.0));
      } else {
        p[i].x = rng.uni(-1.0, 1.0) * D;
        p[i].y = rng.uni(-1.0, 1.0) * D;
        p[i].z = rng.uni(-0.5, 1.5) * t + rng.uni(-1.0, 1.0) * D * D;
      }
    }
    if (!separation_holds(ctx, cfg.epsilon, p[0], p[1], p[2], p[3])) {
      if (rejected) ++*rejected;
      continue;
    }
    const double th = rng.uni(0.0, 2.0 * std::numbers::pi);
    const double lam = std::pow(10.0, rng.uni(-1.0, 1.0));
    const Point g{rng.uni(-1.0, 1.0), rng.uni(-1.0, 1.0), rng.uni(-1.0, 1.0)};
    for (int i = 0; i < 4; ++i) out[i] = multiply(g, dilate(rotate_z(p[i], th), lam));
    return;
  }
}

Prop4Report verify_prop4(const CurvatureConfig& cfg) {
  cfg.validate();
  const MetricCtx ctx(cfg.eta);
  Prop4Report rep;
  rep.config = cfg;
  rep.min_slack = kInf;
  uint64_t state = cfg.seed;
  std::vector<std::pair<double, Prop4Witness>> tight;
  std::vector<Prop4Witness> bad;
  for (long k = 0; k < cfg.samples; ++k) {
    const long slot = k % 5;
    const Regime r = slot < 2 ? Regime::Flat : slot < 4 ? Regime::Vertical : Regime::FarVertical;
    Prop4Witness w;
    w.regime = r;
    // The transformed points can drift off the separation condition by rounding.
    for (;;) {
      sample_configuration(cfg, r, state, w.p, &rep.rejected);
      if (separation_holds(ctx, cfg.epsilon, w.p[0], w.p[1], w.p[2], w.p[3])) break;
      ++rep.rejected;
    }
    w.lhs = curvature_lhs(ctx, w.p[0], w.p[1], w.p[2], w.p[3]);
    w.rhs = curvature_rhs(cfg, w.p[0], w.p[1], w.p[2], w.p[3]);
    const double diam = pair_diam(ctx, w.p, 4);
    const double slack = (w.lhs - w.rhs) / diam;
    ++rep.samples;
    ++rep.per_regime[int(r)];
    rep.min_slack = std::min(rep.min_slack, slack);
    if (w.lhs > 0.0) rep.max_rhs_ratio = std::max(rep.max_rhs_ratio, w.rhs / w.lhs);
    if (slack < -kProp4RelTol) {
      ++rep.violations;
      if (bad.size() < 10) bad.push_back(w);
    }
    tight.emplace_back(slack, w);
    if (tight.size() > 64) {
      std::nth_element(tight.begin(), tight.begin() + 10, tight.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      tight.resize(10);
    }
  }
  std::sort(tight.begin(), tight.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  rep.witnesses = bad;
  for (const auto& [s, w] : tight) {
    if (rep.witnesses.size() >= 10) break;
    if (s >= -kProp4RelTol) rep.witnesses.push_back(w);
  }
  if (rep.samples == 0) rep.min_slack = 0.0;
  return rep;
}

std::string Prop4Report::json() const {
  using nlohmann::json;
  json j;
  j["schema"] = "heis-tsp/1";
  j["config"] = {{"epsilon", config.epsilon},
                 {"eta", config.eta},
                 {"samples", config.samples},
                 {"seed", config.seed}};
  j["samples"] = samples;
  j["rejected"] = rejected;
  j["violations"] = violations;
  j["min_slack"] = min_slack;
  j["max_rhs_ratio"] = max_rhs_ratio;
  j["per_regime"] = {{"flat", per_regime[0]},
                     {"vertical", per_regime[1]},
                     {"far-vertical", per_regime[2]}};
  json ws = json::array();
  for (const auto& w : witnesses) {
    json pts = json::array();
    for (const auto& p : w.p) pts.push_back({p.x, p.y, p.z});
    ws.push_back({{"regime", regime_name(w.regime)}, {"points", pts}, {"lhs", w.lhs}, {"rhs", w.rhs}});
  }
  j["witnesses"] = ws;
  return j.dump(2);
}

// ---- helper lemmas ----

bool check_concave_power(double p, double a, double b) {
  if (!(p >= 1.0) || !(a > 0.0) || !(b > 0.0)) throw HypothesisError("need p >= 1 and a, b > 0");
  if (b < std::pow(2.0, p) * a) throw HypothesisError("need b >= 2^p a");
  const double lhs = std::pow(a + b, 1.0 / p);
  const double rhs = std::pow(a, 1.0 / p) + 0.5 * std::pow(b, 1.0 / p);
  return lhs - rhs >= -kLemmaSlack * lhs;
}

namespace {

struct CurvatureTerms {
  double lhs = 0.0, rhs = 0.0, scale = 0.0;
};

CurvatureTerms power_curvature_terms(const MetricCtx& ctx, const Point& a, const Point& b,
                                     const Point& c, double alpha) {
  const double ab = distance(ctx, a, b), bc = distance(ctx, b, c), ac = distance(ctx, a, c);
  if (!(alpha >= 0.5)) throw HypothesisError("need alpha >= 1/2");
  if (!(ac > 0.0)) throw HypothesisError("need d(a,c) > 0");
  if (std::max(ab, bc) > alpha * ac) throw HypothesisError("need max{d(a,b),d(b,c)} <= alpha d(a,c)");
  const double s = ab + bc;
  CurvatureTerms t;
  t.lhs = s - ac;
  t.rhs = (s * s * s * s - ac * ac * ac * ac) / (100.0 * alpha * alpha * alpha * ac * ac * ac);
  t.scale = ac;
  return t;
}

}  // namespace

bool check_power_curvature(const MetricCtx& ctx, const Point& a, const Point& b, const Point& c,
                           double alpha) {
  const auto t = power_curvature_terms(ctx, a, b, c, alpha);
  return t.lhs - t.rhs >= -kLemmaSlack * t.scale;
}

LemmaReport verify_concave_power(long trials, uint64_t seed) {
  LemmaReport rep;
  rep.min_slack = kInf;
  Rng rng{seed};
  for (long k = 0; k < trials; ++k) {
    const double p = rng.uni(1.0, 8.0);
    const double a = std::pow(10.0, rng.uni(-6.0, 6.0));
    // Half the draws sit within a factor 1+1e-6 of the threshold b = 2^p a.
    const double f = (k % 2) ? std::pow(10.0, rng.uni(0.0, 4.0)) : 1.0 + rng.uni(0.0, 1e-6);
    const double b = std::pow(2.0, p) * a * f;
    const double lhs = std::pow(a + b, 1.0 / p);
    const double rhs = std::pow(a, 1.0 / p) + 0.5 * std::pow(b, 1.0 / p);
    ++rep.trials;
    if (!check_concave_power(p, a, b)) ++rep.violations;
    rep.min_slack = std::min(rep.min_slack, (lhs - rhs) / lhs);
  }
  if (rep.trials == 0) rep.min_slack = 0.0;
  return rep;
}

LemmaReport verify_power_curvature(const MetricCtx& ctx, long trials, uint64_t seed) {
  LemmaReport rep;
  rep.min_slack = kInf;
  Rng rng{seed};
  while (rep.trials < trials) {
    const Point a{rng.uni(-2, 2), rng.uni(-2, 2), rng.uni(-2, 2)};
    const Point c{rng.uni(-2, 2), rng.uni(-2, 2), rng.uni(-2, 2)};
    Point b;
    if (rep.trials % 2) {
      b = {rng.uni(-2, 2), rng.uni(-2, 2), rng.uni(-2, 2)};
    } else {
      // Near the horizontal segment from a toward c: the nearly tight case.
      const auto S = horizontal_segment(a, c);
      const double e = std::pow(10.0, rng.uni(-6.0, -1.0));
      b = multiply(S.eval(rng.uni(0.0, 1.0)), Point{e * rng.uni(-1, 1), e * rng.uni(-1, 1),
                                                     e * e * rng.uni(-1, 1)});
    }
    const double ac = distance(ctx, a, c);
    if (!(ac > 1e-6)) continue;
    const double amin = std::max(0.5, std::max(distance(ctx, a, b), distance(ctx, b, c)) / ac);
    if (amin > 1.5) continue;
    const double alpha = std::min(1.5, rng.uni(amin, 1.5) * (1.0 + 1e-15));
    if (std::max(distance(ctx, a, b), distance(ctx, b, c)) > alpha * ac) continue;
    const auto t = power_curvature_terms(ctx, a, b, c, alpha);
    ++rep.trials;
    if (t.lhs - t.rhs < -kLemmaSlack * t.scale) ++rep.violations;
    rep.min_slack = std::min(rep.min_slack, (t.lhs - t.rhs) / t.scale);
  }
  if (rep.trials == 0) rep.min_slack = 0.0;
  return rep;
}

// ---- ball beta numbers ----

HorizontalLine line_from_params(const LineParams& lp) {
  const double sn = std::sin(lp.theta), cs = std::cos(lp.theta);
  return {{-lp.s * sn, lp.s * cs, lp.h}, lp.theta};
}

LineParams params_from_line(const HorizontalLine& L) {
  double th = std::fmod(L.angle, std::numbers::pi);
  if (th < 0) th += std::numbers::pi;
  const double ux = std::cos(th), uy = std::sin(th);
  const Point& b = L.base;
  const double t0 = -(b.x * ux + b.y * uy);
  const double fx = b.x + t0 * ux, fy = b.y + t0 * uy;
  const double z = b.z + 0.5 * t0 * (b.x * uy - b.y * ux);
  return {th, -fx * uy + fy * ux, z};
}

double line_sup(const MetricCtx& ctx, const std::vector<Point>& q, const HorizontalLine& L) {
  // line_foot inlined with the direction hoisted; compares fourth powers.
  const double ux = std::cos(L.angle), uy = std::sin(L.angle), eta = ctx.eta;
  double m4 = 0.0;
  for (const auto& p : q) {
    const Point h = left_diff(p, L.base);
    const double c = 0.5 * (h.x * uy - h.y * ux);
    const double a = h.x * ux + h.y * uy;
    const double cc = c * c;
    const double t = depressed_cubic_root(4.0 * cc + 0.5 * eta * cc, 0.5 * eta * c * (h.z - c * a)) - a;
    const double x = h.x + t * ux, y = h.y + t * uy, z = h.z + c * t;
    const double r2 = x * x + y * y;
    m4 = std::max(m4, r2 * r2 + eta * z * z);
  }
  return std::sqrt(std::sqrt(m4));
}

BetaOptions BetaOptions::fast() {
  BetaOptions o;
  o.starts = 2;
  o.seed_points = 5;
  o.max_iter = 300;
  o.tol = 1e-8;
  o.subset = 32;
  return o;
}

std::vector<Point> points_in_ball(const MetricCtx& ctx, const std::vector<Point>& K,
                                  const Ball& B) {
  std::vector<Point> out;
  for (const auto& p : K)
    if (distance(ctx, B.center, p) <= B.radius) out.push_back(p);
  return out;
}

namespace {

void sample_edge_in_ball(const MetricCtx& ctx, const Curve& c, size_t k, const Ball& B,
                         double spacing, std::vector<Point>& out) {
  const auto S = c.edge_segment(k);
  const double len = S.length();
  const int m = std::max(1, int(std::ceil(len / spacing)));
  auto inside = [&](double u) { return distance(ctx, B.center, S.eval(u)) <= B.radius; };
  // The far end of an open curve has no outgoing edge, so the last edge keeps its end.
  const bool keep_end = !c.closed && k + 2 == c.size();
  bool prev = inside(0.0);
  if (prev) out.push_back(S.start);
  for (int j = 1; j <= m; ++j) {
    const double u = double(j) / m;
    const bool cur = inside(u);
    if (cur != prev) {
      // Boundary crossing: the extreme points of Gamma in B often sit on the sphere.
      double lo = double(j - 1) / m, hi = u;
      for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        (inside(mid) == prev ? lo : hi) = mid;
      }
      out.push_back(S.eval(prev ? lo : hi));
    }
    if (cur && (j < m || keep_end)) out.push_back(j < m ? S.eval(u) : c.p[k + 1]);
    prev = cur;
  }
}

bool edge_may_meet(const Curve& c, size_t k, const Ball& B) {
  const auto S = c.edge_segment(k);
  const Point e = S.end();
  const double ax = S.start.x, ay = S.start.y, bx = e.x, by = e.y;
  const double dx = bx - ax, dy = by - ay, l2 = dx * dx + dy * dy;
  double t = l2 > 0 ? ((B.center.x - ax) * dx + (B.center.y - ay) * dy) / l2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(ax + t * dx - B.center.x, ay + t * dy - B.center.y) <= B.radius;
}

}  // namespace

std::vector<Point> curve_points_in_ball(const MetricCtx& ctx, const Curve& c, const Ball& B,
                                        double spacing) {
  std::vector<Point> out;
  if (c.size() == 1) {
    if (distance(ctx, B.center, c.p[0]) <= B.radius) out.push_back(c.p[0]);
    return out;
  }
  for (size_t k = 0; k < c.num_edges(); ++k)
    if (edge_may_meet(c, k, B)) sample_edge_in_ball(ctx, c, k, B, spacing, out);
  return out;
}

std::vector<Point> curve_points_in_ball(const MetricCtx& ctx, const EdgeIndex& idx,
                                        const Ball& B, double spacing) {
  const Curve& c = idx.curve();
  std::vector<Point> out;
  auto edges = idx.edges_near(B);
  std::sort(edges.begin(), edges.end());
  for (size_t k : edges) sample_edge_in_ball(ctx, c, k, B, spacing, out);
  return out;
}

namespace {

using V3 = std::array<double, 3>;

struct Fit {
  const MetricCtx& ctx;
  const std::vector<Point>& q;
  double sqeta;
  long evals = 0;

  // v = (theta, s, h sqrt(eta)); the last coordinate is in distance-squared units.
  HorizontalLine line(const V3& v) const { return line_from_params({v[0], v[1], v[2] / sqeta}); }
  double operator()(const V3& v) {
    ++evals;
    return line_sup(ctx, q, line(v));
  }
};

V3 nelder_mead(Fit& F, const V3& x0, const V3& step, int max_iter, double tol, double& fx) {
  std::array<V3, 4> s;
  std::array<double, 4> f;
  s[0] = x0;
  for (int i = 0; i < 3; ++i) {
    s[size_t(i) + 1] = x0;
    s[size_t(i) + 1][size_t(i)] += step[size_t(i)];
  }
  for (size_t k = 0; k < 4; ++k) f[k] = F(s[k]);
  auto lerp = [](const V3& a, const V3& b, double t) {
    return V3{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
  };
  for (int it = 0; it < max_iter; ++it) {
    std::array<size_t, 4> o{0, 1, 2, 3};
    std::sort(o.begin(), o.end(), [&](size_t a, size_t b) { return f[a] < f[b]; });
    std::array<V3, 4> s2;
    std::array<double, 4> f2;
    for (size_t k = 0; k < 4; ++k) {
      s2[k] = s[o[k]];
      f2[k] = f[o[k]];
    }
    s = s2;
    f = f2;
    double size = 0.0;
    for (size_t k = 1; k < 4; ++k)
      for (size_t i = 0; i < 3; ++i) size = std::max(size, std::fabs(s[k][i] - s[0][i]));
    if (size < tol) break;
    V3 c{0, 0, 0};
    for (size_t k = 0; k < 3; ++k)
      for (size_t i = 0; i < 3; ++i) c[i] += s[k][i] / 3.0;
    const V3 xr = lerp(c, s[3], -1.0);
    const double fr = F(xr);
    if (fr < f[0]) {
      const V3 xe = lerp(c, s[3], -2.0);
      const double fe = F(xe);
      if (fe < fr) {
        s[3] = xe;
        f[3] = fe;
      } else {
        s[3] = xr;
        f[3] = fr;
      }
    } else if (fr < f[2]) {
      s[3] = xr;
      f[3] = fr;
    } else {
      const V3 xc = fr < f[3] ? lerp(c, xr, 0.5) : lerp(c, s[3], 0.5);
      const double fc = F(xc);
      if (fc < std::min(fr, f[3])) {
        s[3] = xc;
        f[3] = fc;
      } else {
        for (size_t k = 1; k < 4; ++k) {
          s[k] = lerp(s[0], s[k], 0.5);
          f[k] = F(s[k]);
        }
      }
    }
  }
  size_t b = size_t(std::min_element(f.begin(), f.end()) - f.begin());
  fx = f[b];
  return s[b];
}

V3 compass(auto& F, V3 x, double& fx, V3 step, double tol) {
  for (int guard = 0; guard < 100000; ++guard) {
    if (std::max({step[0], step[1], step[2]}) < tol) break;
    bool moved = false;
    for (size_t i = 0; i < 3 && !moved; ++i)
      for (double sg : {1.0, -1.0}) {
        V3 y = x;
        y[i] += sg * step[i];
        const double fy = F(y);
        if (fy < fx) {
          x = y;
          fx = fy;
          moved = true;
          break;
        }
      }
    if (!moved)
      for (auto& s : step) s *= 0.5;
  }
  return x;
}

// Farthest-point order: start at the point farthest from the origin.
std::vector<size_t> farthest_points(const MetricCtx& ctx, const std::vector<Point>& q, size_t k) {
  std::vector<size_t> out;
  if (q.empty()) return out;
  std::vector<double> d(q.size());
  size_t first = 0;
  for (size_t i = 0; i < q.size(); ++i) {
    d[i] = koranyi_norm(ctx, q[i]);
    if (d[i] > d[first]) first = i;
  }
  out.push_back(first);
  for (size_t i = 0; i < q.size(); ++i) d[i] = distance(ctx, q[first], q[i]);
  while (out.size() < std::min(k, q.size())) {
    const size_t j = size_t(std::max_element(d.begin(), d.end()) - d.begin());
    if (!(d[j] > 0.0)) break;
    out.push_back(j);
    for (size_t i = 0; i < q.size(); ++i) d[i] = std::min(d[i], distance(ctx, q[j], q[i]));
  }
  return out;
}

V3 to_vars(const HorizontalLine& L, double sqeta) {
  const auto lp = params_from_line(L);
  return {lp.theta, lp.s, lp.h * sqeta};
}

// Minimax fit on q (unit scale). Returns the best vars; fx holds the objective.
V3 fit_points(Fit& F, const std::vector<Point>& q, const BetaOptions& opt,
              const std::vector<V3>& extra, double& fx) {
  const auto ext = farthest_points(F.ctx, q, size_t(std::max(2, opt.seed_points)));
  std::vector<V3> seeds = extra;
  const Point origin{};
  for (size_t i = 0; i < ext.size(); ++i) {
    const Point& a = q[ext[i]];
    if (a.x != 0.0 || a.y != 0.0) seeds.push_back(to_vars(HorizontalLine::through(origin, a), F.sqeta));
    for (size_t j = i + 1; j < ext.size(); ++j) {
      const Point& b = q[ext[j]];
      if (a.x != b.x || a.y != b.y) seeds.push_back(to_vars(HorizontalLine::through(a, b), F.sqeta));
    }
  }
  // Principal planar direction through the planar centroid.
  double mx = 0, my = 0;
  for (const auto& p : q) {
    mx += p.x;
    my += p.y;
  }
  mx /= double(q.size());
  my /= double(q.size());
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : q) {
    sxx += (p.x - mx) * (p.x - mx);
    sxy += (p.x - mx) * (p.y - my);
    syy += (p.y - my) * (p.y - my);
  }
  const double th = 0.5 * std::atan2(2 * sxy, sxx - syy);
  seeds.push_back(to_vars(HorizontalLine{{mx, my, 0.0}, th}, F.sqeta));
  if (seeds.empty()) seeds.push_back({0, 0, 0});

  std::vector<std::pair<double, V3>> scored;
  for (const auto& v : seeds) scored.emplace_back(F(v), v);
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  V3 best = scored[0].second;
  fx = scored[0].first;
  int started = 0;
  std::vector<V3> used;
  for (const auto& [f0, v] : scored) {
    if (started >= opt.starts) break;
    bool dup = false;
    for (const auto& u : used)
      if (std::fabs(u[0] - v[0]) < 1e-3 && std::fabs(u[1] - v[1]) < 1e-3 &&
          std::fabs(u[2] - v[2]) < 1e-3)
        dup = true;
    if (dup) continue;
    used.push_back(v);
    ++started;
    double f = f0;
    V3 x = nelder_mead(F, v, {0.2, 0.2, 0.2}, opt.max_iter, opt.tol, f);
    x = nelder_mead(F, x, {0.02, 0.02, 0.02}, opt.max_iter, opt.tol, f);
    if (f < fx) {
      fx = f;
      best = x;
    }
  }
  best = compass(F, best, fx, {1e-3, 1e-3, 1e-3}, opt.tol);
  return best;
}

std::vector<Point> local_points(const std::vector<Point>& pts, const Point& center, double scale) {
  std::vector<Point> q;
  q.reserve(pts.size());
  const double inv = 1.0 / scale;
  for (const auto& p : pts) {
    const Point d = left_diff(center, p);
    q.push_back({d.x * inv, d.y * inv, d.z * inv * inv});
  }
  return q;
}

}  // namespace

BetaResult beta_of_points(const MetricCtx& ctx, const std::vector<Point>& pts, const Ball& B,
                          const BetaOptions& opt) {
  if (pts.empty()) throw std::domain_error("the set misses the ball");
  BetaResult res;
  res.points = pts.size();
  res.diam = 2.0 * B.radius;
  auto q0 = local_points(pts, B.center, 1.0);
  double rho = 0.0;
  for (const auto& p : q0) rho = std::max(rho, koranyi_norm(ctx, p));
  if (!(rho > 0.0)) return res;
  // Power-of-two scale: dilating the input by 2^k reproduces the same arithmetic.
  int e = 0;
  std::frexp(rho, &e);
  const double scale = std::ldexp(1.0, e);
  const auto q = local_points(pts, B.center, scale);

  const double sqeta = std::sqrt(ctx.eta);
  double fx = 0.0;
  V3 v{};
  long evals = 0;
  if (q.size() <= opt.subset) {
    Fit F{ctx, q, sqeta};
    v = fit_points(F, q, opt, {}, fx);
    evals = F.evals;
  } else {
    const auto idx = farthest_points(ctx, q, opt.subset);
    std::vector<Point> act;
    std::vector<char> in(q.size(), 0);
    for (size_t i : idx) {
      act.push_back(q[i]);
      in[i] = 1;
    }
    std::vector<V3> extra;
    for (int round = 0; round < 12; ++round) {
      Fit F{ctx, act, sqeta};
      v = fit_points(F, act, opt, extra, fx);
      evals += F.evals;
      const HorizontalLine L = F.line(v);
      std::vector<std::pair<double, size_t>> over;
      for (size_t i = 0; i < q.size(); ++i) {
        if (in[i]) continue;
        const double d = line_foot(ctx, q[i], L).dist;
        if (d > fx * (1.0 + 1e-12)) over.emplace_back(-d, i);
      }
      if (over.empty()) break;
      std::sort(over.begin(), over.end());
      for (size_t k = 0; k < std::min<size_t>(16, over.size()); ++k) {
        act.push_back(q[over[k].second]);
        in[over[k].second] = 1;
      }
      extra = {v};
    }
    Fit F{ctx, q, sqeta};
    fx = F(v);
    evals += F.evals;
  }
  res.sup = fx * scale;
  res.beta = res.diam > 0 ? res.sup / res.diam : 0.0;
  res.line = {v[0], v[1] * scale, v[2] / sqeta * scale * scale};
  res.evals = evals;
  return res;
}

BetaResult beta_ball(const MetricCtx& ctx, const std::vector<Point>& K, const Ball& B,
                     const BetaOptions& opt) {
  return beta_of_points(ctx, points_in_ball(ctx, K, B), B, opt);
}

BetaResult beta_ball_grid(const MetricCtx& ctx, const std::vector<Point>& K, const Ball& B,
                          int grid) {
  const auto pts = points_in_ball(ctx, K, B);
  if (pts.empty()) throw std::domain_error("the set misses the ball");
  if (grid < 2) throw std::invalid_argument("grid must have at least two nodes");
  BetaResult res;
  res.points = pts.size();
  res.diam = 2.0 * B.radius;
  const double r = B.radius;
  const auto q = local_points(pts, B.center, r);
  const double sqeta = std::sqrt(ctx.eta);
  // Any line farther than 2r from the center is beaten by a line through the center, so
  // |s| <= 2 and |h| sqrt(eta) <= 2 + 2 sqrt(eta) in units of r. The height runs on
  // w = sign(v) v^2 to keep the grid uniform in distance.
  const double vmax = std::sqrt(2.0 + 2.0 * sqeta);
  auto line_of = [&](const V3& u) {
    const double w = std::copysign(u[2] * u[2], u[2]);
    return line_from_params({u[0], u[1], w / sqeta});
  };
  long evals = 0;
  auto F = [&](const V3& u) {
    ++evals;
    return line_sup(ctx, q, line_of(u));
  };
  const double dth = std::numbers::pi / grid, ds = 4.0 / (grid - 1), dv = 2.0 * vmax / (grid - 1);
  constexpr size_t kKeep = 8;
  std::vector<std::pair<double, V3>> top;
  double cut = kInf;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      for (int k = 0; k < grid; ++k) {
        const V3 u{i * dth, -2.0 + j * ds, -vmax + k * dv};
        const HorizontalLine L = line_of(u);
        double m = 0.0;
        for (const auto& p : q) {
          m = std::max(m, line_foot(ctx, p, L).dist);
          if (m >= cut) break;
        }
        ++evals;
        if (m >= cut) continue;
        top.emplace_back(m, u);
        if (top.size() > kKeep) {
          std::sort(top.begin(), top.end(),
                    [](const auto& a, const auto& b) { return a.first < b.first; });
          top.resize(kKeep);
          cut = top.back().first;
        }
      }
  // Zoom from each kept cell: a 9^3 local grid spanning one cell either way, recentred on its
  // best node and halved each round. Coordinate polish alone stalls on the kinks of the max.
  auto sup_below = [&](const V3& u, double cut) {
    ++evals;
    const HorizontalLine L = line_of(u);
    double m = 0.0;
    for (const auto& p : q) {
      m = std::max(m, line_foot(ctx, p, L).dist);
      if (m >= cut) break;
    }
    return m;
  };
  double best = kInf;
  V3 bu{};
  for (auto [f, u] : top) {
    V3 h{dth, ds, dv};
    for (int round = 0; round < 44; ++round) {
      V3 c = u;
      for (int a = -4; a <= 4; ++a)
        for (int b = -4; b <= 4; ++b)
          for (int d = -4; d <= 4; ++d) {
            if (!a && !b && !d) continue;
            const V3 v{c[0] + a * h[0] / 4, c[1] + b * h[1] / 4, c[2] + d * h[2] / 4};
            const double m = sup_below(v, f);
            if (m < f) {
              f = m;
              u = v;
            }
          }
      for (double& x : h) x *= 0.5;
    }
    u = compass(F, u, f, h, 1e-14);
    if (f < best) {
      best = f;
      bu = u;
    }
  }
  res.sup = best * r;
  res.beta = res.sup / res.diam;
  const double w = std::copysign(bu[2] * bu[2], bu[2]);
  res.line = {bu[0], bu[1] * r, w / sqeta * r * r};
  res.evals = evals;
  return res;
}

// ---- flat and non-flat balls ----

BallClass classify_betas(const Ball& B, double beta_gamma, const std::vector<double>& arc_betas,
                         double eps0) {
  BallClass bc;
  bc.ball = B;
  bc.beta_gamma = beta_gamma;
  long arg = -1;
  for (size_t i = 0; i < arc_betas.size(); ++i)
    if (arg < 0 || arc_betas[i] > bc.max_arc_beta) {
      bc.max_arc_beta = arc_betas[i];
      arg = long(i);
    }
  if (beta_gamma > 0.0 && arg >= 0 && bc.max_arc_beta >= eps0 * beta_gamma) {
    bc.cls = Flatness::NonFlat;
    bc.witness_index = arg;
    bc.witness_beta = bc.max_arc_beta;
  }
  return bc;
}

double filtration_arc_beta(const MetricCtx& ctx, const Curve& c, const FArc& a) {
  if (!(a.diam > 0.0)) return 0.0;
  Arc arc = carc_measure(ctx, c, a.dom);
  arc.diam = a.diam;
  return beta_arc(ctx, c, arc);
}

std::vector<std::pair<int, size_t>> lambda_prime_arcs(const Prefiltration& pre,
                                                      const Filtration& f, size_t cube) {
  std::vector<std::pair<int, size_t>> out;
  for (const auto& [level, i] : pre.cube_arcs.at(cube)) out.emplace_back(level, lambda_prime(f, level, i));
  return out;
}

BallClass classify_ball(const MetricCtx& ctx, const Curve& c, const Prefiltration& pre,
                        const Filtration& f, size_t cube, const Ball& B, double beta_gamma,
                        double eps0) {
  const auto arcs = lambda_prime_arcs(pre, f, cube);
  std::vector<double> betas;
  for (const auto& [n, i] : arcs) betas.push_back(filtration_arc_beta(ctx, c, f.arc(n, i)));
  BallClass bc = classify_betas(B, beta_gamma, betas, eps0);
  if (bc.witness_index >= 0) {
    const auto [n, i] = arcs[size_t(bc.witness_index)];
    bc.witness_level = n;
    bc.witness_index = long(i);
  }
  return bc;
}

// ---- arc lemmas ----

namespace {

// Chain geometry generic over the scalar. Nearly straight arcs put the two sides of the lemma
// within rounding of each other, and the Koranyi root turns z-rounding e into sqrt(e) distance
// noise: doubles leave ~1e-10 diam of noise, quad leaves ~1e-17. Arcs are screened in double
// and redone in quad only when the double slack comes out negative.
using quad = __float128;

inline double m_sqrt(double v) { return std::sqrt(v); }
inline double m_cbrt(double v) { return std::cbrt(v); }
inline double m_abs(double v) { return std::fabs(v); }
inline double m_copysign(double a, double b) { return std::copysign(a, b); }
inline quad m_sqrt(quad v) { return sqrtq(v); }
inline quad m_cbrt(quad v) { return cbrtq(v); }
inline quad m_abs(quad v) { return fabsq(v); }
inline quad m_copysign(quad a, quad b) { return copysignq(a, b); }

template <class T>
struct QP {
  T x = 0, y = 0, z = 0;
};

template <class T>
QP<T> qmul(const QP<T>& a, const QP<T>& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z + T(0.5) * (a.x * b.y - b.x * a.y)};
}

template <class T>
QP<T> qdiff(const QP<T>& a, const QP<T>& b) {
  const T dx = b.x - a.x, dy = b.y - a.y;
  return {dx, dy, (b.z - a.z) + T(0.5) * (a.y * dx - a.x * dy)};
}

template <class T>
T qnorm(T eta, const QP<T>& p) {
  const T r2 = p.x * p.x + p.y * p.y;
  return m_sqrt(m_sqrt(r2 * r2 + eta * p.z * p.z));
}

// Real root of s^3 + p s + q with p >= 0.
template <class T>
T qcubic(T p, T q) {
  if (q == 0) return 0;
  const T disc = T(0.25) * q * q + p * p * p / 27;
  const T w = m_cbrt(T(0.5) * m_abs(q) + m_sqrt(disc));
  T s = w > 0 ? -m_copysign(w - p / (3 * w), q) : T(0);
  for (int i = 0; i < 3; ++i) {
    const T d = 3 * s * s + p;
    if (!(d > 0)) break;
    s -= (s * s * s + p * s + q) / d;
  }
  return s;
}

template <class T>
struct QSeg {
  QP<T> s;
  T dx = 0, dy = 0, len = 0;
  QP<T> eval(double t) const { return qmul(s, {T(t) * dx, T(t) * dy, T(0)}); }
  QP<T> end() const { return eval(1.0); }
};

template <class T>
QSeg<T> qseg(const QP<T>& a, const QP<T>& b) {
  const QP<T> d = qdiff(a, b);
  return {a, d.x, d.y, m_sqrt(d.x * d.x + d.y * d.y)};
}

template <class T>
double qdist(T eta, const QP<T>& p, const QSeg<T>& S) {
  const QP<T> h = qdiff(S.s, p);
  if (!(S.len > 0)) return double(qnorm(eta, h));
  // h^{-1} S(t) = (-h) + t u with area term c t.
  const T ux = S.dx / S.len, uy = S.dy / S.len;
  const T hx = -h.x, hy = -h.y, hz = -h.z;
  const T c = T(0.5) * (hx * uy - hy * ux);
  const T a = hx * ux + hy * uy;
  const T e = hz - c * a;
  const T pc = 4 * c * c + T(0.5) * eta * c * c;
  const T qc = T(0.5) * eta * c * e;
  T t = qcubic(pc, qc) - a;
  if (t < 0) t = 0;
  if (t > S.len) t = S.len;
  return double(qnorm(eta, QP<T>{hx + t * ux, hy + t * uy, hz + c * t}));
}

// arc_chain from the exact double increments, accumulated in T.
template <class T>
std::vector<QP<T>> quad_chain(const Curve& c, double a, double b) {
  if (c.closed) {
    const double a0 = c.wrap(a);
    b = a0 + std::min(b - a, c.T);
    a = a0;
  } else {
    a = std::clamp(a, 0.0, c.T);
    b = std::clamp(b, a, c.T);
  }
  std::vector<QP<T>> q{QP<T>{}};
  const size_t E = c.num_edges();
  const size_t k = c.edge_at(a);
  double start = c.t[k];
  double dt = c.edge_dt(k);
  const double sa = dt > 0 ? (a - start) / dt : 0.0;
  size_t e = k;
  QP<T> cur{};
  for (size_t guard = 0; guard <= E + 1; ++guard) {
    const double end = start + dt;
    if (!(end < b)) break;
    const Point& d = c.inc[e];
    const QP<T> dq{T(d.x), T(d.y), T(d.z)};
    const QP<T> next =
        e == k ? QP<T>{T(1 - sa) * dq.x, T(1 - sa) * dq.y, dq.z} : qmul(cur, dq);
    q.push_back(next);
    cur = next;
    e = (e + 1) % E;
    start = end;
    dt = c.edge_dt(e);
  }
  const double sb = dt > 0 ? std::clamp((b - start) / dt, 0.0, 1.0) : 0.0;
  const Point& d = c.inc[e];
  if (q.size() == 1)
    q.push_back({T(sb - sa) * T(d.x), T(sb - sa) * T(d.y), T(0)});
  else
    q.push_back(qmul(cur, QP<T>{T(sb) * T(d.x), T(sb) * T(d.y), T(0)}));
  return q;
}

struct PlanarSeg {
  double ax, ay, dx, dy, l2;
};

double planar_gap(const PlanarSeg& s, double x, double y) {
  double t = s.l2 > 0 ? ((x - s.ax) * s.dx + (y - s.ay) * s.dy) / s.l2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(s.ax + t * s.dx - x, s.ay + t * s.dy - y);
}

template <class T>
Lemma8Report lemma8_impl(const MetricCtx& ctx, const Curve& c, const Arc& arc, double diam,
                         int n_edge, int n_line, bool refine) {
  const auto q = quad_chain<T>(c, arc.a, arc.b);
  const T eta = ctx.eta;
  Lemma8Report rep;
  rep.diam = diam;
  const auto L = qseg(q.front(), q.back());
  std::vector<QSeg<T>> E;
  std::vector<PlanarSeg> P;
  for (size_t k = 0; k + 1 < q.size(); ++k) {
    E.push_back(qseg(q[k], q[k + 1]));
    const double dx = double(E.back().dx), dy = double(E.back().dy);
    P.push_back({double(q[k].x), double(q[k].y), dx, dy, dx * dx + dy * dy});
  }
  const double tol_abs = 1e-13 * std::max(rep.diam, 1e-300);

  // sup over the arc of d(gamma(t), L_tau)
  double best = 0.0;
  for (const auto& p : q) best = std::max(best, qdist(eta, p, L));
  std::vector<std::vector<double>> vals(E.size());
  for (size_t k = 0; k < E.size(); ++k) {
    vals[k].resize(size_t(n_edge) + 1);
    for (int j = 0; j <= n_edge; ++j) {
      vals[k][size_t(j)] = qdist(eta, E[k].eval(double(j) / n_edge), L);
      best = std::max(best, vals[k][size_t(j)]);
    }
  }
  if (refine) {
    for (size_t k = 0; k < E.size(); ++k) {
      const double len = double(E[k].len);
      if (!(len > 0)) continue;
      auto f = [&](double t) { return qdist(eta, E[k].eval(t), L); };
      const double step = 1.0 / n_edge;
      for (int j = 0; j < n_edge; ++j) {
        const double bound = 0.5 * (vals[k][size_t(j)] + vals[k][size_t(j) + 1]) + 0.5 * len * step;
        if (bound > best) best = golden_max(f, j * step, (j + 1) * step, tol_abs / len, best);
      }
    }
  }
  rep.beta_diam = best;

  // sup over L_tau of d(x, tau)
  size_t hint = 0;
  auto dist_to_arc = [&](const QP<T>& x) {
    if (E.empty()) return double(qnorm(eta, qdiff(q.front(), x)));
    double m = qdist(eta, x, E[hint]);
    const double px = double(x.x), py = double(x.y);
    for (size_t k = 0; k < E.size(); ++k) {
      if (k == hint || planar_gap(P[k], px, py) >= m * (1 + 1e-12)) continue;
      const double d = qdist(eta, x, E[k]);
      if (d < m) {
        m = d;
        hint = k;
      }
    }
    return m;
  };
  auto g = [&](double t) { return dist_to_arc(L.eval(t)); };
  const double len = double(L.len);
  if (!(len > 0)) {
    rep.sup_L = g(0.0);
  } else if (refine) {
    rep.sup_L = lipschitz_sup(g, 0.0, 1.0, len, n_line, tol_abs / len);
  } else {
    for (int j = 0; j <= n_line; ++j) rep.sup_L = std::max(rep.sup_L, g(double(j) / n_line));
  }
  rep.end_gap = double(qnorm(eta, qdiff(L.end(), q.back())));
  rep.slack = rep.beta_diam - rep.sup_L;
  rep.end_ok = rep.end_gap <= rep.beta_diam + 1e-10 * rep.diam;
  return rep;
}

Lemma8Report lemma8_hybrid(const MetricCtx& ctx, const Curve& c, const Arc& arc, int n_edge,
                           int n_line, bool refine) {
  const double diam = arc.diam > 0 ? arc.diam : chain_diameter(ctx, arc_chain(c, arc.a, arc.b));
  if (c.edge_at(c.closed ? c.wrap(arc.a) : arc.a) ==
      c.edge_at(c.closed ? c.wrap(arc.b) : arc.b) &&
      arc.b - arc.a <= c.edge_dt(c.edge_at(c.closed ? c.wrap(arc.a) : arc.a))) {
    // Inside one edge the arc is its own chord.
    Lemma8Report r;
    r.diam = diam;
    r.end_ok = true;
    return r;
  }
  const auto r = lemma8_impl<double>(ctx, c, arc, diam, n_edge, n_line, refine);
  if (r.end_ok && r.slack >= 0.0) return r;
  return lemma8_impl<quad>(ctx, c, arc, diam, n_edge, n_line, refine);
}

}  // namespace

Lemma8Report check_lemma8(const MetricCtx& ctx, const Curve& c, const Arc& arc) {
  return lemma8_hybrid(ctx, c, arc, 8, 256, true);
}

Lemma8Report check_lemma8_grid(const MetricCtx& ctx, const Curve& c, const Arc& arc, int n) {
  return lemma8_hybrid(ctx, c, arc, n, n, false);
}

namespace {

// Largest sub-interval of [lo,hi] around u0 whose image stays in the closed ball.
Arc grow_inside(const MetricCtx& ctx, const Curve& c, const Ball& B, double lo, double hi,
                double u0, double spacing) {
  auto inside = [&](double u) { return distance(ctx, B.center, c.eval(c.wrap(u))) <= B.radius; };
  auto edge = [&](double in, double out) {
    for (int i = 0; i < 60; ++i) {
      const double m = 0.5 * (in + out);
      (inside(m) ? in : out) = m;
    }
    return in;
  };
  double a = u0, b = u0;
  while (a > lo) {
    const double n = std::max(lo, a - spacing);
    if (!inside(n)) {
      a = edge(a, n);
      break;
    }
    a = n;
  }
  while (b < hi) {
    const double n = std::min(hi, b + spacing);
    if (!inside(n)) {
      b = edge(b, n);
      break;
    }
    b = n;
  }
  return make_arc(ctx, c, a, b);
}

void sample_arc(const Curve& c, const Arc& a, double spacing, std::vector<Point>& out) {
  const int m = std::max(1, int(std::ceil(a.span() / spacing)));
  for (int j = 0; j <= m; ++j) out.push_back(c.eval(c.wrap(a.a + a.span() * j / m)));
}

}  // namespace

FlatSet assemble_flat_set(const MetricCtx& ctx, const Curve& c, const Ball& B,
                          const Arc& tau_prime, const Arc& xi, double h, double spacing) {
  const double r = B.radius;
  if (!(h < 0.1 * r)) throw HypothesisError("need h < r/10");
  const double bd = chain_beta_sup(ctx, arc_chain(c, tau_prime.a, tau_prime.b));
  if (!(bd < h)) throw HypothesisError("need beta(tau') diam(tau') < h");
  if (!(spacing > 0)) throw std::invalid_argument("spacing must be positive");
  const Ball B2{B.center, 2.0 * r, B.level, B.point};
  FlatSet fs;
  fs.h = h;

  // tau~: the piece of tau' inside 2B around its closest approach to the center.
  double ubest = tau_prime.a, dbest = kInf;
  const int m = std::max(1, int(std::ceil(tau_prime.span() / spacing)));
  for (int j = 0; j <= m; ++j) {
    const double u = tau_prime.a + tau_prime.span() * j / m;
    const double d = distance(ctx, B.center, c.eval(c.wrap(u)));
    if (d < dbest) {
      dbest = d;
      ubest = u;
    }
  }
  if (!(dbest <= 2.0 * r)) throw HypothesisError("tau' does not meet 2B");
  fs.tau_tilde = grow_inside(ctx, c, B2, tau_prime.a, tau_prime.b, ubest, spacing);
  fs.tau_tilde_diam = fs.tau_tilde.diam;

  // xi-check: the piece of xi inside 2B around its farthest point from L_tau'.
  const auto L = L_tau(c, tau_prime);
  double xbest = -1.0, ux = xi.a;
  const int mx = std::max(1, int(std::ceil(xi.span() / spacing)));
  for (int j = 0; j <= mx; ++j) {
    const double u = xi.a + xi.span() * j / mx;
    const Point p = c.eval(c.wrap(u));
    if (distance(ctx, B.center, p) > 2.0 * r) continue;
    const double d = dist_point_to_segment_fast(ctx, p, L);
    if (d > xbest) {
      xbest = d;
      ux = u;
    }
  }
  if (xbest < 0) throw HypothesisError("xi does not meet 2B");
  fs.xi_check = grow_inside(ctx, c, B2, xi.a, xi.b, ux, spacing);
  fs.xi_check_diam = fs.xi_check.diam;

  sample_arc(c, fs.tau_tilde, spacing, fs.points);
  sample_arc(c, fs.xi_check, spacing, fs.points);
  return fs;
}

FlatExcessReport check_flat_excess(const MetricCtx& ctx, const Ball& B, double beta_gamma,
                                   double eps0, const std::vector<Point>& E,
                                   const std::vector<Ball>& covering) {
  FlatExcessReport rep;
  const double diamB = 2.0 * B.radius;
  rep.cap = 10.0 * eps0 * beta_gamma * diamB;
  rep.required = 2.0 * diamB + eps0 * beta_gamma * diamB;
  for (const auto& b : covering) {
    if (!(2.0 * b.radius < rep.cap)) {
      rep.capped = false;
      throw HypothesisError("covering ball breaks the diameter cap");
    }
    rep.sum += 2.0 * b.radius;
  }
  for (const auto& p : E) {
    bool hit = false;
    for (const auto& b : covering)
      if (distance(ctx, b.center, p) <= b.radius) {
        hit = true;
        break;
      }
    if (!hit) {
      rep.covered = false;
      throw HypothesisError("covering misses a point of E");
    }
  }
  rep.holds = rep.sum >= rep.required;
  return rep;
}

// ---- geometric martingale ----

std::vector<size_t> MartingaleTree::roots() const {
  std::vector<size_t> r;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].parent < 0) r.push_back(i);
  return r;
}

int martingale_J(int M, double eps0) {
  if (!(eps0 > 0)) throw std::invalid_argument("eps0 must be positive");
  return int(std::floor(M - std::log2(10.0 * eps0) + 10.0)) + 1;
}

namespace {

std::vector<Interval> merged(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.a < b.a; });
  std::vector<Interval> out;
  for (const auto& i : v) {
    if (!(i.b >= i.a)) continue;
    if (!out.empty() && i.a <= out.back().b) {
      out.back().b = std::max(out.back().b, i.b);
    } else {
      out.push_back(i);
    }
  }
  return out;
}

double total(const std::vector<Interval>& v) {
  double s = 0.0;
  for (const auto& i : v) s += i.b - i.a;
  return s;
}

// Length of inner not covered by outer; both sorted and disjoint.
double uncovered(const std::vector<Interval>& inner, const std::vector<Interval>& outer) {
  double out = 0.0;
  size_t j = 0;
  for (const auto& i : inner) {
    double cur = i.a;
    while (j < outer.size() && outer[j].b <= cur) ++j;
    for (size_t k = j; k < outer.size() && outer[k].a < i.b; ++k) {
      if (outer[k].a > cur) out += outer[k].a - cur;
      cur = std::max(cur, outer[k].b);
      if (cur >= i.b) break;
    }
    if (cur < i.b) out += i.b - cur;
  }
  return out;
}

bool point_in(const std::vector<Interval>& v, double u) {
  auto it = std::upper_bound(v.begin(), v.end(), u,
                             [](double x, const Interval& i) { return x < i.a; });
  if (it == v.begin()) return false;
  --it;
  return u <= it->b;
}

}  // namespace

void build_martingale(MartingaleTree& t) {
  const size_t n = t.nodes.size();
  for (auto& nd : t.nodes) nd.support = merged(nd.support);
  t.h1.assign(n, 0.0);
  t.remainder.assign(n, 0.0);
  t.s_prime.assign(n, 0.0);
  t.g.assign(n, 0.0);
  for (size_t i = 0; i < n; ++i) t.h1[i] = total(t.nodes[i].support);
  for (size_t i = 0; i < n; ++i) {
    const auto& nd = t.nodes[i];
    const double tol = 1e-12 * std::max(t.h1[i], 1e-300);
    double kids = 0.0, kid_diam = 0.0;
    std::vector<Interval> all;
    for (size_t k : nd.children) {
      if (k <= i || t.nodes[k].parent != long(i))
        throw DecompositionError("children must follow their parent and point back to it");
      if (uncovered(t.nodes[k].support, nd.support) > tol)
        throw DecompositionError("a child leaves its parent");
      kids += t.h1[k];
      kid_diam += t.nodes[k].diam;
      all.insert(all.end(), t.nodes[k].support.begin(), t.nodes[k].support.end());
    }
    if (kids - total(merged(all)) > tol) throw DecompositionError("children overlap");
    t.remainder[i] = std::max(0.0, t.h1[i] - kids);
    t.s_prime[i] = t.remainder[i] + kid_diam;
  }
  for (size_t i = 0; i < n; ++i) {
    const long p = t.nodes[i].parent;
    if (p >= 0 && size_t(p) >= i) throw DecompositionError("parents must precede children");
    t.g[i] = t.nodes[i].diam;
    if (p >= 0 && t.s_prime[size_t(p)] > 0)
      t.g[i] += t.g[size_t(p)] * t.nodes[i].diam / t.s_prime[size_t(p)];
  }
}

std::vector<std::pair<size_t, double>> martingale_masses(const MartingaleTree& t, size_t q) {
  std::vector<std::pair<size_t, double>> out{{q, t.nodes.at(q).diam}};
  for (size_t k = 0; k < out.size(); ++k) {
    const auto [i, m] = out[k];
    if (!(t.s_prime[i] > 0)) continue;
    for (size_t c : t.nodes[i].children) out.emplace_back(c, m * t.nodes[c].diam / t.s_prime[i]);
  }
  return out;
}

double martingale_density(const MartingaleTree& t, double u) {
  long cur = -1;
  for (size_t r : t.roots())
    if (point_in(t.nodes[r].support, u)) {
      cur = long(r);
      break;
    }
  if (cur < 0) return 0.0;
  for (;;) {
    long next = -1;
    for (size_t c : t.nodes[size_t(cur)].children)
      if (point_in(t.nodes[c].support, u)) {
        next = long(c);
        break;
      }
    if (next < 0) break;
    cur = next;
  }
  const size_t d = size_t(cur);
  if (!(t.remainder[d] > 0 && t.s_prime[d] > 0)) return 0.0;
  return t.g[d] / t.s_prime[d];
}

bool MartingaleReport::ok() const {
  return prop_i == 0 && prop_iii == 0 && conservation == 0 && max_density <= density_bound &&
         sum_diam <= sum_bound;
}

MartingaleReport verify_martingale(const MartingaleTree& t, size_t density_samples,
                                   uint64_t seed) {
  MartingaleReport rep;
  const size_t n = t.nodes.size();
  rep.nodes = n;
  const double c0 = t.eps0 / 10.0;
  rep.q = 1.0 / (1.0 + c0 * std::ldexp(1.0, -t.M));
  rep.density_bound = 10.0 / t.eps0 * std::ldexp(1.0, t.M);
  rep.sum_bound = rep.density_bound * t.length;
  for (size_t q = 0; q < n; ++q) {
    rep.sum_diam += t.nodes[q].diam;
    if (!t.nodes[q].children.empty() && t.s_prime[q] > 0 &&
        t.nodes[q].diam / t.s_prime[q] <= rep.q)
      ++rep.chop_ratio_ok;
    const auto masses = martingale_masses(t, q);
    std::vector<double> mass(n, 0.0);
    for (const auto& [i, m] : masses) mass[i] = m;
    double integral = 0.0;
    bool outside = false, leak = false;
    for (const auto& [i, m] : masses) {
      const double rem = t.s_prime[i] > 0 ? m * t.remainder[i] / t.s_prime[i] : 0.0;
      integral += rem;
      double out = rem;
      for (size_t c : t.nodes[i].children) out += mass[c];
      if (std::fabs(out - m) > 1e-12 * m) leak = true;
      if (rem > 0 && uncovered(t.nodes[i].support, t.nodes[q].support) >
                         1e-12 * std::max(t.h1[q], 1e-300))
        outside = true;
    }
    if (integral < t.nodes[q].diam * (1.0 - 1e-12)) ++rep.prop_i;
    if (outside) ++rep.prop_iii;
    if (leak) ++rep.conservation;
  }
  // The total density is constant on each remainder, so its sup is a max over nodes.
  for (size_t i = 0; i < n; ++i)
    if (t.remainder[i] > 0 && t.s_prime[i] > 0)
      rep.max_density = std::max(rep.max_density, t.g[i] / t.s_prime[i]);
  uint64_t state = seed;
  Rng rng{state};
  for (size_t k = 0; k < density_samples; ++k) {
    const double d = martingale_density(t, rng.uni(0.0, t.length));
    rep.max_density = std::max(rep.max_density, d);
    ++rep.density_samples;
  }
  return rep;
}

MartingaleTree martingale_from_cubes(const MetricCtx& ctx, const Curve& c, const EdgeIndex& idx,
                                     const CubeForest& forest, int M, double eps0) {
  MartingaleTree t;
  t.M = M;
  t.eps0 = eps0;
  t.J_M = forest.J;
  t.length = c.T;
  // Parents first: breadth-first from the roots.
  std::vector<size_t> order = forest.roots();
  for (size_t k = 0; k < order.size(); ++k)
    for (size_t ch : forest.cubes[order[k]].children) order.push_back(ch);
  std::vector<long> pos(forest.cubes.size(), -1);
  for (size_t k = 0; k < order.size(); ++k) pos[order[k]] = long(k);
  std::vector<std::vector<Interval>> pre(forest.balls.size());
  std::vector<char> done(forest.balls.size(), 0);
  const double grow = 1.0 + std::ldexp(1.0, -forest.J + 2);
  for (size_t q : order) {
    const Cube& cube = forest.cubes[q];
    MartingaleNode nd;
    nd.diam = grow * 2.0 * forest.balls[cube.ball].radius;
    nd.parent = cube.parent >= 0 ? pos[size_t(cube.parent)] : -1;
    for (size_t ch : cube.children) nd.children.push_back(size_t(pos[ch]));
    for (size_t b : cube.members) {
      if (!done[b]) {
        pre[b] = ball_preimage(ctx, idx, forest.balls[b]);
        done[b] = 1;
      }
      nd.support.insert(nd.support.end(), pre[b].begin(), pre[b].end());
    }
    t.nodes.push_back(std::move(nd));
  }
  build_martingale(t);
  return t;
}

MartingaleTree random_martingale_tree(int levels, int M, double eps0, double length,
                                      uint64_t seed) {
  if (levels < 1 || !(length > 0)) throw std::invalid_argument("need levels >= 1 and length > 0");
  MartingaleTree t;
  t.M = M;
  t.eps0 = eps0;
  t.J_M = martingale_J(M, eps0);
  t.length = length;
  Rng rng{seed};
  std::vector<int> depth;
  MartingaleNode root;
  root.support = {{0.0, length}};
  root.diam = length * rng.uni(0.3, 1.0);
  t.nodes.push_back(root);
  depth.push_back(0);
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    if (depth[i] + 1 >= levels) continue;
    const Interval iv = t.nodes[i].support.front();
    const int k = 1 + int(rng.next() % 3);
    // 2k+1 random cuts; the odd pieces become children.
    std::vector<double> cuts;
    for (int j = 0; j < 2 * k; ++j) cuts.push_back(rng.uni(iv.a, iv.b));
    std::sort(cuts.begin(), cuts.end());
    for (int j = 0; j < k; ++j) {
      MartingaleNode ch;
      ch.support = {{cuts[size_t(2 * j)], cuts[size_t(2 * j + 1)]}};
      ch.diam = (ch.support[0].b - ch.support[0].a) * rng.uni(0.3, 1.0);
      ch.parent = long(i);
      t.nodes[i].children.push_back(t.nodes.size());
      t.nodes.push_back(ch);
      depth.push_back(depth[i] + 1);
    }
  }
  build_martingale(t);
  return t;
}

}  // namespace heis
