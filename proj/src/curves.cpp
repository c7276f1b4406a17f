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

#include "heis/curves.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace heis {

double Curve::edge_dt(size_t k) const {
  if (k + 1 < t.size()) return t[k + 1] - t[k];
  return T - t.back();
}

size_t Curve::edge_at(double u) const {
  auto it = std::upper_bound(t.begin(), t.end(), u);
  size_t k = it == t.begin() ? 0 : size_t(it - t.begin()) - 1;
  return std::min(k, num_edges() - 1);
}

double Curve::wrap(double u) const {
  if (!closed) return std::clamp(u, 0.0, T);
  double w = std::fmod(u, T);
  if (w < 0) w += T;
  if (w >= T) w = 0.0;
  return w;
}

Point Curve::eval(double u) const {
  const double w = wrap(u);
  const size_t k = edge_at(w);
  const double dt = edge_dt(k);
  const double s = dt > 0 ? std::clamp((w - t[k]) / dt, 0.0, 1.0) : 0.0;
  return multiply(p[k], {s * inc[k].x, s * inc[k].y, 0.0});
}

HorizontalSegment Curve::edge_segment(size_t k) const {
  return {p[k], multiply(p[k], inc[k]), {inc[k].x, inc[k].y, 0.0}};
}

Curve Curve::from_samples(std::vector<double> tt, std::vector<Point> pp, double TT, bool cl) {
  if (pp.size() < 2 || tt.size() != pp.size())
    throw std::invalid_argument("curve needs at least two samples with parameters");
  for (size_t k = 1; k < tt.size(); ++k)
    if (!(tt[k] > tt[k - 1])) throw std::invalid_argument("curve parameters must increase");
  Curve c;
  c.closed = cl;
  c.T = cl ? TT : tt.back();
  if (cl && !(TT > tt.back())) throw std::invalid_argument("circumference must exceed last parameter");
  c.t = std::move(tt);
  c.p = std::move(pp);
  const size_t n = c.p.size();
  for (size_t k = 0; k + 1 < n; ++k) c.inc.push_back(left_diff(c.p[k], c.p[k + 1]));
  if (cl) c.inc.push_back(left_diff(c.p[n - 1], c.p[0]));
  return c;
}

Curve Curve::from_increments(const Point& start, const std::vector<Point>& inc,
                             const std::vector<double>& dt, bool cl) {
  if (inc.empty() || inc.size() != dt.size())
    throw std::invalid_argument("increments and gaps must match");
  Curve c;
  c.closed = cl;
  c.inc = inc;
  const size_t n = cl ? inc.size() : inc.size() + 1;
  if (n < 2) throw std::invalid_argument("curve needs at least two samples");
  c.p.resize(n);
  c.t.resize(n);
  c.p[0] = start;
  c.t[0] = 0.0;
  for (size_t k = 0; k + 1 < n; ++k) {
    if (!(dt[k] > 0)) throw std::invalid_argument("parameter gaps must be positive");
    c.p[k + 1] = multiply(c.p[k], inc[k]);
    c.t[k + 1] = c.t[k] + dt[k];
  }
  c.T = cl ? c.t.back() + dt.back() : c.t.back();
  if (cl && !(dt.back() > 0)) throw std::invalid_argument("parameter gaps must be positive");
  return c;
}

double lipschitz_excess(const MetricCtx& ctx, const Curve& c) {
  double worst = -1e300;
  for (size_t k = 0; k < c.num_edges(); ++k)
    worst = std::max(worst, koranyi_norm(ctx, c.inc[k]) - c.edge_dt(k));
  return worst;
}

void validate_curve(const MetricCtx& ctx, const Curve& c, double tol) {
  const double ex = lipschitz_excess(ctx, c);
  if (ex > tol) {
    std::ostringstream os;
    os << "curve is not 1-Lipschitz: an edge exceeds its parameter gap by " << ex;
    throw std::runtime_error(os.str());
  }
}

double curve_length(const MetricCtx& ctx, const Curve& c) {
  double s = 0.0;
  for (const auto& d : c.inc) s += koranyi_norm(ctx, d);
  return s;
}

ArcChain arc_chain(const Curve& c, double a, double b) {
  if (b < a) throw std::invalid_argument("arc end precedes start");
  if (c.closed) {
    const double a0 = c.wrap(a);
    b = a0 + std::min(b - a, c.T);
    a = a0;
  } else {
    a = std::clamp(a, 0.0, c.T);
    b = std::clamp(b, a, c.T);
  }
  ArcChain ch;
  ch.q.push_back({});
  ch.u.push_back(a);
  const size_t E = c.num_edges();
  const size_t k = c.edge_at(a);
  double start = c.t[k];
  double dt = c.edge_dt(k);
  const double sa = dt > 0 ? (a - start) / dt : 0.0;
  size_t e = k;
  Point cur{};
  for (size_t guard = 0; guard <= E + 1; ++guard) {
    const double end = start + dt;
    if (!(end < b)) break;
    const Point& d = c.inc[e];
    const Point next = e == k ? Point{(1 - sa) * d.x, (1 - sa) * d.y, d.z} : multiply(cur, d);
    ch.q.push_back(next);
    ch.u.push_back(end);
    cur = next;
    e = (e + 1) % E;
    start = end;
    dt = c.edge_dt(e);
  }
  const double sb = dt > 0 ? std::clamp((b - start) / dt, 0.0, 1.0) : 0.0;
  const Point& d = c.inc[e];
  if (ch.q.size() == 1)
    ch.q.push_back({(sb - sa) * d.x, (sb - sa) * d.y, 0.0});
  else
    ch.q.push_back(multiply(cur, {sb * d.x, sb * d.y, 0.0}));
  ch.u.push_back(b);
  return ch;
}

Point ArcFrame::at(double u) const {
  const auto& us = ch_.u;
  if (u <= us.front()) return ch_.q.front();
  if (u >= us.back()) return ch_.q.back();
  const size_t k = size_t(std::upper_bound(us.begin(), us.end(), u) - us.begin()) - 1;
  const double span = us[k + 1] - us[k];
  if (!(span > 0)) return ch_.q[k];
  const double f = (u - us[k]) / span;
  const Point d = left_diff(ch_.q[k], ch_.q[k + 1]);
  return multiply(ch_.q[k], {f * d.x, f * d.y, 0.0});
}

namespace {

double brute_diameter(const MetricCtx& ctx, const std::vector<Point>& q) {
  double D = 0.0;
  for (size_t i = 0; i < q.size(); ++i)
    for (size_t j = i + 1; j < q.size(); ++j) D = std::max(D, distance(ctx, q[i], q[j]));
  return D;
}

// Exact sample diameter with block pruning; needs the triangle inequality (eta <= 16).
double pruned_diameter(const MetricCtx& ctx, const std::vector<Point>& q) {
  const size_t n = q.size();
  if (n <= 256 || ctx.eta > 16.0) return brute_diameter(ctx, q);
  size_t i1 = 0;
  double D = 0.0;
  for (int sweep = 0; sweep < 3; ++sweep) {
    size_t far = i1;
    double best = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double d = distance(ctx, q[i1], q[i]);
      if (d > best) best = d, far = i;
    }
    D = std::max(D, best);
    i1 = far;
  }
  const size_t B = 32;
  const size_t nb = (n + B - 1) / B;
  std::vector<size_t> ctr(nb);
  std::vector<double> rho(nb, 0.0);
  for (size_t b = 0; b < nb; ++b) {
    const size_t lo = b * B, hi = std::min(n, lo + B);
    ctr[b] = (lo + hi) / 2;
    for (size_t i = lo; i < hi; ++i) rho[b] = std::max(rho[b], distance(ctx, q[ctr[b]], q[i]));
  }
  for (size_t b1 = 0; b1 < nb; ++b1) {
    for (size_t b2 = b1; b2 < nb; ++b2) {
      const double ub = (distance(ctx, q[ctr[b1]], q[ctr[b2]]) + rho[b1] + rho[b2]) * (1 + 1e-12);
      if (ub <= D) continue;
      const size_t lo1 = b1 * B, hi1 = std::min(n, lo1 + B);
      const size_t lo2 = b2 * B, hi2 = std::min(n, lo2 + B);
      for (size_t i = lo1; i < hi1; ++i)
        for (size_t j = (b1 == b2 ? i + 1 : lo2); j < hi2; ++j)
          D = std::max(D, distance(ctx, q[i], q[j]));
    }
  }
  return D;
}

}  // namespace

double chain_diameter(const MetricCtx& ctx, const ArcChain& ch) {
  return pruned_diameter(ctx, ch.q);
}

double arc_diameter(const MetricCtx& ctx, const Curve& c, double a, double b) {
  return chain_diameter(ctx, arc_chain(c, a, b));
}

Arc make_arc(const MetricCtx& ctx, const Curve& c, double a, double b) {
  return {a, b, arc_diameter(ctx, c, a, b)};
}

HorizontalSegment L_tau(const Curve& c, const Arc& arc) {
  return horizontal_segment(c.eval(arc.a), c.eval(arc.b));
}

double chain_beta_sup(const MetricCtx& ctx, const ArcChain& ch) {
  const auto L = horizontal_segment(ch.q.front(), ch.q.back());
  double sup = 0.0;
  for (size_t i = 0; i < ch.q.size(); ++i) {
    sup = std::max(sup, dist_point_to_segment_fast(ctx, ch.q[i], L));
    if (i + 1 == ch.q.size()) break;
    const auto S = horizontal_segment(ch.q[i], ch.q[i + 1]);
    for (int j = 1; j <= kBetaInteriorPoints; ++j)
      sup = std::max(sup, dist_point_to_segment_fast(
                              ctx, S.eval(double(j) / (kBetaInteriorPoints + 1)), L));
  }
  return sup;
}

double beta_arc(const MetricCtx& ctx, const Curve& c, const Arc& arc) {
  const ArcChain ch = arc_chain(c, arc.a, arc.b);
  const double diam = arc.diam > 0 ? arc.diam : chain_diameter(ctx, ch);
  if (!(diam > 0)) throw std::domain_error("beta of an arc with zero diameter");
  return chain_beta_sup(ctx, ch) / diam;
}

Curve lift_planar(const std::vector<Planar>& pts, double z0) {
  if (pts.size() < 2) throw std::invalid_argument("lift needs at least two planar points");
  std::vector<Point> inc;
  std::vector<double> dt;
  for (size_t k = 0; k + 1 < pts.size(); ++k) {
    const double dx = pts[k + 1][0] - pts[k][0], dy = pts[k + 1][1] - pts[k][1];
    const double len = std::hypot(dx, dy);
    if (len == 0.0) continue;
    inc.push_back({dx, dy, 0.0});
    dt.push_back(len);
  }
  if (inc.empty()) throw std::invalid_argument("lift of a constant polyline");
  return Curve::from_increments({pts[0][0], pts[0][1], z0}, inc, dt, false);
}

double oscillation_angle(double q, double c, int k) { return c / std::pow(double(k), q); }

OscillatingCurve gen_oscillating(double q, double c, int stages, double base_len,
                                 int base_pieces) {
  if (stages < 0) throw std::invalid_argument("stages must be non-negative");
  if (!(base_len > 0)) throw std::invalid_argument("base length must be positive");
  if (base_pieces < 1) throw std::invalid_argument("base_pieces must be positive");
  OscillatingCurve out;
  out.flagged = !(q > 0.5);
  std::vector<Planar> pts;
  for (int i = 0; i <= base_pieces; ++i) pts.push_back({base_len * i / base_pieces, 0.0});
  double bound = base_len;
  for (int k = 1; k <= stages; ++k) {
    const double th = oscillation_angle(q, c, k);
    const double cs = std::cos(th), sn = std::sin(th);
    std::vector<Planar> next;
    next.reserve(2 * pts.size());
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
      const double dx = pts[i + 1][0] - pts[i][0], dy = pts[i + 1][1] - pts[i][1];
      const double sg = (i % 2 == 0) ? 1.0 : -1.0;
      const double hx = 0.5 * dx / cs, hy = 0.5 * dy / cs;
      next.push_back(pts[i]);
      next.push_back({pts[i][0] + cs * hx - sg * sn * hy, pts[i][1] + sg * sn * hx + cs * hy});
    }
    next.push_back(pts.back());
    pts.swap(next);
    bound /= cs;
  }
  out.length_bound = bound;
  out.curve = lift_planar(pts);
  out.planar = std::move(pts);
  return out;
}

Curve gen_segment(double len) { return lift_planar({{0.0, 0.0}, {len, 0.0}}); }

Curve gen_lifted_circle(int n, double radius) {
  std::vector<Planar> pts;
  for (int k = 0; k <= n; ++k) {
    const double a = 2 * std::numbers::pi * k / n;
    pts.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  pts.back() = pts.front();
  return lift_planar(pts);
}

Curve gen_lifted_square(double side) {
  return lift_planar({{0, 0}, {side, 0}, {side, side}, {0, side}, {0, 0}});
}

Curve gen_random_walk(int steps, double step_len, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::vector<Planar> pts{{0.0, 0.0}};
  for (int i = 0; i < steps; ++i) {
    const double a = ang(rng);
    pts.push_back({pts.back()[0] + step_len * std::cos(a), pts.back()[1] + step_len * std::sin(a)});
  }
  return lift_planar(pts);
}

Curve densify(const Curve& c, double max_dt) {
  if (!(max_dt > 0)) throw std::invalid_argument("densify step must be positive");
  std::vector<Point> inc;
  std::vector<double> dt;
  std::vector<Point> pts;
  for (size_t k = 0; k < c.num_edges(); ++k) {
    const double g = c.edge_dt(k);
    const Point& d = c.inc[k];
    const size_t m = std::max<size_t>(1, size_t(std::ceil(g / max_dt)));
    for (size_t j = 0; j < m; ++j) {
      const double f = 1.0 / double(m);
      inc.push_back({d.x * f, d.y * f, j + 1 == m ? d.z : 0.0});
      dt.push_back(g * f);
      pts.push_back(j == 0 ? c.p[k] : multiply(c.p[k], {d.x * j * f, d.y * j * f, 0.0}));
    }
  }
  if (!c.closed) pts.push_back(c.p.back());
  Curve out = Curve::from_increments(c.p[0], inc, dt, c.closed);
  out.p = std::move(pts);
  return out;
}

Curve close_by_retrace(const Curve& c) {
  if (c.closed) return c;
  std::vector<Point> inc = c.inc;
  std::vector<double> dt;
  for (size_t k = 0; k < c.num_edges(); ++k) dt.push_back(c.edge_dt(k));
  for (size_t k = c.num_edges(); k-- > 0;) {
    inc.push_back(inverse(c.inc[k]));
    dt.push_back(c.edge_dt(k));
  }
  Curve out = Curve::from_increments(c.p[0], inc, dt, true);
  for (size_t k = 0; k < c.size(); ++k) out.p[k] = c.p[k];
  for (size_t k = 1; k + 1 < c.size(); ++k) out.p[out.size() - k] = c.p[k];
  return out;
}

Curve dilate_curve(const Curve& c, double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("curve dilation needs lambda > 0");
  Curve out = c;
  for (auto& u : out.t) u *= lambda;
  out.T *= lambda;
  for (auto& q : out.p) q = dilate(q, lambda);
  for (auto& q : out.inc) q = dilate(q, lambda);
  return out;
}

Curve translate_curve(const Point& g, const Curve& c) {
  Curve out = c;
  for (auto& q : out.p) q = multiply(g, q);
  return out;
}

double sample_diameter(const MetricCtx& ctx, const Curve& c) {
  return pruned_diameter(ctx, c.p);
}

Curve normalize_curve(const MetricCtx& ctx, const Curve& c, double* factor) {
  Curve out = translate_curve(inverse(c.p[0]), c);
  out.p[0] = {};
  const double D = sample_diameter(ctx, out);
  if (!(D > 0)) throw std::domain_error("cannot normalize a curve of zero diameter");
  if (factor) *factor = 1.0 / D;
  return dilate_curve(out, 1.0 / D);
}

void write_curve(const std::string& path, const Curve& c) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  std::fprintf(f, "T=%.17g%s\n", c.T, c.closed ? "" : " open");
  for (size_t k = 0; k < c.size(); ++k)
    std::fprintf(f, "%.17g %.17g %.17g %.17g\n", c.t[k], c.p[k].x, c.p[k].y, c.p[k].z);
  if (std::fclose(f) != 0) throw std::runtime_error("write failed for " + path);
}

Curve read_curve(const MetricCtx& ctx, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("T=", 0) != 0)
    throw std::runtime_error(path + ": first line must be T=<circumference>");
  std::istringstream head(line.substr(2));
  double T = 0.0;
  std::string flag;
  if (!(head >> T)) throw std::runtime_error(path + ": bad circumference");
  head >> flag;
  const bool closed = flag != "open";
  std::vector<double> ts;
  std::vector<Point> ps;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double u, x, y, z;
    if (!(ls >> u >> x >> y >> z))
      throw std::runtime_error(path + ": malformed sample on line " + std::to_string(lineno));
    ts.push_back(u);
    ps.push_back({x, y, z});
  }
  Curve c = Curve::from_samples(std::move(ts), std::move(ps), T, closed);
  validate_curve(ctx, c);
  return c;
}

}  // namespace heis
