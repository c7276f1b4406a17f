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

#include "heis/core.hpp"

#include <algorithm>
#include <limits>

namespace heis {

MetricCtx::MetricCtx(double e) : eta(e) {
  if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("eta must be positive");
}

Point multiply(const Point& a, const Point& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z + 0.5 * (a.x * b.y - b.x * a.y)};
}

Point inverse(const Point& p) { return {-p.x, -p.y, -p.z}; }

Point left_diff(const Point& a, const Point& b) {
  // Area term written through the differences, so nearby points do not cancel.
  const double dx = b.x - a.x, dy = b.y - a.y;
  return {dx, dy, (b.z - a.z) + 0.5 * (a.y * dx - a.x * dy)};
}

Point dilate(const Point& p, double lambda) {
  if (lambda < 0.0 && p.z != 0.0)
    throw std::domain_error("negative dilation of a non-horizontal point");
  return {lambda * p.x, lambda * p.y, lambda * lambda * p.z};
}

Point rotate_z(const Point& p, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

std::array<double, 2> project_pi(const Point& p) { return {p.x, p.y}; }

Point project_pi_tilde(const Point& p) { return {p.x, p.y, 0.0}; }

double koranyi_norm(const MetricCtx& ctx, const Point& p) {
  const double r2 = p.x * p.x + p.y * p.y;
  return std::sqrt(std::sqrt(r2 * r2 + ctx.eta * p.z * p.z));
}

double distance(const MetricCtx& ctx, const Point& a, const Point& b) {
  return koranyi_norm(ctx, left_diff(a, b));
}

Point HorizontalLine::at(double t) const {
  return multiply(base, {t * std::cos(angle), t * std::sin(angle), 0.0});
}

HorizontalLine HorizontalLine::through(const Point& a, const Point& b) {
  const Point h = left_diff(a, b);
  const double ang = (h.x == 0.0 && h.y == 0.0) ? 0.0 : std::atan2(h.y, h.x);
  return {a, ang};
}

Point HorizontalSegment::eval(double t) const {
  return multiply(start, {t * direction.x, t * direction.y, 0.0});
}

double HorizontalSegment::length() const { return std::hypot(direction.x, direction.y); }

HorizontalLine HorizontalSegment::carrier() const {
  const double ang = degenerate() ? 0.0 : std::atan2(direction.y, direction.x);
  return {start, ang};
}

HorizontalSegment horizontal_segment(const Point& a, const Point& b) {
  return {a, b, project_pi_tilde(left_diff(a, b))};
}

namespace {

// p^{-1} L(t) written as (hx + t ux, hy + t uy, hz + c t).
struct LineFrame {
  double hx, hy, hz, ux, uy, c;

  LineFrame(const Point& p, const HorizontalLine& L) {
    const Point h = left_diff(p, L.base);
    hx = h.x;
    hy = h.y;
    hz = h.z;
    ux = std::cos(L.angle);
    uy = std::sin(L.angle);
    c = 0.5 * (hx * uy - hy * ux);
  }

  double dist(const MetricCtx& ctx, double t) const {
    return koranyi_norm(ctx, {hx + t * ux, hy + t * uy, hz + c * t});
  }

  double foot_param() const { return -(hx * ux + hy * uy); }
};

double golden_min(const LineFrame& f, const MetricCtx& ctx, double lo, double hi, double tol,
                  double* arg) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f.dist(ctx, x1), f2 = f.dist(ctx, x2);
  for (int it = 0; it < 400 && b - a > tol; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f.dist(ctx, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f.dist(ctx, x2);
    }
  }
  double best = 0.5 * (a + b);
  double fb = f.dist(ctx, best);
  for (double t : {lo, hi}) {
    const double ft = f.dist(ctx, t);
    if (ft < fb) {
      fb = ft;
      best = t;
    }
  }
  if (arg) *arg = best;
  return fb;
}

}  // namespace

double depressed_cubic_root(double p, double q) {
  if (q == 0.0) return 0.0;
  const double disc = 0.25 * q * q + p * p * p / 27.0;
  const double w = std::cbrt(0.5 * std::fabs(q) + std::sqrt(disc));
  double s = w > 0.0 ? -std::copysign(w - p / (3.0 * w), q) : 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = 3.0 * s * s + p;
    if (!(d > 0.0)) break;
    const double step = (s * s * s + p * s + q) / d;
    if (!std::isfinite(step)) break;
    s -= step;
  }
  return s;
}

double dist_point_to_line(const MetricCtx& ctx, const Point& p, const HorizontalLine& L,
                          double tol) {
  const LineFrame f(p, L);
  const double d0 = f.dist(ctx, 0.0);
  if (d0 == 0.0) return 0.0;
  const double t0 = f.foot_param();
  const double fc = f.dist(ctx, t0);
  double half = 2.0 * d0;
  double lo = t0 - half, hi = t0 + half;
  for (int i = 0; i < 80 && f.dist(ctx, lo) <= fc; ++i) lo = t0 - 2.0 * (t0 - lo);
  for (int i = 0; i < 80 && f.dist(ctx, hi) <= fc; ++i) hi = t0 + 2.0 * (hi - t0);
  return std::min(fc, golden_min(f, ctx, lo, hi, tol, nullptr));
}

double dist_point_to_segment(const MetricCtx& ctx, const Point& p, const HorizontalSegment& s,
                             double tol) {
  if (s.degenerate()) return distance(ctx, p, s.start);
  const LineFrame f(p, s.carrier());
  return golden_min(f, ctx, 0.0, s.length(), tol, nullptr);
}

LineFoot line_foot(const MetricCtx& ctx, const Point& p, const HorizontalLine& L) {
  const LineFrame f(p, L);
  const double a = -f.foot_param();
  const double m = 4.0 * f.c * f.c;
  const double e = f.hz - f.c * a;
  const double pc = m + 0.5 * ctx.eta * f.c * f.c;
  const double qc = 0.5 * ctx.eta * f.c * e;
  const double t = depressed_cubic_root(pc, qc) - a;
  return {t, f.dist(ctx, t)};
}

LineFoot line_foot_clamped(const MetricCtx& ctx, const Point& p, const HorizontalLine& L,
                           double tmin, double tmax) {
  LineFoot lf = line_foot(ctx, p, L);
  if (lf.t < tmin || lf.t > tmax) {
    lf.t = std::clamp(lf.t, tmin, tmax);
    lf.dist = LineFrame(p, L).dist(ctx, lf.t);
  }
  return lf;
}

double dist_point_to_segment_fast(const MetricCtx& ctx, const Point& p,
                                  const HorizontalSegment& s) {
  if (s.degenerate()) return distance(ctx, p, s.start);
  return line_foot_clamped(ctx, p, s.carrier(), 0.0, s.length()).dist;
}

}  // namespace heis
