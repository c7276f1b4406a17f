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

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace heis {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool is_horizontal() const { return z == 0.0; }
  friend bool operator==(const Point&, const Point&) = default;
};

// Koranyi metric parameter. The triangle inequality holds for eta in (0,16].
struct MetricCtx {
  double eta = 1.0;

  explicit MetricCtx(double e = 1.0);
};

Point multiply(const Point& a, const Point& b);
Point inverse(const Point& p);
// Computes a^{-1} b without forming the inverse separately.
Point left_diff(const Point& a, const Point& b);

// Throws std::domain_error for lambda < 0 on a non-horizontal point.
Point dilate(const Point& p, double lambda);
Point rotate_z(const Point& p, double theta);

std::array<double, 2> project_pi(const Point& p);
Point project_pi_tilde(const Point& p);

double koranyi_norm(const MetricCtx& ctx, const Point& p);
double distance(const MetricCtx& ctx, const Point& a, const Point& b);

// L(t) = base . delta_t(cos(angle), sin(angle), 0)
struct HorizontalLine {
  Point base;
  double angle = 0.0;

  Point at(double t) const;
  // Line through a and the horizontal direction of a^{-1} b; angle 0 when degenerate.
  static HorizontalLine through(const Point& a, const Point& b);
};

// {a . delta_t(pi~(a^{-1} b)) : t in [0,1]}
struct HorizontalSegment {
  Point start;
  Point end_target;
  Point direction;  // pi~(start^{-1} end_target)

  Point eval(double t) const;
  Point end() const { return eval(1.0); }
  double length() const;
  bool degenerate() const { return direction.x == 0.0 && direction.y == 0.0; }
  // Unit-speed carrier; parameter s in [0, length()] maps to eval(s / length()).
  HorizontalLine carrier() const;
};

HorizontalSegment horizontal_segment(const Point& a, const Point& b);

constexpr double kDefaultLineTol = 1e-10;

// Bracketed ternary search over the quasi-convex map t -> d(p, L(t)).
double dist_point_to_line(const MetricCtx& ctx, const Point& p, const HorizontalLine& L,
                          double tol = kDefaultLineTol);
double dist_point_to_segment(const MetricCtx& ctx, const Point& p, const HorizontalSegment& s,
                             double tol = kDefaultLineTol);

// Closed-form variants. d(p, L(t))^4 is a convex quartic in t whose derivative is a
// depressed cubic with a single real root, so the minimizer is solved directly.
// Real root of s^3 + p s + q for p >= 0, polished by Newton steps.
double depressed_cubic_root(double p, double q);

struct LineFoot {
  double t = 0.0;
  double dist = 0.0;
};
LineFoot line_foot(const MetricCtx& ctx, const Point& p, const HorizontalLine& L);
// Restricted to t in [tmin, tmax].
LineFoot line_foot_clamped(const MetricCtx& ctx, const Point& p, const HorizontalLine& L,
                           double tmin, double tmax);
double dist_point_to_segment_fast(const MetricCtx& ctx, const Point& p,
                                  const HorizontalSegment& s);

}  // namespace heis
