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
#include <string>
#include <vector>

#include "heis/core.hpp"

namespace heis {

// Arclength-parametrized polyline. Consecutive samples are joined by the horizontal
// segments overline{p_k p_{k+1}}. A closed curve lives on a circle of circumference T and
// has an extra edge from the last sample back to the first; an open curve lives on [0,T]
// with T equal to the last parameter.
struct Curve {
  std::vector<double> t;
  std::vector<Point> p;
  std::vector<Point> inc;  // inc[k] = p[k]^{-1} p[k+1 mod n], one per edge
  double T = 0.0;
  bool closed = true;

  size_t size() const { return p.size(); }
  size_t num_edges() const { return inc.size(); }
  double edge_start(size_t k) const { return t[k]; }
  double edge_dt(size_t k) const;
  // Edge containing the domain parameter u (already reduced to [0,T]).
  size_t edge_at(double u) const;
  double wrap(double u) const;
  Point eval(double u) const;
  HorizontalSegment edge_segment(size_t k) const;

  // Builds increments from absolute samples.
  static Curve from_samples(std::vector<double> t, std::vector<Point> p, double T, bool closed);
  // Builds samples from a start point and exact increments; dt[k] is the parameter gap of edge k.
  static Curve from_increments(const Point& start, const std::vector<Point>& inc,
                               const std::vector<double>& dt, bool closed);
};

// Largest excess d(p_k, p_{k+1}) - (t_{k+1} - t_k) over all edges; <= 1e-9 for a valid curve.
double lipschitz_excess(const MetricCtx& ctx, const Curve& c);
void validate_curve(const MetricCtx& ctx, const Curve& c, double tol = 1e-9);

double curve_length(const MetricCtx& ctx, const Curve& c);

// Domain interval [a,b]; on a closed curve b may exceed T and the arc wraps.
struct Arc {
  double a = 0.0;
  double b = 0.0;
  double diam = 0.0;

  double span() const { return b - a; }
};

// Arc points expressed in the frame of gamma(a), which sits at the origin. The chain holds
// gamma(a), every sample strictly inside (a,b), and gamma(b), with their parameters.
struct ArcChain {
  std::vector<Point> q;
  std::vector<double> u;
};

ArcChain arc_chain(const Curve& c, double a, double b);

// gamma(a)^{-1} gamma(u) for any u in [a,b], built on one chain walk.
class ArcFrame {
 public:
  ArcFrame(const Curve& c, double a, double b) : ch_(arc_chain(c, a, b)) {}
  Point at(double u) const;
  const ArcChain& chain() const { return ch_; }

 private:
  ArcChain ch_;
};
double chain_diameter(const MetricCtx& ctx, const ArcChain& ch);
double arc_diameter(const MetricCtx& ctx, const Curve& c, double a, double b);
Arc make_arc(const MetricCtx& ctx, const Curve& c, double a, double b);

// L_tau in absolute coordinates: starts at gamma(a), heads toward gamma(b).
HorizontalSegment L_tau(const Curve& c, const Arc& arc);

constexpr int kBetaInteriorPoints = 8;

// sup over the chain samples and 8 interior points per segment of d(., L_tau), unnormalized.
double chain_beta_sup(const MetricCtx& ctx, const ArcChain& ch);
// Throws std::domain_error when diam(arc) == 0.
double beta_arc(const MetricCtx& ctx, const Curve& c, const Arc& arc);

using Planar = std::array<double, 2>;

// Discrete horizontal lift: p_{k+1} = p_k . (dx, dy, 0). Returns an open curve.
Curve lift_planar(const std::vector<Planar>& pts, double z0 = 0.0);

struct OscillatingCurve {
  Curve curve;
  std::vector<Planar> planar;
  double length_bound = 0.0;   // base_len * prod 1/cos(theta_k)
  bool flagged = false;        // q <= 1/2: no bounded-length guarantee
};

double oscillation_angle(double q, double c, int k);
// Stage k replaces each segment by a two-segment tent of half-angle c/k^q; apex side
// alternates segment by segment. The base segment starts split into base_pieces equal parts.
OscillatingCurve gen_oscillating(double q, double c, int stages, double base_len,
                                 int base_pieces = 1);

// Generators for the analysis corpus; all return open horizontal curves.
Curve gen_segment(double len);
Curve gen_lifted_circle(int n, double radius = 1.0);
Curve gen_lifted_square(double side = 1.0);
Curve gen_random_walk(int steps, double step_len, unsigned long long seed);

// Splits every edge into pieces with parameter gap <= max_dt; increments are split exactly
// along the horizontal direction.
Curve densify(const Curve& c, double max_dt);
// Out-and-back closure of an open curve: a closed curve of circumference 2T.
Curve close_by_retrace(const Curve& c);
Curve dilate_curve(const Curve& c, double lambda);
Curve translate_curve(const Point& g, const Curve& c);
double sample_diameter(const MetricCtx& ctx, const Curve& c);
// Translates gamma(0) to the origin and dilates to sample diameter 1; returns the factor.
Curve normalize_curve(const MetricCtx& ctx, const Curve& c, double* factor = nullptr);

void write_curve(const std::string& path, const Curve& c);
Curve read_curve(const MetricCtx& ctx, const std::string& path);

}  // namespace heis
