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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "heis/core.hpp"
#include "heis/curves.hpp"
#include "heis/filtration.hpp"
#include "heis/multires.hpp"

namespace heis {

// A stated hypothesis of an inequality does not hold for the given input.
class HypothesisError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// ---- curvature inequality for four points ----

struct CurvatureConfig {
  double epsilon = 0.05;
  double eta = 0.0;  // must lie in (0, (epsilon/10)^10)
  long samples = 100000;
  uint64_t seed = 1;

  // Throws std::invalid_argument when epsilon or eta is out of range.
  void validate() const;
  static CurvatureConfig with_default_eta(double epsilon, long samples, uint64_t seed);
};

double curvature_lhs(const MetricCtx& ctx, const Point& p1, const Point& p2, const Point& p3,
                     const Point& p4);

// d(p, {p1,p4}) >= epsilon d(p1,p4) for p = p2 and p = p3.
bool separation_holds(const MetricCtx& ctx, double epsilon, const Point& p1, const Point& p2,
                      const Point& p3, const Point& p4);

// sup over a in S of d(a, target), S and target horizontal segments.
double segment_deviation_sup(const MetricCtx& ctx, const HorizontalSegment& S,
                             const HorizontalSegment& target, double tol = 1e-10);

// Throws HypothesisError when the separation condition fails.
double curvature_rhs(const CurvatureConfig& cfg, const Point& p1, const Point& p2,
                     const Point& p3, const Point& p4);

enum class Regime { Flat = 0, Vertical = 1, FarVertical = 2 };
const char* regime_name(Regime r);

struct Prop4Witness {
  Point p[4];
  Regime regime = Regime::Flat;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct Prop4Report {
  CurvatureConfig config;
  long samples = 0;
  long rejected = 0;
  long violations = 0;
  long per_regime[3] = {0, 0, 0};
  double min_slack = 0.0;      // min over samples of (lhs - rhs) / diam
  double max_rhs_ratio = 0.0;  // max over samples of rhs / lhs where lhs > 0
  std::vector<Prop4Witness> witnesses;  // violations first, then the tightest samples; <= 10

  std::string json() const;
};

// Floating slack: a sample counts as a violation when lhs - rhs < -kProp4RelTol * diam.
constexpr double kProp4RelTol = 1e-12;

// Draws accepted configurations in the ratio 2:2:1 over the three regimes.
Prop4Report verify_prop4(const CurvatureConfig& cfg);
// One configuration of the given regime, rejection-sampled against the separation condition.
void sample_configuration(const CurvatureConfig& cfg, Regime r, uint64_t& state, Point out[4],
                          long* rejected = nullptr);

// ---- helper lemmas ----

constexpr double kLemmaSlack = 1e-12;

// Throws HypothesisError unless p >= 1, a, b > 0 and b >= 2^p a.
bool check_concave_power(double p, double a, double b);
// Throws HypothesisError unless alpha >= 1/2, d(a,c) > 0 and max{d(a,b),d(b,c)} <= alpha d(a,c).
bool check_power_curvature(const MetricCtx& ctx, const Point& a, const Point& b, const Point& c,
                           double alpha);

struct LemmaReport {
  long trials = 0;
  long violations = 0;
  double min_slack = 0.0;  // relative
};
LemmaReport verify_concave_power(long trials, uint64_t seed);
LemmaReport verify_power_curvature(const MetricCtx& ctx, long trials, uint64_t seed);

// ---- ball beta numbers ----

// A horizontal line in the frame of a center point: planar foot (-s sin th, s cos th), height h
// above the foot, direction (cos th, sin th).
struct LineParams {
  double theta = 0.0;
  double s = 0.0;
  double h = 0.0;
};
HorizontalLine line_from_params(const LineParams& lp);
LineParams params_from_line(const HorizontalLine& L);

// max_i d(q_i, L) for points already in the center frame.
double line_sup(const MetricCtx& ctx, const std::vector<Point>& q, const HorizontalLine& L);

struct BetaOptions {
  int starts = 4;         // local searches from the best seed lines
  int seed_points = 6;    // extreme points whose pairs seed lines
  int max_iter = 800;     // simplex iterations per search
  double tol = 1e-11;     // simplex size, relative to the point cloud
  size_t subset = 64;     // larger clouds are fitted on an active subset
  static BetaOptions fast();
};

struct BetaResult {
  double beta = 0.0;
  double sup = 0.0;   // unnormalized minimax distance
  double diam = 0.0;  // diam(B) = 2r
  LineParams line;    // in the center frame
  size_t points = 0;
  long evals = 0;
};

// Points of K inside B, in absolute coordinates.
std::vector<Point> points_in_ball(const MetricCtx& ctx, const std::vector<Point>& K,
                                  const Ball& B);
// Gamma intersect B sampled: curve vertices in B plus edge points spaced <= spacing.
std::vector<Point> curve_points_in_ball(const MetricCtx& ctx, const Curve& c, const Ball& B,
                                        double spacing);
std::vector<Point> curve_points_in_ball(const MetricCtx& ctx, const EdgeIndex& idx,
                                        const Ball& B, double spacing);

// beta_K(B) over the points of K inside B. diam(B) = 2r, exact for eta <= 16. Throws
// std::domain_error when K misses B.
BetaResult beta_ball(const MetricCtx& ctx, const std::vector<Point>& K, const Ball& B,
                     const BetaOptions& opt = {});
// Same for points already known to lie in B.
BetaResult beta_of_points(const MetricCtx& ctx, const std::vector<Point>& pts, const Ball& B,
                          const BetaOptions& opt = {});
// Brute-force oracle: grid^3 lines over every line within 2r of the center, then zooming
// local grids from the best few cells.
BetaResult beta_ball_grid(const MetricCtx& ctx, const std::vector<Point>& K, const Ball& B,
                          int grid = 50);

// ---- flat and non-flat balls ----

enum class Flatness { Flat, NonFlat };

struct BallClass {
  Ball ball;
  double beta_gamma = 0.0;
  Flatness cls = Flatness::Flat;
  long witness_level = -1;  // filtration level and index of the witness arc
  long witness_index = -1;
  double witness_beta = 0.0;
  double max_arc_beta = 0.0;
};

// NonFlat iff some arc beta >= eps0 * beta_gamma; beta_gamma = 0 counts as Flat.
BallClass classify_betas(const Ball& B, double beta_gamma, const std::vector<double>& arc_betas,
                         double eps0);
// beta of a filtration arc; 0 when the arc has zero diameter.
double filtration_arc_beta(const MetricCtx& ctx, const Curve& c, const FArc& a);
// Lambda'(Q) for a cube of the forest behind pre: the F arcs extending its Lambda arcs.
std::vector<std::pair<int, size_t>> lambda_prime_arcs(const Prefiltration& pre,
                                                      const Filtration& f, size_t cube);
BallClass classify_ball(const MetricCtx& ctx, const Curve& c, const Prefiltration& pre,
                        const Filtration& f, size_t cube, const Ball& B, double beta_gamma,
                        double eps0);

// ---- arc lemmas ----

struct Lemma8Report {
  double beta_diam = 0.0;  // sup over the arc of d(gamma(t), L_tau)
  double sup_L = 0.0;      // sup over L_tau of d(x, tau)
  double end_gap = 0.0;    // d(end of L_tau, gamma(b))
  double diam = 0.0;
  double slack = 0.0;      // beta_diam - sup_L
  bool end_ok = true;      // end_gap <= beta_diam (+ floating slack)
};
// Refined sups: samples plus golden search wherever the 1-Lipschitz bound leaves room.
Lemma8Report check_lemma8(const MetricCtx& ctx, const Curve& c, const Arc& arc);
// Plain sampling with n points on L_tau and n points per curve edge.
Lemma8Report check_lemma8_grid(const MetricCtx& ctx, const Curve& c, const Arc& arc, int n);

struct FlatSet {
  std::vector<Point> points;  // sampled images of tau~ and xi-check inside 2B
  Arc tau_tilde;
  Arc xi_check;
  double h = 0.0;
  double tau_tilde_diam = 0.0;
  double xi_check_diam = 0.0;
};
// Builds E for a flat ball B of radius r: tau_prime is the Lambda' arc through the center of
// B, xi the other Lambda arc. h must satisfy beta(tau') diam(tau') < h < r/10. Throws
// HypothesisError when no connecting sub-arc exists.
FlatSet assemble_flat_set(const MetricCtx& ctx, const Curve& c, const Ball& B,
                          const Arc& tau_prime, const Arc& xi, double h, double spacing);

struct FlatExcessReport {
  double sum = 0.0;       // sum of covering diameters
  double required = 0.0;  // 4r + eps0 beta diam(B)
  double cap = 0.0;       // covering diameters must stay below this
  bool covered = true;
  bool capped = true;
  bool holds = false;
};
// Throws HypothesisError when the covering misses E or a ball breaks the diameter cap.
FlatExcessReport check_flat_excess(const MetricCtx& ctx, const Ball& B, double beta_gamma,
                                   double eps0, const std::vector<Point>& E,
                                   const std::vector<Ball>& covering);

// ---- geometric martingale ----

struct MartingaleNode {
  double diam = 0.0;
  std::vector<Interval> support;  // disjoint parameter intervals of Q on the curve domain
  long parent = -1;
  std::vector<size_t> children;
};

struct MartingaleTree {
  std::vector<MartingaleNode> nodes;  // parents precede children
  int M = 0;
  int J_M = 0;
  double eps0 = 0.0;
  double length = 0.0;  // H^1 surrogate of the whole curve

  // Derived by build_martingale.
  std::vector<double> h1;         // H^1 of each node's support
  std::vector<double> remainder;  // H^1 of R_Q
  std::vector<double> s_prime;    // H^1(R_Q) + sum of child diameters
  std::vector<double> g;          // sum over ancestors Q (and itself) of w_Q(node)

  std::vector<size_t> roots() const;
};

class DecompositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// J_M: smallest integer larger than M - log2(10 eps0) + 10.
int martingale_J(int M, double eps0);

// Checks the chop-up (children inside the parent, pairwise disjoint; throws
// DecompositionError otherwise) and fills the derived arrays.
void build_martingale(MartingaleTree& t);

// Mass that w_Q puts on each node of Q's subtree, Q first.
std::vector<std::pair<size_t, double>> martingale_masses(const MartingaleTree& t, size_t q);
// Sum over Q of w_Q(x) at domain parameter u; 0 outside every support.
double martingale_density(const MartingaleTree& t, double u);

struct MartingaleReport {
  size_t nodes = 0;
  size_t prop_i = 0;         // nodes whose integral of w_Q misses diam(Q)
  size_t prop_iii = 0;       // mass placed outside the support of Q
  size_t conservation = 0;   // nodes where mass in != mass to children + remainder
  size_t chop_ratio_ok = 0;  // nodes with diam / s' <= q
  size_t density_samples = 0;
  double max_density = 0.0;
  double density_bound = 0.0;  // (10/eps0) 2^M
  double q = 0.0;              // 1 / (1 + c0 2^{-M}), c0 = eps0/10
  double sum_diam = 0.0;
  double sum_bound = 0.0;  // (10/eps0) 2^M length
  bool ok() const;
};

MartingaleReport verify_martingale(const MartingaleTree& t, size_t density_samples, uint64_t seed);

// Tree over one cube forest: supports are gamma^{-1}(Q), diam(Q) is bounded by
// (1 + 2^{-J+2}) diam of the generating ball.
MartingaleTree martingale_from_cubes(const MetricCtx& ctx, const Curve& c, const EdgeIndex& idx,
                                     const CubeForest& forest, int M, double eps0);
// Random tree with `levels` levels on [0, length], children nested and disjoint.
MartingaleTree random_martingale_tree(int levels, int M, double eps0, double length,
                                      uint64_t seed);

}  // namespace heis
