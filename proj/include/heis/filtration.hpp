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

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "heis/core.hpp"
#include "heis/curves.hpp"
#include "heis/multires.hpp"

namespace heis {

// Arc domains live on the circle [0,T). Endpoints are stored reduced to [0,T); an arc with
// b <= a wraps through 0, and `full` marks the whole circle.
struct CArc {
  double a = 0.0;
  double b = 0.0;
  bool full = false;
};

double carc_span(const CArc& x, double T);
bool carc_contains(const CArc& outer, const CArc& inner, double T);
bool carc_intersect(const CArc& x, const CArc& y, double T);
// Arc with a possibly exceeding-T end, as the curve routines take it.
Arc carc_measure(const MetricCtx& ctx, const Curve& c, const CArc& x);

struct Interval {
  double a = 0.0;
  double b = 0.0;
};

// Planar index over curve edges.
class EdgeIndex {
 public:
  explicit EdgeIndex(const Curve& c);
  ~EdgeIndex();
  EdgeIndex(const EdgeIndex&) = delete;
  EdgeIndex& operator=(const EdgeIndex&) = delete;
  std::vector<size_t> edges_near(const Ball& b) const;
  const Curve& curve() const { return *curve_; }

 private:
  struct Impl;
  const Curve* curve_;
  Impl* impl_;
};

// gamma^{-1}(B) as sorted closed intervals in [0,T]; each edge meets a ball in one interval.
std::vector<Interval> ball_preimage(const MetricCtx& ctx, const EdgeIndex& idx, const Ball& b);

// Components of a union of intervals on the domain; touching intervals join, and on a
// closed curve a component through 0 wraps.
std::vector<CArc> interval_components(std::vector<Interval> iv, double T, bool closed);

// Per-ball preimage cache shared by every cube of a forest.
class PreimageCache {
 public:
  PreimageCache(const MetricCtx& ctx, const EdgeIndex& idx, const CubeForest& f);
  const std::vector<Interval>& of(size_t ball);

 private:
  const MetricCtx& ctx_;
  const EdgeIndex& idx_;
  const CubeForest& f_;
  std::vector<std::vector<Interval>> cache_;
  std::vector<char> done_;
};

// Lambda(Q(2B)): components of gamma^{-1}(Q) whose image meets the inner ball B.
std::vector<CArc> lambda_arcs(const MetricCtx& ctx, const EdgeIndex& idx, const CubeForest& f,
                              size_t cube, const Ball& inner, PreimageCache& cache);

struct PreArc {
  CArc dom;
  double diam = 0.0;
  size_t cube = 0;
};

struct Prefiltration {
  int J = 0;
  double L = 0.0;
  int m = 0;
  double T = 0.0;
  std::map<int, std::vector<PreArc>> levels;  // sorted by start in each level
  // For each cube of the source forest: (level, index) of its Lambda arcs.
  std::vector<std::vector<std::pair<int, size_t>>> cube_arcs;

  bool empty() const { return levels.empty(); }
  size_t size() const;
};

class PrefiltrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PrefiltrationAudit {
  size_t arcs = 0;
  size_t diam_violations = 0;      // (i)
  size_t disjoint_violations = 0;  // (ii)
  size_t nested_violations = 0;    // (iii)
  std::string first_failure;
  bool ok() const { return diam_violations + disjoint_violations + nested_violations == 0; }
};

// Relative slack on the diameter brackets; arc ends come from bisection.
constexpr double kDiamRelTol = 1e-9;

PrefiltrationAudit audit_prefiltration(const MetricCtx& ctx, const Curve& c,
                                       const Prefiltration& pre);

// Forest of doubled balls 2B; inner balls have radius inner_ratio * r(2B). The level of an
// arc is k with r(B) = L 2^{-kJ}, L = r(B) 2^{kJ} for the family's residue. Throws
// PrefiltrationError naming the failing pair when an invariant fails.
Prefiltration prefiltration_from_cubes(const MetricCtx& ctx, const EdgeIndex& idx,
                                       const CubeForest& forest, double inner_ratio = 0.5);

struct FArc {
  CArc dom;
  double diam = 0.0;
  double chord = 0.0;     // d(gamma(a), gamma(b))
  long parent = -1;
  long source = -1;       // index into the prefiltration level, or -1 for gap pieces
  double ext_left = 0.0;  // diameters of the merged extensions
  double ext_right = 0.0;
  std::vector<size_t> children;
};

struct Filtration {
  int J = 0;
  double delta = 0.0;
  double L = 0.0;
  int m = 0;
  double T = 0.0;
  std::vector<std::vector<FArc>> levels;  // levels[i] holds F_{m+i}, sorted by start
  std::vector<std::vector<long>> from_pre;  // per level: prefiltration index -> arc index

  int n_max() const { return m + int(levels.size()) - 1; }
  const std::vector<FArc>& level(int n) const { return levels.at(size_t(n - m)); }
  const FArc& arc(int n, size_t i) const { return level(n).at(i); }
  double unit(int n) const;  // L 2^{-nJ}
  size_t size() const;
};

// Requires J >= 10 and delta in (0,1). Gaps merge into the left neighbour when both sides
// qualify; oversized gaps split into pieces of diameter near L 2^{-nJ+2}, cut outside every
// finer prefiltration arc. extra_levels appends levels below the finest prefiltration level.
Filtration complete_filtration(const MetricCtx& ctx, const Curve& c, const Prefiltration& pre,
                               double delta, int extra_levels = 0);

struct FiltrationAudit {
  size_t arcs = 0;
  size_t p1 = 0, p2 = 0, p3 = 0, p4 = 0, p5 = 0, p6 = 0;
  size_t chord_sum = 0;
  double worst_chord_ratio = 0.0;  // max over n of sum chords / length
  std::string first_failure;
  bool ok() const { return p1 + p2 + p3 + p4 + p5 + p6 + chord_sum == 0; }
};

// Relative slack on the chord-sum bound.
constexpr double kChordRelTol = 1e-12;

FiltrationAudit audit_filtration(const MetricCtx& ctx, const Curve& c, const Prefiltration& pre,
                                 const Filtration& f);

// F_{tau,k}: indices into level n+k.
std::vector<size_t> children(const Filtration& f, int n, size_t i, int k);

// Index of the F_n arc extending prefiltration arc (n, pre_index).
size_t lambda_prime(const Filtration& f, int n, size_t pre_index);

// max over children of sup over L_{child} of d(z, L_tau); 0 when there are no children.
double d_tau(const MetricCtx& ctx, const Curve& c, const Filtration& f, int n, size_t i);
// Same with an explicit sample count per child segment and no refinement, for oracles.
double d_tau_grid(const MetricCtx& ctx, const Curve& c, const Filtration& f, int n, size_t i,
                  int samples);

struct TelescopeReport {
  double lhs = 0.0;        // beta(tau) diam(tau)
  std::vector<double> d;   // d_{tau_k}, k = 0..K-1
  double remainder = 0.0;  // max over F_{tau,K} of beta diam
  double tail_bound = 0.0; // 2 max diam over F_{tau,K}
  bool ok = true;
};
TelescopeReport telescope(const MetricCtx& ctx, const Curve& c, const Filtration& f, int n,
                          size_t i);

struct ModProp4Report {
  double lhs = 0.0;     // d_tau^4 / diam^3
  double excess = 0.0;  // sum of F_{tau,2} chords minus chord(tau)
  double allowance = 0.0;
  double log2_rhs = 0.0;
  bool applicable = false;  // tau has grandchildren
  bool ok = true;
};
// log2 of the constant 10^14 2^{4J+64} / eta^2.
double mod_prop4_log2_constant(int J, double eta);
ModProp4Report modified_prop4(const MetricCtx& ctx, const Curve& c, const Filtration& f, int n,
                              size_t i, double log2_C);

std::string filtration_json(const Filtration& f);

}  // namespace heis
