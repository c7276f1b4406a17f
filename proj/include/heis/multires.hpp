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
#include <limits>
#include <vector>

#include "heis/core.hpp"

namespace heis {

// X_n for n in [n_min, n_max]; entries index into the seed set K.
struct NetHierarchy {
  int n_min = 0;
  int n_max = -1;
  std::vector<std::vector<size_t>> X;

  const std::vector<size_t>& level(int n) const { return X.at(size_t(n - n_min)); }
  int levels() const { return n_max - n_min + 1; }
};

// Greedy insertion in input order; level n+1 starts from level n as a prefix.
NetHierarchy build_nets(const MetricCtx& ctx, const std::vector<Point>& K, int n_min, int n_max);

struct NetAudit {
  bool separated = true;
  bool covering = true;
  bool nested = true;
};
NetAudit audit_nets(const MetricCtx& ctx, const std::vector<Point>& K, const NetHierarchy& nets);

struct Ball {
  Point center;
  double radius = 0.0;
  int level = 0;
  size_t point = 0;  // index of the center in K
};

std::vector<Ball> multiresolution(const NetHierarchy& nets, const std::vector<Point>& K, double A);
std::vector<Ball> filter_G(const std::vector<Ball>& balls, double max_radius = 0.01);
// The first level whose radius A 2^{-n} drops below max_radius.
int first_G_level(double A, double max_radius = 0.01);

// Koranyi balls are treated as meeting when d(c1,c2) <= r1 + r2. The metric is not geodesic,
// so this is a superset of true intersection; every cube bound below uses the same test.
bool balls_intersect(const MetricCtx& ctx, const Ball& a, const Ball& b);
bool ball_contains(const MetricCtx& ctx, const Ball& b, const Point& p);
// Lower bound on the set distance d(B1, B2).
double ball_gap(const MetricCtx& ctx, const Ball& a, const Ball& b);
// Random point on the Koranyi sphere of the ball.
Point ball_boundary_point(const MetricCtx& ctx, const Ball& b, uint64_t& state);
// Max pairwise distance over boundary samples, including a horizontal antipodal pair.
double ball_diameter_sampled(const MetricCtx& ctx, const Ball& b, int samples, uint64_t seed);

struct FamilySplit {
  std::vector<std::vector<size_t>> families;  // indices into the input balls
  size_t D_prime = 0;
  int J = 0;
  double kappa = 0.0;
  double C = 0.0;
};

// Groups by scale index mod J, then colors each group so equal-radius balls of one family
// satisfy d(B1,B2) > kappa r, enforced through d(c1,c2) > (kappa + 2) r.
FamilySplit split_families(const MetricCtx& ctx, const std::vector<Ball>& balls, int J,
                           double kappa, double C);

struct FamilyAudit {
  bool partition = true;
  bool separated = true;
  bool radius_ratio = true;
};
FamilyAudit audit_families(const MetricCtx& ctx, const std::vector<Ball>& balls,
                           const FamilySplit& split);

struct Cube {
  size_t ball = 0;                // generating ball, an index into CubeForest::balls
  std::vector<size_t> members;    // sorted member ball indices, generator included
  long parent = -1;
  std::vector<size_t> children;
  double box[4] = {0, 0, 0, 0};   // planar bounding box of the members
};

struct CubeForest {
  std::vector<Ball> balls;
  std::vector<Cube> cubes;  // cubes[i] is generated by balls[i]
  int J = 0;
  double kappa = 0.0;

  bool contains(const MetricCtx& ctx, size_t cube, const Point& p) const;
  bool intersects(const MetricCtx& ctx, size_t c1, size_t c2) const;
  // Member-pair lower bound on d(Q1, Q2), capped at cap.
  double gap(const MetricCtx& ctx, size_t c1, size_t c2,
             double cap = std::numeric_limits<double>::infinity()) const;
  std::vector<size_t> roots() const;
};

// Fixed point of D_{i+1} = {B' : B' meets Q_i, r(B') <= r(B)}, Q = union of D_i.
CubeForest build_cubes(const MetricCtx& ctx, std::vector<Ball> family, int J, double kappa);

struct CubeAudit {
  size_t cubes = 0;
  size_t boundary_samples = 0;
  size_t prop1_violations = 0;
  size_t prop2_violations = 0;
  size_t prop3_violations = 0;
  size_t nested_pairs_checked = 0;
  size_t separated_pairs_checked = 0;
  double worst_prop1_ratio = 0.0;  // max d(center, x) / r(B) over members and samples
  bool ok() const { return prop1_violations + prop2_violations + prop3_violations == 0; }
};
CubeAudit audit_cubes(const MetricCtx& ctx, const CubeForest& forest, int samples_per_cube,
                      uint64_t seed);

// The balls lambda B, same centers and levels.
std::vector<Ball> enlarge_balls(const std::vector<Ball>& balls, double lambda);

struct FamilyForests {
  std::vector<Ball> balls;  // the input balls after enlargement
  FamilySplit split;
  std::vector<CubeForest> forests;  // one per family, same order as split.families
};

// Doubles the balls, splits them into families and builds each family's cube forest.
FamilyForests family_forests(const MetricCtx& ctx, const std::vector<Ball>& balls, int J,
                             double kappa, double C, double enlarge = 2.0);

}  // namespace heis
