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

#include "heis/multires.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

namespace heis {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using PBox = bg::model::box<bg::model::point<double, 2, bg::cs::cartesian>>;
using PEntry = std::pair<PBox, size_t>;
using PTree = bgi::rtree<PEntry, bgi::rstar<16>>;

PBox make_box(double x0, double y0, double x1, double y1) {
  return PBox({x0, y0}, {x1, y1});
}

PBox ball_box(const Ball& b, double pad = 0.0) {
  const double r = b.radius + pad;
  return make_box(b.center.x - r, b.center.y - r, b.center.x + r, b.center.y + r);
}

// Uniform planar hash used while nets grow. The planar projection is 1-Lipschitz,
// so a point within s of q lies in one of the 9 cells around q.
class PlanarGrid {
 public:
  explicit PlanarGrid(double cell) : cell_(cell) {}

  template <class F>
  bool any_near(double x, double y, F&& pred) const {
    const long cx = cell_of(x), cy = cell_of(y);
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (size_t id : it->second)
          if (pred(id)) return true;
      }
    return false;
  }

  void insert(double x, double y, size_t id) { cells_[key(cell_of(x), cell_of(y))].push_back(id); }

 private:
  long cell_of(double v) const { return long(std::floor(v / cell_)); }
  static uint64_t key(long a, long b) {
    return (uint64_t(uint32_t(int32_t(a))) << 32) | uint64_t(uint32_t(int32_t(b)));
  }
  double cell_;
  std::unordered_map<uint64_t, std::vector<size_t>> cells_;
};

double next_unit(uint64_t& s) {
  // splitmix64
  uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return double(z >> 11) * 0x1.0p-53;
}

// Distances near p at scale r carry z-rounding of size eps * S, which moves the
// Koranyi distance by about sqrt(eta) * eps * S / r.
double rounding_slack(const MetricCtx& ctx, const Point& p, double r) {
  const double S = 1.0 + std::abs(p.z) + p.x * p.x + p.y * p.y;
  return 1e-12 * r + 8.0 * std::sqrt(ctx.eta) * std::numeric_limits<double>::epsilon() * S / r;
}

}  // namespace

NetHierarchy build_nets(const MetricCtx& ctx, const std::vector<Point>& K, int n_min, int n_max) {
  NetHierarchy h;
  h.n_min = n_min;
  h.n_max = n_max;
  if (n_max < n_min) return h;
  std::vector<char> chosen(K.size(), 0);
  std::vector<size_t> cur;
  for (int n = n_min; n <= n_max; ++n) {
    const double sep = std::ldexp(1.0, -n);
    PlanarGrid grid(sep);
    for (size_t id : cur) grid.insert(K[id].x, K[id].y, id);
    for (size_t i = 0; i < K.size(); ++i) {
      if (chosen[i]) continue;
      const Point& k = K[i];
      bool close = grid.any_near(k.x, k.y, [&](size_t j) { return distance(ctx, K[j], k) < sep; });
      if (close) continue;
      chosen[i] = 1;
      cur.push_back(i);
      grid.insert(k.x, k.y, i);
    }
    h.X.push_back(cur);
  }
  return h;
}

NetAudit audit_nets(const MetricCtx& ctx, const std::vector<Point>& K, const NetHierarchy& nets) {
  NetAudit a;
  for (int n = nets.n_min; n <= nets.n_max; ++n) {
    const auto& X = nets.level(n);
    const double sep = std::ldexp(1.0, -n);
    for (size_t i = 0; i < X.size(); ++i)
      for (size_t j = i + 1; j < X.size(); ++j)
        if (distance(ctx, K[X[i]], K[X[j]]) < sep) a.separated = false;
    for (const Point& k : K) {
      bool hit = false;
      for (size_t x : X)
        if (distance(ctx, K[x], k) <= sep) {
          hit = true;
          break;
        }
      if (!hit) a.covering = false;
    }
    if (n > nets.n_min) {
      const auto& prev = nets.level(n - 1);
      std::vector<size_t> s(X.begin(), X.end());
      std::sort(s.begin(), s.end());
      for (size_t x : prev)
        if (!std::binary_search(s.begin(), s.end(), x)) a.nested = false;
    }
  }
  return a;
}

std::vector<Ball> multiresolution(const NetHierarchy& nets, const std::vector<Point>& K, double A) {
  if (!(A > 0)) throw std::invalid_argument("multiresolution: A must be positive");
  std::vector<Ball> out;
  for (int n = nets.n_min; n <= nets.n_max; ++n)
    for (size_t x : nets.level(n)) out.push_back({K[x], A * std::ldexp(1.0, -n), n, x});
  return out;
}

std::vector<Ball> filter_G(const std::vector<Ball>& balls, double max_radius) {
  std::vector<Ball> out;
  for (const Ball& b : balls)
    if (b.radius < max_radius) out.push_back(b);
  return out;
}

int first_G_level(double A, double max_radius) {
  int n = int(std::floor(std::log2(A / max_radius))) - 1;
  while (A * std::ldexp(1.0, -n) >= max_radius) ++n;
  return n;
}

bool balls_intersect(const MetricCtx& ctx, const Ball& a, const Ball& b) {
  return distance(ctx, a.center, b.center) <= a.radius + b.radius;
}

bool ball_contains(const MetricCtx& ctx, const Ball& b, const Point& p) {
  return distance(ctx, b.center, p) <= b.radius;
}

double ball_gap(const MetricCtx& ctx, const Ball& a, const Ball& b) {
  return distance(ctx, a.center, b.center) - a.radius - b.radius;
}

Point ball_boundary_point(const MetricCtx& ctx, const Ball& b, uint64_t& state) {
  // Unit Koranyi sphere: rho^4 + eta zeta^2 = 1.
  const double zmax = 1.0 / std::sqrt(ctx.eta);
  const double zeta = (2.0 * next_unit(state) - 1.0) * zmax;
  const double rho = std::pow(std::max(0.0, 1.0 - ctx.eta * zeta * zeta), 0.25);
  const double phi = 2.0 * std::numbers::pi * next_unit(state);
  const Point u{rho * std::cos(phi), rho * std::sin(phi), zeta};
  return multiply(b.center, dilate(u, b.radius));
}

double ball_diameter_sampled(const MetricCtx& ctx, const Ball& b, int samples, uint64_t seed) {
  std::vector<Point> pts;
  pts.push_back(multiply(b.center, Point{b.radius, 0, 0}));
  pts.push_back(multiply(b.center, Point{-b.radius, 0, 0}));
  uint64_t s = seed;
  for (int i = 0; i < samples; ++i) pts.push_back(ball_boundary_point(ctx, b, s));
  double best = 0.0;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j) best = std::max(best, distance(ctx, pts[i], pts[j]));
  return best;
}

FamilySplit split_families(const MetricCtx& ctx, const std::vector<Ball>& balls, int J,
                           double kappa, double C) {
  if (J < 1) throw std::invalid_argument("split_families: J must be >= 1");
  FamilySplit out;
  out.J = J;
  out.kappa = kappa;
  out.C = C;
  // Key (residue, color) -> family index; colors are assigned per scale level.
  std::map<std::pair<int, int>, size_t> fam_index;
  std::map<int, std::vector<size_t>> by_level;
  for (size_t i = 0; i < balls.size(); ++i) by_level[balls[i].level].push_back(i);
  for (auto& [n, ids] : by_level) {
    const int residue = ((n % J) + J) % J;
    const double r = balls[ids.front()].radius;
    const double need = (kappa + 2.0) * r;
    PlanarGrid grid(need);
    std::vector<int> color(balls.size(), -1);
    for (size_t id : ids) {
      const Ball& b = balls[id];
      std::vector<char> used;
      grid.any_near(b.center.x, b.center.y, [&](size_t j) {
        if (distance(ctx, balls[j].center, b.center) <= need) {
          if (size_t(color[j]) >= used.size()) used.resize(color[j] + 1, 0);
          used[color[j]] = 1;
        }
        return false;
      });
      int c = 0;
      while (size_t(c) < used.size() && used[c]) ++c;
      color[id] = c;
      grid.insert(b.center.x, b.center.y, id);
      auto key = std::make_pair(residue, c);
      auto it = fam_index.find(key);
      if (it == fam_index.end()) {
        it = fam_index.emplace(key, out.families.size()).first;
        out.families.emplace_back();
      }
      out.families[it->second].push_back(id);
    }
  }
  out.D_prime = out.families.size();
  return out;
}

FamilyAudit audit_families(const MetricCtx& ctx, const std::vector<Ball>& balls,
                           const FamilySplit& split) {
  FamilyAudit a;
  std::vector<int> seen(balls.size(), 0);
  for (const auto& f : split.families)
    for (size_t id : f) ++seen[id];
  for (int s : seen)
    if (s != 1) a.partition = false;
  for (const auto& f : split.families) {
    for (size_t i = 0; i < f.size(); ++i) {
      const Ball& b = balls[f[i]];
      for (size_t j = i + 1; j < f.size(); ++j) {
        const Ball& c = balls[f[j]];
        const int dn = std::abs(b.level - c.level);
        if (dn % split.J != 0) a.radius_ratio = false;
        if (dn == 0 && ball_gap(ctx, b, c) <= split.kappa * b.radius) a.separated = false;
      }
    }
  }
  return a;
}

bool CubeForest::contains(const MetricCtx& ctx, size_t cube, const Point& p) const {
  for (size_t m : cubes[cube].members)
    if (ball_contains(ctx, balls[m], p)) return true;
  return false;
}

bool CubeForest::intersects(const MetricCtx& ctx, size_t c1, size_t c2) const {
  const double* a = cubes[c1].box;
  const double* b = cubes[c2].box;
  if (a[0] > b[2] || b[0] > a[2] || a[1] > b[3] || b[1] > a[3]) return false;
  return gap(ctx, c1, c2, std::numeric_limits<double>::min()) <= 0.0;
}

double CubeForest::gap(const MetricCtx& ctx, size_t c1, size_t c2, double cap) const {
  // Pairs whose planar separation already reaches cap cannot lower the result.
  auto planar_gap = [](const Ball& a, const double* box) {
    const double gx = std::max({box[0] - a.center.x, a.center.x - box[2], 0.0});
    const double gy = std::max({box[1] - a.center.y, a.center.y - box[3], 0.0});
    return std::max(gx, gy) - a.radius;
  };
  std::vector<size_t> near1, near2;
  for (size_t m : cubes[c1].members)
    if (planar_gap(balls[m], cubes[c2].box) < cap) near1.push_back(m);
  for (size_t m : cubes[c2].members)
    if (planar_gap(balls[m], cubes[c1].box) < cap) near2.push_back(m);
  double g = cap;
  for (size_t m1 : near1)
    for (size_t m2 : near2) g = std::min(g, ball_gap(ctx, balls[m1], balls[m2]));
  return g;
}

std::vector<size_t> CubeForest::roots() const {
  std::vector<size_t> r;
  for (size_t i = 0; i < cubes.size(); ++i)
    if (cubes[i].parent < 0) r.push_back(i);
  return r;
}

CubeForest build_cubes(const MetricCtx& ctx, std::vector<Ball> family, int J, double kappa) {
  CubeForest f;
  std::stable_sort(family.begin(), family.end(),
                   [](const Ball& a, const Ball& b) { return a.level < b.level; });
  f.balls = std::move(family);
  f.J = J;
  f.kappa = kappa;
  const size_t nb = f.balls.size();
  std::vector<PEntry> entries;
  entries.reserve(nb);
  for (size_t i = 0; i < nb; ++i) entries.emplace_back(ball_box(f.balls[i]), i);
  PTree tree(entries.begin(), entries.end());

  f.cubes.resize(nb);
  std::vector<char> in(nb, 0);
  std::vector<PEntry> hits;
  for (size_t g = 0; g < nb; ++g) {
    Cube& q = f.cubes[g];
    q.ball = g;
    const double rg = f.balls[g].radius;
    std::vector<size_t> frontier{g}, members{g};
    in[g] = 1;
    // Each round absorbs every admissible ball meeting the previous round's additions.
    while (!frontier.empty()) {
      std::vector<size_t> next;
      for (size_t m : frontier) {
        hits.clear();
        tree.query(bgi::intersects(ball_box(f.balls[m])), std::back_inserter(hits));
        for (const auto& [box, j] : hits) {
          if (in[j] || f.balls[j].radius > rg) continue;
          if (!balls_intersect(ctx, f.balls[m], f.balls[j])) continue;
          in[j] = 1;
          next.push_back(j);
          members.push_back(j);
        }
      }
      frontier.swap(next);
    }
    for (size_t m : members) in[m] = 0;
    std::sort(members.begin(), members.end());
    q.members = std::move(members);
    double* bx = q.box;
    bx[0] = bx[1] = std::numeric_limits<double>::infinity();
    bx[2] = bx[3] = -std::numeric_limits<double>::infinity();
    for (size_t m : q.members) {
      const Ball& b = f.balls[m];
      bx[0] = std::min(bx[0], b.center.x - b.radius);
      bx[1] = std::min(bx[1], b.center.y - b.radius);
      bx[2] = std::max(bx[2], b.center.x + b.radius);
      bx[3] = std::max(bx[3], b.center.y + b.radius);
    }
  }

  // Parent: the cube of the nearest coarser level holding this generator as a member.
  std::vector<int> parent_level(nb, std::numeric_limits<int>::min());
  for (size_t c = 0; c < nb; ++c) {
    const int lc = f.balls[c].level;
    for (size_t m : f.cubes[c].members) {
      if (m == c || f.balls[m].level <= lc) continue;
      if (lc > parent_level[m]) {
        parent_level[m] = lc;
        f.cubes[m].parent = long(c);
      }
    }
  }
  for (size_t c = 0; c < nb; ++c)
    if (f.cubes[c].parent >= 0) f.cubes[size_t(f.cubes[c].parent)].children.push_back(c);
  return f;
}

CubeAudit audit_cubes(const MetricCtx& ctx, const CubeForest& f, int samples_per_cube,
                      uint64_t seed) {
  CubeAudit a;
  a.cubes = f.cubes.size();
  const double grow = 1.0 + std::ldexp(1.0, -f.J + 2);
  uint64_t s = seed;

  std::vector<PEntry> entries;
  for (size_t c = 0; c < f.cubes.size(); ++c) {
    const double* b = f.cubes[c].box;
    entries.emplace_back(make_box(b[0], b[1], b[2], b[3]), c);
  }
  PTree tree(entries.begin(), entries.end());

  for (size_t c = 0; c < f.cubes.size(); ++c) {
    const Cube& q = f.cubes[c];
    const Ball& B = f.balls[q.ball];
    const double bound = grow * B.radius + rounding_slack(ctx, B.center, B.radius);
    bool bad = false;
    // (1): B is a member; every member sits inside (1 + 2^{-J+2})B.
    if (!std::binary_search(q.members.begin(), q.members.end(), q.ball)) bad = true;
    for (size_t m : q.members) {
      const Ball& bm = f.balls[m];
      const double reach = distance(ctx, B.center, bm.center) + bm.radius;
      a.worst_prop1_ratio = std::max(a.worst_prop1_ratio, reach / B.radius);
      if (reach > bound) bad = true;
    }
    for (int i = 0; i < samples_per_cube; ++i) {
      const size_t m = q.members[size_t(next_unit(s) * double(q.members.size())) % q.members.size()];
      const Point x = ball_boundary_point(ctx, f.balls[m], s);
      ++a.boundary_samples;
      const double d = distance(ctx, B.center, x);
      a.worst_prop1_ratio = std::max(a.worst_prop1_ratio, d / B.radius);
      if (d > bound) bad = true;
    }
    if (bad) ++a.prop1_violations;

    // (2) and (3) against every cube whose box comes close.
    std::vector<PEntry> hits;
    const double pad = (f.kappa + 1.0) * B.radius;
    tree.query(bgi::intersects(make_box(q.box[0] - pad, q.box[1] - pad, q.box[2] + pad,
                                        q.box[3] + pad)),
               std::back_inserter(hits));
    for (const auto& [box, o] : hits) {
      if (o == c) continue;
      const Ball& Bo = f.balls[f.cubes[o].ball];
      if (Bo.level > B.level) {
        if (!f.intersects(ctx, c, o)) continue;
        ++a.nested_pairs_checked;
        const auto& sub = f.cubes[o].members;
        if (!std::includes(q.members.begin(), q.members.end(), sub.begin(), sub.end()))
          ++a.prop2_violations;
      } else if (Bo.level == B.level && o > c) {
        ++a.separated_pairs_checked;
        if (!(f.gap(ctx, c, o, f.kappa * B.radius) > (f.kappa - 1.0) * B.radius)) ++a.prop3_violations;
      }
    }
  }
  return a;
}

std::vector<Ball> enlarge_balls(const std::vector<Ball>& balls, double lambda) {
  std::vector<Ball> out = balls;
  for (auto& b : out) b.radius *= lambda;
  return out;
}

FamilyForests family_forests(const MetricCtx& ctx, const std::vector<Ball>& balls, int J,
                             double kappa, double C, double enlarge) {
  FamilyForests out;
  out.balls = enlarge_balls(balls, enlarge);
  out.split = split_families(ctx, out.balls, J, kappa, C);
  for (const auto& fam : out.split.families) {
    std::vector<Ball> fb;
    fb.reserve(fam.size());
    for (size_t i : fam) fb.push_back(out.balls[i]);
    out.forests.push_back(build_cubes(ctx, std::move(fb), J, kappa));
  }
  return out;
}

}  // namespace heis
