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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "json.hpp"

#include "heis/filtration.hpp"

namespace heis {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using PBox = bg::model::box<bg::model::point<double, 2, bg::cs::cartesian>>;
using PEntry = std::pair<PBox, size_t>;

// Offset of x past the origin o on the circle.
double pos(double o, double x, double T) { return x >= o ? x - o : x - o + T; }

bool point_in(const CArc& x, double p, double T) {
  return x.full || pos(x.a, p, T) <= carc_span(x, T);
}

std::string arc_str(const CArc& x) {
  std::ostringstream os;
  os.precision(17);
  if (x.full)
    os << "[full circle]";
  else
    os << "[" << x.a << ", " << x.b << "]";
  return os.str();
}

double reduce(double x, double T) {
  if (x >= T) x -= T;
  if (x < 0) x += T;
  return x >= T ? 0.0 : x;
}

}  // namespace

double carc_span(const CArc& x, double T) {
  if (x.full) return T;
  return x.b > x.a ? x.b - x.a : x.b - x.a + T;
}

bool carc_contains(const CArc& outer, const CArc& inner, double T) {
  if (outer.full) return true;
  if (inner.full) return false;
  const double pa = pos(outer.a, inner.a, T);
  const double pb = pa + carc_span(inner, T);
  return pb <= carc_span(outer, T) || (inner.b == outer.b && pa <= carc_span(outer, T));
}

bool carc_intersect(const CArc& x, const CArc& y, double T) {
  return point_in(x, y.a, T) || point_in(y, x.a, T);
}

Arc carc_measure(const MetricCtx& ctx, const Curve& c, const CArc& x) {
  return make_arc(ctx, c, x.a, x.a + carc_span(x, c.T));
}

struct EdgeIndex::Impl {
  bgi::rtree<PEntry, bgi::rstar<16>> tree;
};

EdgeIndex::EdgeIndex(const Curve& c) : curve_(&c), impl_(new Impl) {
  std::vector<PEntry> e;
  e.reserve(c.num_edges());
  for (size_t k = 0; k < c.num_edges(); ++k) {
    const Point& p = c.p[k];
    const Point& d = c.inc[k];
    const double x0 = p.x, y0 = p.y, x1 = p.x + d.x, y1 = p.y + d.y;
    e.emplace_back(PBox({std::min(x0, x1), std::min(y0, y1)}, {std::max(x0, x1), std::max(y0, y1)}),
                   k);
  }
  impl_->tree = bgi::rtree<PEntry, bgi::rstar<16>>(e.begin(), e.end());
}

EdgeIndex::~EdgeIndex() { delete impl_; }

std::vector<size_t> EdgeIndex::edges_near(const Ball& b) const {
  std::vector<PEntry> hits;
  const double r = b.radius;
  impl_->tree.query(
      bgi::intersects(PBox({b.center.x - r, b.center.y - r}, {b.center.x + r, b.center.y + r})),
      std::back_inserter(hits));
  std::vector<size_t> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.second);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Interval> ball_preimage(const MetricCtx& ctx, const EdgeIndex& idx, const Ball& b) {
  const Curve& c = idx.curve();
  std::vector<Interval> out;
  const double r = b.radius;
  for (size_t e : idx.edges_near(b)) {
    const Point& d = c.inc[e];
    const Point h = left_diff(b.center, c.p[e]);
    const double t0 = c.t[e];
    const double t1 = e + 1 < c.size() ? c.t[e + 1] : c.T;
    auto f = [&](double s) { return koranyi_norm(ctx, multiply(h, {s * d.x, s * d.y, 0.0})); };
    const double len = std::hypot(d.x, d.y);
    if (!(len > 0)) {
      if (f(0) <= r) out.push_back({t0, t1});
      continue;
    }
    const HorizontalLine line{c.p[e], std::atan2(d.y, d.x)};
    double sm = line_foot_clamped(ctx, b.center, line, 0.0, len).t / len;
    sm = std::clamp(sm, 0.0, 1.0);
    if (f(sm) > r) {
      // The foot can sit a rounding step off the true minimizer; probe the ends too.
      if (f(0) <= r)
        sm = 0;
      else if (f(1) <= r)
        sm = 1;
      else
        continue;
    }
    auto edge_of = [&](double lo_in, double hi_out) {
      // lo_in inside, hi_out outside
      for (int it = 0; it < 80 && std::abs(hi_out - lo_in) > 0; ++it) {
        const double mid = 0.5 * (lo_in + hi_out);
        if (mid == lo_in || mid == hi_out) break;
        (f(mid) <= r ? lo_in : hi_out) = mid;
      }
      return lo_in;
    };
    const double s0 = f(0) <= r ? 0.0 : edge_of(sm, 0.0);
    const double s1 = f(1) <= r ? 1.0 : edge_of(sm, 1.0);
    const double u0 = s0 == 0.0 ? t0 : t0 + s0 * (t1 - t0);
    const double u1 = s1 == 1.0 ? t1 : t0 + s1 * (t1 - t0);
    out.push_back({u0, u1});
  }
  std::sort(out.begin(), out.end(), [](const Interval& x, const Interval& y) { return x.a < y.a; });
  std::vector<Interval> merged;
  for (const auto& iv : out) {
    if (!merged.empty() && iv.a <= merged.back().b)
      merged.back().b = std::max(merged.back().b, iv.b);
    else
      merged.push_back(iv);
  }
  return merged;
}

std::vector<CArc> interval_components(std::vector<Interval> iv, double T, bool closed) {
  std::sort(iv.begin(), iv.end(), [](const Interval& x, const Interval& y) { return x.a < y.a; });
  std::vector<Interval> m;
  for (const auto& x : iv) {
    if (!m.empty() && x.a <= m.back().b)
      m.back().b = std::max(m.back().b, x.b);
    else
      m.push_back(x);
  }
  std::vector<CArc> out;
  if (m.empty()) return out;
  if (closed && m.front().a <= 0.0 && m.back().b >= T) {
    if (m.size() == 1) return {CArc{0.0, 0.0, true}};
    m.front().a = m.back().a;  // joins through 0
    m.pop_back();
    out.push_back({m.front().a, reduce(m.front().b, T), false});
    for (size_t i = 1; i < m.size(); ++i) out.push_back({m[i].a, m[i].b, false});
    std::sort(out.begin(), out.end(), [](const CArc& x, const CArc& y) { return x.a < y.a; });
    return out;
  }
  for (const auto& x : m) out.push_back({x.a, closed ? reduce(x.b, T) : x.b, false});
  return out;
}

PreimageCache::PreimageCache(const MetricCtx& ctx, const EdgeIndex& idx, const CubeForest& f)
    : ctx_(ctx), idx_(idx), f_(f), cache_(f.balls.size()), done_(f.balls.size(), 0) {}

const std::vector<Interval>& PreimageCache::of(size_t ball) {
  if (!done_[ball]) {
    cache_[ball] = ball_preimage(ctx_, idx_, f_.balls[ball]);
    done_[ball] = 1;
  }
  return cache_[ball];
}

std::vector<CArc> lambda_arcs(const MetricCtx& ctx, const EdgeIndex& idx, const CubeForest& f,
                              size_t cube, const Ball& inner, PreimageCache& cache) {
  const Curve& c = idx.curve();
  std::vector<Interval> all;
  for (size_t m : f.cubes[cube].members) {
    const auto& iv = cache.of(m);
    all.insert(all.end(), iv.begin(), iv.end());
  }
  auto comps = interval_components(std::move(all), c.T, c.closed);
  const auto hits = ball_preimage(ctx, idx, inner);
  std::vector<CArc> out;
  for (const auto& comp : comps) {
    for (const auto& h : hits) {
      const double mid = 0.5 * (h.a + h.b);
      if (point_in(comp, mid, c.T)) {
        out.push_back(comp);
        break;
      }
    }
  }
  return out;
}

size_t Prefiltration::size() const {
  size_t s = 0;
  for (const auto& [k, v] : levels) s += v.size();
  return s;
}

PrefiltrationAudit audit_prefiltration(const MetricCtx& ctx, const Curve& c,
                                       const Prefiltration& pre) {
  (void)ctx;
  PrefiltrationAudit a;
  const double T = c.T;
  auto fail = [&](const std::string& s) {
    if (a.first_failure.empty()) a.first_failure = s;
  };
  for (const auto& [k, arcs] : pre.levels) {
    const double u = pre.L * std::ldexp(1.0, -k * pre.J);
    for (size_t i = 0; i < arcs.size(); ++i) {
      ++a.arcs;
      const double d = arcs[i].diam;
      if (d < u * (1 - kDiamRelTol) || d >= 8 * u * (1 + kDiamRelTol)) {
        ++a.diam_violations;
        fail("(i) level " + std::to_string(k) + " arc " + arc_str(arcs[i].dom) + " diam " +
             std::to_string(d / u) + " units");
      }
    }
    for (size_t i = 0; arcs.size() > 1 && i < arcs.size(); ++i) {
      const size_t j = (i + 1) % arcs.size();
      if (arcs.size() == 2 && i == 1) break;
      if (carc_intersect(arcs[i].dom, arcs[j].dom, T)) {
        ++a.disjoint_violations;
        fail("(ii) level " + std::to_string(k) + " arcs " + arc_str(arcs[i].dom) + " and " +
             arc_str(arcs[j].dom));
      }
    }
  }
  for (const auto& [k, coarse] : pre.levels) {
    if (coarse.empty()) continue;
    for (const auto& [k2, fine] : pre.levels) {
      if (k2 <= k) continue;
      for (const auto& z : fine) {
        // Predecessor by start, and its successor, are the only arcs that can meet z
        // without containing it.
        auto it = std::upper_bound(coarse.begin(), coarse.end(), z.dom.a,
                                   [](double v, const PreArc& x) { return v < x.dom.a; });
        const size_t nxt = size_t(it - coarse.begin()) % coarse.size();
        const size_t prv = (size_t(it - coarse.begin()) + coarse.size() - 1) % coarse.size();
        for (size_t cand : {prv, nxt}) {
          const auto& t = coarse[cand];
          if (carc_intersect(t.dom, z.dom, T) && !carc_contains(t.dom, z.dom, T)) {
            ++a.nested_violations;
            fail("(iii) level " + std::to_string(k2) + " arc " + arc_str(z.dom) +
                 " meets level " + std::to_string(k) + " arc " + arc_str(t.dom));
          }
        }
      }
    }
  }
  return a;
}

Prefiltration prefiltration_from_cubes(const MetricCtx& ctx, const EdgeIndex& idx,
                                       const CubeForest& forest, double inner_ratio) {
  const Curve& c = idx.curve();
  Prefiltration pre;
  pre.J = forest.J;
  pre.T = c.T;
  pre.cube_arcs.resize(forest.cubes.size());
  if (forest.cubes.empty()) return pre;
  const int J = forest.J;
  PreimageCache cache(ctx, idx, forest);
  bool have_L = false;
  std::map<int, std::vector<std::pair<PreArc, size_t>>> raw;  // arc, cube
  for (size_t q = 0; q < forest.cubes.size(); ++q) {
    const Ball& B2 = forest.balls[forest.cubes[q].ball];
    const Ball inner{B2.center, B2.radius * inner_ratio, B2.level, B2.point};
    const int n = B2.level;
    const int l = ((-n) % J + J) % J;
    const int k = (n + l) / J;
    const double L = inner.radius * std::ldexp(1.0, k * J);
    if (!have_L) {
      pre.L = L;
      have_L = true;
    } else if (std::abs(L - pre.L) > 1e-12 * pre.L) {
      throw PrefiltrationError("family mixes scale residues: L " + std::to_string(L) + " vs " +
                               std::to_string(pre.L));
    }
    for (const CArc& arc : lambda_arcs(ctx, idx, forest, q, inner, cache)) {
      PreArc pa{arc, carc_measure(ctx, c, arc).diam, q};
      raw[k].push_back({pa, q});
    }
  }
  pre.m = raw.empty() ? 0 : raw.begin()->first;
  for (auto& [k, v] : raw) {
    std::sort(v.begin(), v.end(),
              [](const auto& x, const auto& y) { return x.first.dom.a < y.first.dom.a; });
    auto& lvl = pre.levels[k];
    for (size_t i = 0; i < v.size(); ++i) {
      lvl.push_back(v[i].first);
      pre.cube_arcs[v[i].second].push_back({k, i});
    }
  }
  const auto audit = audit_prefiltration(ctx, c, pre);
  if (!audit.ok()) throw PrefiltrationError("prefiltration invariant " + audit.first_failure);
  return pre;
}

double Filtration::unit(int n) const { return std::ldexp(L, -n * J); }

size_t Filtration::size() const {
  size_t s = 0;
  for (const auto& v : levels) s += v.size();
  return s;
}

namespace {

// Maximal elements of a laminar arc family, sorted by start.
std::vector<CArc> maximal_arcs(std::vector<CArc> v, double T) {
  std::sort(v.begin(), v.end(), [T](const CArc& x, const CArc& y) {
    if (x.a != y.a) return x.a < y.a;
    return carc_span(x, T) > carc_span(y, T);
  });
  std::vector<CArc> out;
  for (const auto& x : v) {
    if (!out.empty() && carc_contains(out.back(), x, T)) continue;
    out.push_back(x);
  }
  if (out.size() > 1) {
    const CArc last = out.back();
    size_t drop = 0;
    while (drop + 1 < out.size() && carc_contains(last, out[drop], T)) ++drop;
    out.erase(out.begin(), out.begin() + long(drop));
  }
  return out;
}

// Index of the arc with the largest start <= x, cyclically.
template <class V, class Get>
size_t predecessor(const V& v, double x, Get get) {
  size_t lo = 0, hi = v.size();
  while (lo < hi) {
    const size_t mid = (lo + hi) / 2;
    if (get(v[mid]) <= x)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo == 0 ? v.size() - 1 : lo - 1;
}

double chord_of(const MetricCtx& ctx, const Curve& c, const CArc& x) {
  if (x.full) return 0.0;
  return koranyi_norm(ctx, arc_chain(c, x.a, x.a + carc_span(x, c.T)).q.back());
}

struct Completer {
  const MetricCtx& ctx;
  const Curve& c;
  double T;
  double u;
  const std::vector<CArc>& finer;

  double diam(double start, double off0, double off1) const {
    return arc_diameter(ctx, c, start + off0, start + off1);
  }

  // Moves a cut at offset t (from ga) out of the interior of any finer arc.
  std::pair<double, double> snap(double ga, double t, double S) const {
    const double x = reduce(ga + t, T);
    if (finer.empty()) return {t, x};
    const size_t k = predecessor(finer, x, [](const CArc& a) { return a.a; });
    const CArc& f = finer[k];
    if (!point_in(f, x, T) || x == f.a || x == f.b) return {t, x};
    const double tb = pos(ga, f.b, T);
    if (tb <= S) return {tb, f.b};
    const double ta = pos(ga, f.a, T);
    return {ta, f.a};
  }

  // Splits the closed gap [ga, ga+S] into pieces of diameter in [u, 16u).
  std::vector<CArc> partition(double ga, double gb, double S) const {
    std::vector<CArc> pieces;
    double s_off = 0.0, s_can = ga;
    for (size_t guard = 0; guard < 100000000; ++guard) {
      // Doubling search for a cut; reaching the gap end means the rest fits in one piece.
      double lo = s_off, step = 4 * u, t = std::min(s_off + step, S);
      double dt = diam(ga, s_off, t);
      while (dt < 2 * u && t < S) {
        lo = t;
        step *= 2;
        t = std::min(s_off + step, S);
        dt = diam(ga, s_off, t);
      }
      if (t >= S && dt <= 6 * u) {
        if (dt < u && !pieces.empty())
          pieces.back().b = gb;
        else
          pieces.push_back({s_can, gb, false});
        break;
      }
      double hi = t;
      for (int it = 0; it < 200 && (dt < 2 * u || dt > 6 * u); ++it) {
        t = 0.5 * (lo + hi);
        dt = diam(ga, s_off, t);
        if (dt < 2 * u)
          lo = t;
        else if (dt > 6 * u)
          hi = t;
      }
      auto [t2, cut] = snap(ga, t, S);
      if (!(t2 > s_off) || t2 >= S) {
        pieces.push_back({s_can, gb, false});
        break;
      }
      pieces.push_back({s_can, cut, false});
      s_off = t2;
      s_can = cut;
    }
    if (pieces.size() == 1 && pieces[0].a == pieces[0].b) pieces[0].full = true;
    return pieces;
  }
};

struct Item {
  double ps, pe;
  double a, b;
  long owner;  // F0 index, -1 for a boundary point of the previous level
};

}  // namespace

Filtration complete_filtration(const MetricCtx& ctx, const Curve& c, const Prefiltration& pre,
                               double delta, int extra_levels) {
  if (pre.J < 10) throw std::invalid_argument("complete_filtration: J must be >= 10");
  if (!(delta > 0 && delta < 1)) throw std::invalid_argument("complete_filtration: delta in (0,1)");
  if (!c.closed) throw std::invalid_argument("complete_filtration: curve must be closed");
  Filtration f;
  f.J = pre.J;
  f.delta = delta;
  f.L = pre.L;
  f.m = pre.m;
  f.T = c.T;
  if (pre.empty()) return f;
  const double T = c.T;
  const int N = pre.levels.rbegin()->first + std::max(0, extra_levels);

  std::map<int, std::vector<CArc>> finer;
  {
    std::vector<CArc> acc;
    for (int n = N; n >= f.m; --n) {
      finer[n] = acc;
      auto it = pre.levels.find(n);
      if (it != pre.levels.end()) {
        for (const auto& x : it->second) acc.push_back(x.dom);
        acc = maximal_arcs(std::move(acc), T);
      }
    }
  }

  static const std::vector<PreArc> kNone;
  for (int n = f.m; n <= N; ++n) {
    const double u = f.unit(n);
    auto pit = pre.levels.find(n);
    const auto& F0 = pit == pre.levels.end() ? kNone : pit->second;
    const Completer comp{ctx, c, T, u, finer[n]};
    std::vector<FArc> cur;
    for (size_t i = 0; i < F0.size(); ++i) {
      FArc x;
      x.dom = F0[i].dom;
      x.source = long(i);
      cur.push_back(x);
    }
    std::vector<double> P;
    if (n > f.m)
      for (const auto& x : f.levels.back())
        if (!x.dom.full) P.push_back(x.dom.a);

    const bool covered = F0.size() == 1 && F0[0].dom.full;
    if (!covered && F0.empty() && P.empty()) {
      double ga = 0.0;
      const auto& fin = finer[n];
      if (!fin.empty()) {
        const size_t k = predecessor(fin, 0.0, [](const CArc& a) { return a.a; });
        if (point_in(fin[k], 0.0, T) && fin[k].a != 0.0) ga = fin[k].b;
      }
      const CArc whole{ga, ga, true};
      if (carc_measure(ctx, c, whole).diam < 16 * u) {
        FArc x;
        x.dom = whole;
        cur.push_back(x);
      } else {
        for (const auto& piece : comp.partition(ga, ga, T)) {
          FArc x;
          x.dom = piece;
          cur.push_back(x);
        }
      }
    } else if (!covered) {
      const double o = F0.empty() ? *std::min_element(P.begin(), P.end()) : F0[0].dom.a;
      std::vector<Item> items;
      for (size_t i = 0; i < F0.size(); ++i) {
        const double ps = pos(o, F0[i].dom.a, T);
        items.push_back({ps, ps + carc_span(F0[i].dom, T), F0[i].dom.a, F0[i].dom.b, long(i)});
      }
      for (double p : P) {
        const double ps = pos(o, p, T);
        items.push_back({ps, ps, p, p, -1});
      }
      std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) {
        if (x.ps != y.ps) return x.ps < y.ps;
        return x.owner < y.owner;  // points first
      });
      struct Block {
        double ps, pe, a, b;
        long start_owner, end_owner;
      };
      std::vector<Block> blocks;
      for (const auto& it : items) {
        const bool exact_end_match = !blocks.empty() && it.a == blocks.back().b;
        if (!blocks.empty() && (it.ps <= blocks.back().pe || exact_end_match)) {
          Block& bl = blocks.back();
          if (it.pe > bl.pe) {
            bl.pe = it.pe;
            bl.b = it.b;
            bl.end_owner = it.owner;
          } else if ((it.pe == bl.pe || it.b == bl.b) && it.owner < 0) {
            bl.end_owner = -1;
          }
        } else {
          blocks.push_back({it.ps, it.pe, it.a, it.b, it.owner, it.owner});
        }
      }
      const size_t nb = blocks.size();
      for (size_t i = 0; i < nb; ++i) {
        const Block& L0 = blocks[i];
        const Block& R0 = blocks[(i + 1) % nb];
        const double ga = L0.b, gb = R0.a;
        if (ga == gb) continue;
        const CArc G{ga, gb, false};
        const double S = carc_span(G, T);
        const double dg = carc_measure(ctx, c, G).diam;
        if (dg < delta * u) {
          if (L0.end_owner >= 0) {
            FArc& x = cur[size_t(L0.end_owner)];
            x.dom.b = gb;
            x.ext_right = dg;
            if (x.dom.b == x.dom.a) x.dom.full = true;
            continue;
          }
          if (R0.start_owner >= 0) {
            FArc& x = cur[size_t(R0.start_owner)];
            x.dom.a = ga;
            x.ext_left = dg;
            if (x.dom.b == x.dom.a) x.dom.full = true;
            continue;
          }
          FArc x;
          x.dom = G;
          cur.push_back(x);
        } else if (dg < 16 * u) {
          FArc x;
          x.dom = G;
          cur.push_back(x);
        } else {
          for (const auto& piece : comp.partition(ga, gb, S)) {
            FArc x;
            x.dom = piece;
            cur.push_back(x);
          }
        }
      }
    }

    for (auto& x : cur) {
      x.diam = carc_measure(ctx, c, x.dom).diam;
      x.chord = chord_of(ctx, c, x.dom);
    }
    std::sort(cur.begin(), cur.end(), [](const FArc& x, const FArc& y) { return x.dom.a < y.dom.a; });
    std::vector<long> map(F0.size(), -1);
    for (size_t i = 0; i < cur.size(); ++i)
      if (cur[i].source >= 0) map[size_t(cur[i].source)] = long(i);

    if (n > f.m) {
      auto& prev = f.levels.back();
      for (size_t i = 0; i < cur.size(); ++i) {
        const size_t k = predecessor(prev, cur[i].dom.a, [](const FArc& a) { return a.dom.a; });
        for (size_t cand : {k, (k + 1) % prev.size(), (k + prev.size() - 1) % prev.size()}) {
          if (carc_contains(prev[cand].dom, cur[i].dom, T)) {
            cur[i].parent = long(cand);
            prev[cand].children.push_back(i);
            break;
          }
        }
      }
    }
    f.levels.push_back(std::move(cur));
    f.from_pre.push_back(std::move(map));
  }
  return f;
}

FiltrationAudit audit_filtration(const MetricCtx& ctx, const Curve& c, const Prefiltration& pre,
                                 const Filtration& f) {
  FiltrationAudit a;
  const double T = c.T;
  const double length = curve_length(ctx, c);
  auto fail = [&](const std::string& s) {
    if (a.first_failure.empty()) a.first_failure = s;
  };
  for (int n = f.m; n <= f.n_max(); ++n) {
    const auto& arcs = f.level(n);
    const double u = f.unit(n);
    const std::string tag = "level " + std::to_string(n) + " ";
    double chords = 0.0, spans = 0.0;
    for (size_t i = 0; i < arcs.size(); ++i) {
      ++a.arcs;
      const auto& x = arcs[i];
      chords += x.chord;
      spans += carc_span(x.dom, T);
      if (x.diam < f.delta * u * (1 - kDiamRelTol) || x.diam >= 16 * u * (1 + kDiamRelTol)) {
        ++a.p2;
        fail("(2) " + tag + arc_str(x.dom) + " diam " + std::to_string(x.diam / u) + " units");
      }
    }
    if (arcs.size() == 1) {
      if (!arcs[0].dom.full) {
        ++a.p4;
        fail("(4) " + tag + "single arc is not the circle");
      }
    } else {
      for (size_t i = 0; i < arcs.size(); ++i) {
        const auto& x = arcs[i];
        const auto& y = arcs[(i + 1) % arcs.size()];
        if (x.dom.full) {
          ++a.p3;
          fail("(3) " + tag + "full arc beside others");
        }
        if (x.dom.b == y.dom.a) continue;
        if (pos(x.dom.a, y.dom.a, T) < carc_span(x.dom, T)) {
          ++a.p3;
          fail("(3) " + tag + arc_str(x.dom) + " overlaps " + arc_str(y.dom));
        } else {
          ++a.p4;
          fail("(4) " + tag + "hole between " + arc_str(x.dom) + " and " + arc_str(y.dom));
        }
      }
      if (std::abs(spans - T) > 1e-9 * T) {
        ++a.p4;
        fail("(4) " + tag + "spans sum to " + std::to_string(spans) + " of " + std::to_string(T));
      }
    }
    if (chords > length * (1 + kChordRelTol)) {
      ++a.chord_sum;
      fail("chord sum " + tag + std::to_string(chords) + " > length " + std::to_string(length));
    }
    if (length > 0) a.worst_chord_ratio = std::max(a.worst_chord_ratio, chords / length);

    if (n > f.m) {
      const auto& prev = f.level(n - 1);
      for (size_t i = 0; i < arcs.size(); ++i) {
        const size_t k =
            predecessor(prev, arcs[i].dom.a, [](const FArc& x) { return x.dom.a; });
        std::vector<size_t> cands{k, (k + 1) % prev.size(), (k + prev.size() - 1) % prev.size()};
        std::sort(cands.begin(), cands.end());
        cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
        int holders = 0;
        for (size_t cand : cands)
          if (carc_contains(prev[cand].dom, arcs[i].dom, T)) ++holders;
        if (holders != 1 || arcs[i].parent < 0) {
          ++a.p1;
          fail("(1) " + tag + arc_str(arcs[i].dom) + " has " + std::to_string(holders) +
               " parents");
        }
      }
    }

    auto pit = pre.levels.find(n);
    if (pit == pre.levels.end()) continue;
    const auto& F0 = pit->second;
    const auto& map = f.from_pre.at(size_t(n - f.m));
    std::vector<long> seen;
    for (size_t i = 0; i < F0.size(); ++i) {
      const long j = map[i];
      if (j < 0 || !carc_contains(arcs[size_t(j)].dom, F0[i].dom, T)) {
        ++a.p5;
        fail("(5) " + tag + "prefiltration arc " + arc_str(F0[i].dom) + " not extended");
        continue;
      }
      seen.push_back(j);
      const CArc& big = arcs[size_t(j)].dom;
      const CArc& small = F0[i].dom;
      std::vector<CArc> rest;
      if (big.full) {
        if (!small.full) rest.push_back({small.b, small.a, small.b == small.a});
      } else {
        if (big.a != small.a) rest.push_back({big.a, small.a, false});
        if (big.b != small.b) rest.push_back({small.b, big.b, false});
      }
      for (const auto& r : rest) {
        const double d = carc_measure(ctx, c, r).diam;
        if (d >= f.delta * u * (1 + kDiamRelTol)) {
          ++a.p5;
          fail("(5) " + tag + "extension " + arc_str(r) + " diam " + std::to_string(d / u) +
               " units");
        }
      }
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
      ++a.p6;
      fail("(6) " + tag + "two prefiltration arcs share an extension");
    }
  }
  return a;
}

std::vector<size_t> children(const Filtration& f, int n, size_t i, int k) {
  std::vector<size_t> cur{i};
  for (int step = 0; step < k; ++step) {
    if (n + step >= f.n_max()) return {};
    std::vector<size_t> next;
    for (size_t j : cur) {
      const auto& ch = f.arc(n + step, j).children;
      next.insert(next.end(), ch.begin(), ch.end());
    }
    std::sort(next.begin(), next.end());
    cur.swap(next);
  }
  return cur;
}

size_t lambda_prime(const Filtration& f, int n, size_t pre_index) {
  if (n < f.m || n > f.n_max()) throw std::out_of_range("lambda_prime: level outside filtration");
  const auto& map = f.from_pre.at(size_t(n - f.m));
  if (pre_index >= map.size() || map[pre_index] < 0)
    throw std::out_of_range("lambda_prime: arc not registered at level " + std::to_string(n));
  return size_t(map[pre_index]);
}

namespace {

struct Sampled {
  double best = -1.0;
  int index = 0;
};

template <class G>
Sampled sample_max(G g, int samples) {
  Sampled r;
  for (int j = 0; j < samples; ++j) {
    const double v = g(samples == 1 ? 0.0 : double(j) / double(samples - 1));
    if (v > r.best) {
      r.best = v;
      r.index = j;
    }
  }
  return r;
}

// Golden-section refinement of the max around the best sample.
template <class G>
double refine_max(G g, const Sampled& s, int samples) {
  if (samples < 3) return s.best;
  const double h = 1.0 / double(samples - 1);
  double lo = std::max(0.0, (s.index - 1) * h), hi = std::min(1.0, (s.index + 1) * h);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = g(x1), f2 = g(x2);
  while (hi - lo > 1e-7) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = g(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = g(x2);
    }
  }
  return std::max({s.best, f1, f2});
}

double d_tau_impl(const MetricCtx& ctx, const Curve& c, const Filtration& f, int n, size_t i,
                  int samples, bool refine) {
  if (n >= f.n_max()) return 0.0;
  const double T = c.T;
  const FArc& tau = f.arc(n, i);
  const double span = carc_span(tau.dom, T);
  const ArcFrame frame(c, tau.dom.a, tau.dom.a + span);
  const HorizontalSegment Lt = horizontal_segment(Point{}, frame.at(tau.dom.a + span));
  struct Child {
    HorizontalSegment seg;
    double len;
    Sampled sampled;
  };
  std::vector<Child> kids;
  kids.reserve(tau.children.size());
  double best = 0.0;
  for (size_t j : tau.children) {
    const FArc& ch = f.arc(n + 1, j);
    const double off = ch.dom.a == tau.dom.a ? 0.0 : pos(tau.dom.a, ch.dom.a, T);
    const double s0 = tau.dom.a + off;
    const double s1 = s0 + carc_span(ch.dom, T);
    const HorizontalSegment Lc = horizontal_segment(frame.at(s0), frame.at(s1));
    const double len = Lc.length();
    auto g = [&](double s) { return dist_point_to_segment_fast(ctx, Lc.eval(s * len), Lt); };
    kids.push_back({Lc, len, sample_max(g, samples)});
    best = std::max(best, kids.back().sampled.best);
  }
  if (!refine) return best;
  // The distance is 1-Lipschitz along a child segment, which bounds what refinement can add.
  const double slack = 0.5 / double(samples - 1);
  for (const auto& k : kids) {
    if (k.sampled.best + slack * k.len <= best) continue;
    auto g = [&](double s) { return dist_point_to_segment_fast(ctx, k.seg.eval(s * k.len), Lt); };
    best = std::max(best, refine_max(g, k.sampled, samples));
  }
  return best;
}

}  // namespace

double d_tau(const MetricCtx& ctx, const Curve& c, const Filtration& f, int n, size_t i) {
  return d_tau_impl(ctx, c, f, n, i, 33, true);
}

double d_tau_grid(const MetricCtx& ctx, const Curve& c, const Filtration& f, int n, size_t i,
                  int samples) {
  return d_tau_impl(ctx, c, f, n, i, samples, false);
}

TelescopeReport telescope(const MetricCtx& ctx, const Curve& c, const Filtration& f, int n,
                          size_t i) {
  TelescopeReport r;
  const FArc& tau = f.arc(n, i);
  // beta diam is the unnormalized sup; a chain of two points is its own L_tau.
  auto beta_diam = [&](const FArc& x) {
    if (!(x.diam > 0)) return 0.0;
    const auto ch = arc_chain(c, x.dom.a, x.dom.a + carc_span(x.dom, c.T));
    return ch.q.size() <= 2 ? 0.0 : chain_beta_sup(ctx, ch);
  };
  r.lhs = beta_diam(tau);
  const int K = f.n_max() - n;
  for (int k = 0; k < K; ++k) {
    double best = 0.0;
    for (size_t j : children(f, n, i, k)) best = std::max(best, d_tau(ctx, c, f, n + k, j));
    r.d.push_back(best);
  }
  double maxdiam = 0.0;
  for (size_t j : children(f, n, i, K)) {
    const FArc& z = f.arc(n + K, j);
    r.remainder = std::max(r.remainder, beta_diam(z));
    maxdiam = std::max(maxdiam, z.diam);
  }
  r.tail_bound = 2 * maxdiam;
  const double sum = std::accumulate(r.d.begin(), r.d.end(), 0.0);
  r.ok = r.lhs <= sum + r.remainder + 1e-9 * tau.diam && r.remainder <= r.tail_bound * (1 + 1e-9);
  return r;
}

double mod_prop4_log2_constant(int J, double eta) {
  return std::log2(1e14) + 4.0 * J + 64.0 - 2.0 * std::log2(eta);
}

ModProp4Report modified_prop4(const MetricCtx& ctx, const Curve& c, const Filtration& f, int n,
                              size_t i, double log2_C) {
  ModProp4Report r;
  const FArc& tau = f.arc(n, i);
  if (n + 2 > f.n_max()) return r;
  r.applicable = true;
  double sum = 0.0;
  for (size_t j : children(f, n, i, 2)) sum += f.arc(n + 2, j).chord;
  r.excess = sum - tau.chord;
  r.allowance = kChordRelTol * std::max(sum, tau.chord);
  const double dt = d_tau(ctx, c, f, n, i);
  r.lhs = tau.diam > 0 ? std::pow(dt, 4) / std::pow(tau.diam, 3) : 0.0;
  const double room = std::max(r.excess, 0.0) + r.allowance;
  r.log2_rhs = room > 0 ? log2_C + std::log2(room) : -std::numeric_limits<double>::infinity();
  r.ok = r.lhs == 0.0 || std::log2(r.lhs) <= r.log2_rhs;
  return r;
}

std::string filtration_json(const Filtration& f) {
  nlohmann::json j;
  j["schema"] = "heis-tsp/1";
  j["J"] = f.J;
  j["delta"] = f.delta;
  j["L"] = f.L;
  j["m"] = f.m;
  j["T"] = f.T;
  nlohmann::json levels = nlohmann::json::array();
  for (int n = f.m; n <= f.n_max(); ++n) {
    nlohmann::json arcs = nlohmann::json::array();
    const auto& lv = f.level(n);
    for (size_t i = 0; i < lv.size(); ++i) {
      const FArc& x = lv[i];
      arcs.push_back({{"id", i},
                      {"a", x.dom.a},
                      {"b", x.dom.b},
                      {"full", x.dom.full},
                      {"diam", x.diam},
                      {"parent", x.parent},
                      {"source", x.source}});
    }
    levels.push_back({{"level", n}, {"unit", f.unit(n)}, {"arcs", arcs}});
  }
  j["levels"] = levels;
  return j.dump();
}

}  // namespace heis
