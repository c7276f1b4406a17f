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

#include "heis/analyze.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace heis {

using nlohmann::json;

std::string fmt12(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, r.ptr);
}

namespace {

// Value rounded to 12 significant digits, so JSON and CSV agree.
double r12(double v) {
  if (!std::isfinite(v)) return v;
  const std::string s = fmt12(v);
  double out = v;
  std::from_chars(s.data(), s.data() + s.size(), out);
  return out;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = b + v.size();
  auto r = std::from_chars(b, e, out);
  if (r.ec != std::errc() || r.ptr != e) throw std::invalid_argument(key + ": not a number: " + v);
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const char* b = v.data();
  const char* e = b + v.size();
  auto r = std::from_chars(b, e, out);
  if (r.ec != std::errc() || r.ptr != e) throw std::invalid_argument(key + ": not an integer: " + v);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> with_required(std::vector<double> p) {
  p.push_back(2.0);
  p.push_back(4.0);
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  return p;
}

template <class F>
void parallel_for(size_t n, F&& f) {
  const size_t workers = std::min<size_t>(worker_threads(), n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto run = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!err) err = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// Sorted edge indices forming one run along a single horizontal line.
bool one_straight_run(const Curve& c, const std::vector<size_t>& edges) {
  if (edges.size() <= 1) return true;
  const Point& d0 = c.inc[edges[0]];
  const double l0 = std::hypot(d0.x, d0.y);
  for (size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] != edges[i - 1] + 1) return false;
    const Point& d = c.inc[edges[i]];
    const double l = std::hypot(d.x, d.y);
    if (d.x * l0 != d0.x * l || d.y * l0 != d0.y * l) return false;
  }
  return true;
}

// Bulk sums: one start, a loose simplex and r/8 sampling with exact sphere crossings. Against
// a dense r/64 multistart fit the per-scale sums come out ~0.5% (p=2) to ~0.8% (p=4) low,
// a bias shared by every curve and scale.
BetaOptions sum_options() {
  BetaOptions o;
  o.starts = 1;
  o.seed_points = 4;
  o.max_iter = 150;
  o.tol = 1e-4;
  o.subset = 64;
  return o;
}

constexpr double kSumSpacing = 1.0 / 8.0;  // sample spacing as a fraction of r

double ball_beta(const MetricCtx& ctx, const EdgeIndex& idx, const Ball& B) {
  // The planar prefilter keeps edges that cross B's shadow at another height.
  std::vector<size_t> edges;
  for (size_t k : idx.edges_near(B))
    if (dist_point_to_segment_fast(ctx, B.center, idx.curve().edge_segment(k)) <= B.radius)
      edges.push_back(k);
  std::sort(edges.begin(), edges.end());
  if (one_straight_run(idx.curve(), edges)) return 0.0;
  const auto pts = curve_points_in_ball(ctx, idx, B, B.radius * kSumSpacing);
  if (pts.empty()) return 0.0;
  return beta_of_points(ctx, pts, B, sum_options()).beta;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write failed for " + p.string());
}

}  // namespace

// ---- parameters ----

void ParamSet::validate() const {
  auto bad = [](const std::string& m) { throw std::invalid_argument(m); };
  if (!(A > 2)) bad("A must exceed 2");
  if (J < 10) bad("J must be at least 10");
  if (!(kappa > 0)) bad("kappa must be positive");
  if (!(delta > 0 && delta < 1)) bad("delta must lie in (0,1)");
  if (!(eps0 > 0 && eps0 < 1)) bad("eps0 must lie in (0,1)");
  if (!(eta > 0 && eta <= 16)) bad("eta must lie in (0,16]");
  if (!(epsilon > 0 && epsilon < 0.5)) bad("epsilon must lie in (0,1/2)");
  if (M < 0) bad("M must be non-negative");
  if (net_depth < 1) bad("net_depth must be at least 1");
  if (p_exponents.empty()) bad("p_exponents must not be empty");
  for (double p : p_exponents)
    if (!(p > 0)) bad("exponents must be positive");
  if (!(q > 0)) bad("q must be positive");
  if (!(c > 0)) bad("c must be positive");
  if (stages < 0) bad("stages must be non-negative");
  if (samples < 0) bad("samples must be non-negative");
}

void ParamSet::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "A") A = parse_double(key, v);
  else if (key == "J") J = int(parse_int(key, v));
  else if (key == "kappa") kappa = parse_double(key, v);
  else if (key == "delta") delta = parse_double(key, v);
  else if (key == "eps0") eps0 = parse_double(key, v);
  else if (key == "eta") eta = parse_double(key, v);
  else if (key == "epsilon") epsilon = parse_double(key, v);
  else if (key == "M") M = int(parse_int(key, v));
  else if (key == "seed") seed = uint64_t(parse_int(key, v));
  else if (key == "net_depth" || key == "depth") net_depth = int(parse_int(key, v));
  else if (key == "q") q = parse_double(key, v);
  else if (key == "c") c = parse_double(key, v);
  else if (key == "stages") stages = int(parse_int(key, v));
  else if (key == "samples") samples = long(parse_int(key, v));
  else if (key == "p_exponents" || key == "p") {
    std::vector<double> ps;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) ps.push_back(parse_double(key, trim(item)));
    p_exponents = ps;
  } else {
    throw std::invalid_argument("unknown parameter: " + key);
  }
}

void ParamSet::load_config(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    set(key, line.substr(eq + 1));
  }
}

std::string ParamSet::json() const {
  nlohmann::ordered_json j;
  j["A"] = A;
  j["J"] = J;
  j["kappa"] = kappa;
  j["delta"] = delta;
  j["eps0"] = eps0;
  j["eta"] = eta;
  j["epsilon"] = epsilon;
  j["M"] = M;
  j["seed"] = seed;
  j["net_depth"] = net_depth;
  j["p_exponents"] = p_exponents;
  j["q"] = q;
  j["c"] = c;
  j["stages"] = stages;
  j["samples"] = samples;
  return j.dump();
}

unsigned worker_threads() {
  if (const char* s = std::getenv("HEIS_TSP_THREADS")) {
    const long v = std::strtol(s, nullptr, 10);
    if (v > 0) return unsigned(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---- sums ----

double Report::total(double p) const {
  const auto& ps = params.p_exponents;
  for (size_t i = 0; i < ps.size(); ++i)
    if (ps[i] == p) return totals[i];
  throw std::invalid_argument("exponent " + fmt12(p) + " was not computed");
}

std::string Report::csv() const {
  const auto& ps = params.p_exponents;
  const size_t i2 = size_t(std::find(ps.begin(), ps.end(), 2.0) - ps.begin());
  const size_t i4 = size_t(std::find(ps.begin(), ps.end(), 4.0) - ps.begin());
  std::string out = "n,balls,sum_p2,sum_p4,length_ratio_p4\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + "," + std::to_string(r.balls) + "," + fmt12(r.partial[i2]) + "," +
           fmt12(r.partial[i4]) + "," + fmt12(r.partial[i4] / length) + "\n";
  }
  return out;
}

std::string Report::json() const {
  nlohmann::ordered_json j;
  j["schema"] = "heis-tsp/1";
  j["kind"] = "beta_sum";
  j["params"] = json::parse(params.json());
  j["length"] = r12(length);
  j["normalize_factor"] = r12(normalize_factor);
  j["curve_points"] = curve_points;
  j["created"] = created;
  auto& rs = j["rows"] = json::array();
  const auto& ps = params.p_exponents;
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["n"] = r.n;
    row["balls"] = r.balls;
    for (size_t i = 0; i < ps.size(); ++i) {
      row["level_p" + fmt12(ps[i])] = r12(r.level[i]);
      row["sum_p" + fmt12(ps[i])] = r12(r.partial[i]);
    }
    rs.push_back(row);
  }
  for (size_t i = 0; i < ps.size(); ++i) {
    j["totals"]["p" + fmt12(ps[i])] = r12(totals[i]);
    j["ratios"]["p" + fmt12(ps[i])] = r12(totals[i] / length);
  }
  return j.dump(2);
}

BetaResult beta_curve_ball(const MetricCtx& ctx, const Curve& c, const Ball& B) {
  const auto pts = curve_points_in_ball(ctx, c, B, B.radius / 32.0);
  if (pts.empty()) throw std::domain_error("the curve misses the ball");
  return beta_of_points(ctx, pts, B);
}

Report beta_sum(const Curve& curve, const ParamSet& params) {
  params.validate();
  const MetricCtx ctx(params.eta);
  Report rep;
  rep.params = params;
  rep.params.p_exponents = with_required(params.p_exponents);
  rep.created = utc_now();
  const auto& ps = rep.params.p_exponents;

  const Curve c = normalize_curve(ctx, curve, &rep.normalize_factor);
  rep.length = curve_length(ctx, c);
  const int n0 = first_G_level(params.A);
  const int n1 = n0 + params.net_depth - 1;
  // Seed set: curve samples dense enough that every net covers the image.
  const Curve dense = densify(c, std::ldexp(1.0, -(n1 + 2)));
  rep.curve_points = dense.size();
  const auto nets = build_nets(ctx, dense.p, n0, n1);
  const auto balls = filter_G(multiresolution(nets, dense.p, params.A));

  const EdgeIndex idx(c);
  std::vector<double> beta(balls.size(), 0.0);
  parallel_for(balls.size(), [&](size_t i) { beta[i] = ball_beta(ctx, idx, balls[i]); });

  std::vector<double> run(ps.size(), 0.0);
  for (int n = n0; n <= n1; ++n) {
    ScaleRow row;
    row.n = n;
    row.level.assign(ps.size(), 0.0);
    for (size_t i = 0; i < balls.size(); ++i) {
      if (balls[i].level != n) continue;
      ++row.balls;
      const double diam = 2.0 * balls[i].radius;
      for (size_t k = 0; k < ps.size(); ++k) row.level[k] += std::pow(beta[i], ps[k]) * diam;
    }
    for (size_t k = 0; k < ps.size(); ++k) run[k] += row.level[k];
    row.partial = run;
    rep.rows.push_back(std::move(row));
  }
  rep.totals = run;
  return rep;
}

// ---- experiments ----

int dichotomy_depth(int stage, const ParamSet& params) {
  // Finest tent edge 2^{-(b+stage)} after normalization; stop at the first radius below it.
  const int n0 = first_G_level(params.A);
  const int n1 = kDichotomyBaseLevels + stage + int(std::ceil(std::log2(params.A)));
  return std::max(1, n1 - n0 + 1);
}

std::vector<DichotomyRow> dichotomy(const ParamSet& params, const std::vector<int>& stages) {
  std::vector<DichotomyRow> out;
  for (int s : stages) {
    const auto o = gen_oscillating(params.q, params.c, s, 1.0, 1 << kDichotomyBaseLevels);
    ParamSet p = params;
    p.net_depth = dichotomy_depth(s, params);
    const Report r = beta_sum(o.curve, p);
    DichotomyRow row;
    row.stage = s;
    row.depth = p.net_depth;
    row.length = curve_length(MetricCtx(params.eta), o.curve);
    row.length_bound = o.length_bound;
    row.sum_p2 = r.total(2.0);
    row.sum_p4 = r.total(4.0);
    out.push_back(row);
  }
  return out;
}

double CorpusRow::rel_change() const {
  if (ratio_lo == 0.0) return ratio_hi == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::fabs(ratio_hi - ratio_lo) / ratio_lo;
}

std::vector<std::pair<std::string, Curve>> analysis_corpus(uint64_t seed) {
  std::vector<std::pair<std::string, Curve>> out;
  out.emplace_back("segment", gen_segment(1.0));
  out.emplace_back("circle", gen_lifted_circle(64));
  out.emplace_back("square", gen_lifted_square(1.0));
  out.emplace_back("walk", gen_random_walk(32, 1.0, seed));
  out.emplace_back("oscillating", gen_oscillating(0.6, 0.5, 4, 1.0).curve);
  return out;
}

std::vector<CorpusRow> main_bound(const ParamSet& params) {
  std::vector<CorpusRow> out;
  for (const auto& [name, curve] : analysis_corpus(params.seed)) {
    ParamSet lo = params, hi = params;
    hi.net_depth = params.net_depth + 2;
    const Report a = beta_sum(curve, lo);
    const Report b = beta_sum(curve, hi);
    out.push_back({name, a.length, a.ratio(4.0), b.ratio(4.0)});
  }
  return out;
}

bool AuditRun::ok() const {
  return pre.ok() && filt.ok() && telescope_failures == 0 && lemma8_worst >= -1e-10;
}

std::string AuditRun::json() const {
  nlohmann::ordered_json j;
  j["schema"] = "heis-tsp/1";
  j["kind"] = "filtration-audit";
  j["families"] = families;
  j["cubes"] = cubes;
  j["arcs"] = arcs;
  j["prefiltration"] = {{"arcs", pre.arcs},
                        {"diam_violations", pre.diam_violations},
                        {"disjoint_violations", pre.disjoint_violations},
                        {"nested_violations", pre.nested_violations}};
  j["filtration"] = {{"arcs", filt.arcs},        {"p1", filt.p1}, {"p2", filt.p2},
                     {"p3", filt.p3},            {"p4", filt.p4}, {"p5", filt.p5},
                     {"p6", filt.p6},            {"chord_sum", filt.chord_sum},
                     {"worst_chord_ratio", r12(filt.worst_chord_ratio)}};
  j["telescoped"] = telescoped;
  j["telescope_failures"] = telescope_failures;
  j["lemma8_arcs"] = lemma8_arcs;
  j["lemma8_worst_slack"] = r12(lemma8_worst);
  j["ok"] = ok();
  return j.dump(2);
}

AuditRun filtration_audit(const ParamSet& params, const std::vector<int>& levels) {
  params.validate();
  if (levels.empty()) throw std::invalid_argument("no levels");
  const MetricCtx ctx(params.eta);
  const auto o = gen_oscillating(params.q, params.c, params.stages, 1.0);
  const Curve c = close_by_retrace(densify(o.curve, 2e-3));
  const EdgeIndex idx(c);
  const int lo = *std::min_element(levels.begin(), levels.end());
  const int hi = *std::max_element(levels.begin(), levels.end());
  std::vector<Ball> keep;
  for (const auto& b : multiresolution(build_nets(ctx, c.p, lo, hi), c.p, params.A))
    if (std::find(levels.begin(), levels.end(), b.level) != levels.end()) keep.push_back(b);
  const auto ff = family_forests(ctx, keep, params.J, params.kappa, 2 * params.A);

  AuditRun run;
  run.families = ff.forests.size();
  // The largest family holding a coarse-level ball.
  size_t fam = 0, best = 0;
  for (size_t i = 0; i < ff.forests.size(); ++i) {
    bool has = false;
    for (const auto& b : ff.forests[i].balls) has |= b.level == lo;
    if (has && ff.forests[i].balls.size() > best) {
      fam = i;
      best = ff.forests[i].balls.size();
    }
  }
  for (const auto& f : ff.forests) run.cubes += f.cubes.size();
  const auto& forest = ff.forests.at(fam);
  const auto pre = prefiltration_from_cubes(ctx, idx, forest);
  run.pre = audit_prefiltration(ctx, c, pre);
  const auto f = complete_filtration(ctx, c, pre, params.delta);
  run.filt = audit_filtration(ctx, c, pre, f);
  run.arcs = f.size();
  for (size_t i = 0; i < f.level(f.m).size(); ++i) {
    ++run.telescoped;
    if (!telescope(ctx, c, f, f.m, i).ok) ++run.telescope_failures;
  }
  for (int lv = f.m; lv <= f.n_max(); ++lv)
    for (const auto& a : f.level(lv)) {
      if (!(a.diam > 0)) continue;
      const auto r = check_lemma8(ctx, c, carc_measure(ctx, c, a.dom));
      run.lemma8_worst = run.lemma8_arcs == 0 ? r.slack / r.diam
                                              : std::min(run.lemma8_worst, r.slack / r.diam);
      ++run.lemma8_arcs;
    }
  return run;
}

namespace {

std::string lemma_json(const LemmaReport& r) {
  nlohmann::ordered_json j;
  j["trials"] = r.trials;
  j["violations"] = r.violations;
  j["min_slack"] = r12(r.min_slack);
  return j.dump();
}

std::string martingale_json(const MartingaleReport& r) {
  nlohmann::ordered_json j;
  j["nodes"] = r.nodes;
  j["prop_i_failures"] = r.prop_i;
  j["prop_iii_failures"] = r.prop_iii;
  j["conservation_failures"] = r.conservation;
  j["chop_ratio_ok"] = r.chop_ratio_ok;
  j["density_samples"] = r.density_samples;
  j["max_density"] = r12(r.max_density);
  j["density_bound"] = r12(r.density_bound);
  j["q"] = r12(r.q);
  j["sum_diam"] = r12(r.sum_diam);
  j["sum_bound"] = r12(r.sum_bound);
  j["ok"] = r.ok();
  return j.dump();
}

}  // namespace

ExperimentResult run_experiment(const std::string& name, const ParamSet& params,
                                const std::string& out_dir) {
  static const std::vector<std::string> known{"dichotomy", "mainbound",  "prop4",
                                              "lemmas",    "martingale", "filtration-audit"};
  if (std::find(known.begin(), known.end(), name) == known.end())
    throw UnknownExperiment("unknown experiment: " + name);
  params.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  const fs::path dir(out_dir);

  ExperimentResult res;
  auto emit = [&](const std::string& file, const std::string& text) {
    write_file(dir / file, text);
    res.files.push_back(file);
  };
  nlohmann::ordered_json extra;

  if (name == "dichotomy") {
    std::vector<int> stages;
    for (int s = 2; s <= std::max(8, params.stages); s += 2) stages.push_back(s);
    const auto rows = dichotomy(params, stages);
    std::string csv = "stage,length,sum_p2,sum_p4\n";
    nlohmann::ordered_json j;
    j["schema"] = "heis-tsp/1";
    j["kind"] = "dichotomy";
    auto& arr = j["rows"] = json::array();
    for (const auto& r : rows) {
      csv += std::to_string(r.stage) + "," + fmt12(r.length) + "," + fmt12(r.sum_p2) + "," +
             fmt12(r.sum_p4) + "\n";
      arr.push_back({{"stage", r.stage},
                     {"depth", r.depth},
                     {"length", r12(r.length)},
                     {"length_bound", r12(r.length_bound)},
                     {"sum_p2", r12(r.sum_p2)},
                     {"sum_p4", r12(r.sum_p4)}});
    }
    emit("dichotomy.csv", csv);
    emit("dichotomy.json", j.dump(2));
  } else if (name == "mainbound") {
    const auto rows = main_bound(params);
    std::string csv = "curve,length,ratio_p4_depth_lo,ratio_p4_depth_hi,rel_change\n";
    nlohmann::ordered_json j;
    j["schema"] = "heis-tsp/1";
    j["kind"] = "mainbound";
    j["depth_lo"] = params.net_depth;
    j["depth_hi"] = params.net_depth + 2;
    auto& arr = j["rows"] = json::array();
    for (const auto& r : rows) {
      csv += r.curve + "," + fmt12(r.length) + "," + fmt12(r.ratio_lo) + "," + fmt12(r.ratio_hi) +
             "," + fmt12(r.rel_change()) + "\n";
      arr.push_back({{"curve", r.curve},
                     {"length", r12(r.length)},
                     {"ratio_lo", r12(r.ratio_lo)},
                     {"ratio_hi", r12(r.ratio_hi)},
                     {"rel_change", r12(r.rel_change())}});
    }
    emit("mainbound.csv", csv);
    emit("mainbound.json", j.dump(2));
  } else if (name == "prop4") {
    const auto cfg = CurvatureConfig::with_default_eta(params.epsilon, params.samples, params.seed);
    const auto r = verify_prop4(cfg);
    res.violations = r.violations > 0;
    emit("prop4.json", r.json());
  } else if (name == "lemmas") {
    const MetricCtx ctx(params.eta);
    const auto a = verify_concave_power(params.samples, params.seed);
    const auto b = verify_power_curvature(ctx, params.samples, params.seed + 1);
    res.violations = a.violations + b.violations > 0;
    nlohmann::ordered_json j;
    j["schema"] = "heis-tsp/1";
    j["kind"] = "lemmas";
    j["concave_power"] = json::parse(lemma_json(a));
    j["power_curvature"] = json::parse(lemma_json(b));
    emit("lemmas.json", j.dump(2));
  } else if (name == "martingale") {
    auto t = random_martingale_tree(6, params.M, params.eps0, 1.0, params.seed);
    const auto r = verify_martingale(t, size_t(std::max<long>(params.samples, 1)), params.seed);
    res.violations = !r.ok();
    nlohmann::ordered_json j;
    j["schema"] = "heis-tsp/1";
    j["kind"] = "martingale";
    j["M"] = params.M;
    j["J_M"] = martingale_J(params.M, params.eps0);
    j["report"] = json::parse(martingale_json(r));
    emit("martingale.json", j.dump(2));
  } else {
    const int coarse = first_G_level(params.A);
    const auto r = filtration_audit(params, {coarse, coarse + params.J});
    res.violations = !r.ok();
    emit("filtration-audit.json", r.json());
  }

  nlohmann::ordered_json m;
  m["schema"] = "heis-tsp/1";
  m["experiment"] = name;
  m["params"] = json::parse(params.json());
  m["seed"] = params.seed;
  m["threads"] = worker_threads();
  m["files"] = res.files;
  m["violations"] = res.violations;
  m["created"] = utc_now();
  write_file(dir / "manifest.json", m.dump(2));
  res.files.push_back("manifest.json");
  return res;
}

}  // namespace heis
