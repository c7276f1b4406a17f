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

#include "heis_tsp.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "heis/analyze.hpp"
#include "json.hpp"

struct heis_params {
  heis::ParamSet p;
};

struct heis_curve {
  heis::Curve c;
};

namespace {

thread_local std::string g_error;

heis_status fail(heis_status s, const std::string& msg) {
  g_error = msg;
  return s;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Runs f, translating exceptions into status codes.
template <class F>
heis_status guarded(F&& f) {
  try {
    g_error.clear();
    return f();
  } catch (const heis::IoError& e) {
    return fail(HEIS_E_IO, e.what());
  } catch (const heis::UnknownExperiment& e) {
    return fail(HEIS_E_UNKNOWN, e.what());
  } catch (const heis::HypothesisError& e) {
    return fail(HEIS_E_HYPOTHESIS, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(HEIS_E_INVALID, e.what());
  } catch (const std::domain_error& e) {
    return fail(HEIS_E_DOMAIN, e.what());
  } catch (const std::exception& e) {
    return fail(HEIS_E_INTERNAL, e.what());
  } catch (...) {
    return fail(HEIS_E_INTERNAL, "unknown exception");
  }
}

#define HEIS_REQUIRE(cond, msg) \
  if (!(cond)) return fail(HEIS_E_INVALID, msg)

// The gauge is a metric only for eta <= 16.
#define HEIS_REQUIRE_ETA(eta) HEIS_REQUIRE((eta) > 0 && (eta) <= 16, "eta must lie in (0,16]")

}  // namespace

extern "C" {

const char* heis_version(void) { return "1.0.0"; }

const char* heis_last_error(void) { return g_error.c_str(); }

const char* heis_status_name(heis_status s) {
  switch (s) {
    case HEIS_OK: return "ok";
    case HEIS_E_INVALID: return "invalid argument";
    case HEIS_E_IO: return "i/o error";
    case HEIS_E_DOMAIN: return "domain error";
    case HEIS_E_HYPOTHESIS: return "hypothesis not met";
    case HEIS_E_UNKNOWN: return "unknown name";
    case HEIS_E_INTERNAL: return "internal error";
  }
  return "unrecognized status";
}

void heis_string_free(char* s) { std::free(s); }

heis_status heis_params_new(heis_params** out) {
  HEIS_REQUIRE(out, "null output pointer");
  return guarded([&] {
    *out = new heis_params();
    return HEIS_OK;
  });
}

void heis_params_free(heis_params* p) { delete p; }

heis_status heis_params_set(heis_params* p, const char* key, const char* value) {
  HEIS_REQUIRE(p && key && value, "null argument");
  return guarded([&] {
    p->p.set(key, value);
    return HEIS_OK;
  });
}

heis_status heis_params_load_config(heis_params* p, const char* text) {
  HEIS_REQUIRE(p && text, "null argument");
  return guarded([&] {
    p->p.load_config(text);
    return HEIS_OK;
  });
}

heis_status heis_params_validate(const heis_params* p) {
  HEIS_REQUIRE(p, "null params");
  return guarded([&] {
    p->p.validate();
    return HEIS_OK;
  });
}

heis_status heis_params_json(const heis_params* p, char** out) {
  HEIS_REQUIRE(p && out, "null argument");
  return guarded([&] {
    *out = dup(p->p.json());
    return HEIS_OK;
  });
}

heis_status heis_distance(double eta, const double a[3], const double b[3], double* out) {
  HEIS_REQUIRE(a && b && out, "null argument");
  HEIS_REQUIRE_ETA(eta);
  return guarded([&] {
    const heis::MetricCtx ctx(eta);
    *out = heis::distance(ctx, {a[0], a[1], a[2]}, {b[0], b[1], b[2]});
    return HEIS_OK;
  });
}

heis_status heis_curve_generate(const char* kind, const heis_params* p, heis_curve** out) {
  HEIS_REQUIRE(kind && p && out, "null argument");
  return guarded([&] {
    const auto& ps = p->p;
    const std::string k = kind;
    heis::Curve c;
    if (k == "oscillating") {
      if (ps.stages < 0) throw std::invalid_argument("stages must be non-negative");
      c = heis::gen_oscillating(ps.q, ps.c, ps.stages, 1.0).curve;
    } else if (k == "segment") {
      c = heis::gen_segment(1.0);
    } else if (k == "circle") {
      c = heis::gen_lifted_circle(64);
    } else if (k == "square") {
      c = heis::gen_lifted_square(1.0);
    } else if (k == "walk") {
      c = heis::gen_random_walk(32, 1.0, ps.seed);
    } else {
      return fail(HEIS_E_UNKNOWN, "unknown generator: " + k);
    }
    *out = new heis_curve{std::move(c)};
    return HEIS_OK;
  });
}

heis_status heis_curve_read(const char* path, double eta, heis_curve** out) {
  HEIS_REQUIRE(path && out, "null argument");
  HEIS_REQUIRE_ETA(eta);
  return guarded([&] {
    if (!std::ifstream(path)) return fail(HEIS_E_IO, std::string("cannot open ") + path);
    const heis::MetricCtx ctx(eta);
    try {
      *out = new heis_curve{heis::read_curve(ctx, path)};
    } catch (const std::runtime_error& e) {
      return fail(HEIS_E_INVALID, e.what());
    }
    return HEIS_OK;
  });
}

heis_status heis_curve_write(const heis_curve* c, const char* path) {
  HEIS_REQUIRE(c && path, "null argument");
  return guarded([&] {
    try {
      heis::write_curve(path, c->c);
    } catch (const std::runtime_error& e) {
      return fail(HEIS_E_IO, e.what());
    }
    return HEIS_OK;
  });
}

heis_status heis_curve_info(const heis_curve* c, double eta, size_t* points, double* length,
                            int* closed) {
  HEIS_REQUIRE(c, "null curve");
  HEIS_REQUIRE_ETA(eta);
  return guarded([&] {
    const heis::MetricCtx ctx(eta);
    if (points) *points = c->c.size();
    if (length) *length = heis::curve_length(ctx, c->c);
    if (closed) *closed = c->c.closed ? 1 : 0;
    return HEIS_OK;
  });
}

void heis_curve_free(heis_curve* c) { delete c; }

heis_status heis_beta_ball(const heis_curve* c, double eta, const double center[3], double radius,
                           double* beta) {
  HEIS_REQUIRE(c && center && beta, "null argument");
  HEIS_REQUIRE(radius > 0, "radius must be positive");
  HEIS_REQUIRE_ETA(eta);
  return guarded([&] {
    const heis::MetricCtx ctx(eta);
    const heis::Ball B{{center[0], center[1], center[2]}, radius, 0, 0};
    *beta = heis::beta_curve_ball(ctx, c->c, B).beta;
    return HEIS_OK;
  });
}

heis_status heis_beta_sum(const heis_curve* c, const heis_params* p, char** csv, char** json) {
  HEIS_REQUIRE(c && p, "null argument");
  return guarded([&] {
    const auto r = heis::beta_sum(c->c, p->p);
    if (csv) *csv = dup(r.csv());
    if (json) *json = dup(r.json());
    return HEIS_OK;
  });
}

heis_status heis_verify(const char* which, const heis_params* p, char** json, long* violations) {
  HEIS_REQUIRE(which && p, "null argument");
  return guarded([&] {
    const std::string w = which;
    const auto& ps = p->p;
    ps.validate();
    nlohmann::ordered_json j;
    long v = 0;
    if (w == "prop4") {
      const auto r = heis::verify_prop4(
          heis::CurvatureConfig::with_default_eta(ps.epsilon, ps.samples, ps.seed));
      v = r.violations;
      j = nlohmann::ordered_json::parse(r.json());
    } else if (w == "lemmas") {
      const heis::MetricCtx ctx(ps.eta);
      const auto a = heis::verify_concave_power(ps.samples, ps.seed);
      const auto b = heis::verify_power_curvature(ctx, ps.samples, ps.seed + 1);
      v = a.violations + b.violations;
      j["schema"] = "heis-tsp/1";
      j["kind"] = "lemmas";
      j["concave_power"] = {{"trials", a.trials}, {"violations", a.violations},
                            {"min_slack", a.min_slack}};
      j["power_curvature"] = {{"trials", b.trials}, {"violations", b.violations},
                              {"min_slack", b.min_slack}};
    } else if (w == "martingale") {
      auto t = heis::random_martingale_tree(6, ps.M, ps.eps0, 1.0, ps.seed);
      const auto r = heis::verify_martingale(t, size_t(std::max<long>(ps.samples, 1)), ps.seed);
      v = long(r.prop_i + r.prop_iii + r.conservation) + (r.ok() ? 0 : 1);
      j["schema"] = "heis-tsp/1";
      j["kind"] = "martingale";
      j["M"] = ps.M;
      j["nodes"] = r.nodes;
      j["prop_i_failures"] = r.prop_i;
      j["prop_iii_failures"] = r.prop_iii;
      j["conservation_failures"] = r.conservation;
      j["max_density"] = r.max_density;
      j["density_bound"] = r.density_bound;
      j["sum_diam"] = r.sum_diam;
      j["sum_bound"] = r.sum_bound;
      j["ok"] = r.ok();
    } else {
      return fail(HEIS_E_UNKNOWN, "unknown check: " + w);
    }
    if (violations) *violations = v;
    if (json) *json = dup(j.dump(2));
    return HEIS_OK;
  });
}

heis_status heis_filtration_audit(const heis_params* p, char** json, int* ok) {
  HEIS_REQUIRE(p, "null params");
  return guarded([&] {
    const int coarse = heis::first_G_level(p->p.A);
    const auto r = heis::filtration_audit(p->p, {coarse, coarse + p->p.J});
    if (ok) *ok = r.ok() ? 1 : 0;
    if (json) *json = dup(r.json());
    return HEIS_OK;
  });
}

heis_status heis_run_experiment(const char* name, const heis_params* p, const char* out_dir,
                                int* violations) {
  HEIS_REQUIRE(name && p && out_dir, "null argument");
  return guarded([&] {
    const auto r = heis::run_experiment(name, p->p, out_dir);
    if (violations) *violations = r.violations ? 1 : 0;
    return HEIS_OK;
  });
}

heis_status heis_merge_csv(const char* const* paths, size_t n, const char* out_path) {
  HEIS_REQUIRE(paths && out_path, "null argument");
  HEIS_REQUIRE(n > 0, "no input files");
  return guarded([&] {
    std::string header;
    std::ostringstream out;
    for (size_t i = 0; i < n; ++i) {
      std::ifstream in(paths[i]);
      if (!in) return fail(HEIS_E_IO, std::string("cannot open ") + paths[i]);
      std::string line;
      if (!std::getline(in, line)) return fail(HEIS_E_INVALID, std::string(paths[i]) + ": empty");
      if (i == 0) {
        header = line;
        out << "source," << header << "\n";
      } else if (line != header) {
        return fail(HEIS_E_INVALID, std::string(paths[i]) + ": header differs from " + paths[0]);
      }
      const std::string src = std::filesystem::path(paths[i]).stem().string();
      while (std::getline(in, line))
        if (!line.empty()) out << src << "," << line << "\n";
    }
    std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
    if (!f) return fail(HEIS_E_IO, std::string("cannot open ") + out_path + " for writing");
    f << out.str();
    f.close();
    if (!f) return fail(HEIS_E_IO, std::string("write failed for ") + out_path);
    return HEIS_OK;
  });
}

}  // extern "C"
