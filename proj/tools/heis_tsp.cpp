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

// heis-tsp command-line front end; talks to the library only through the C API.

#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "heis_tsp.h"

namespace {

enum Exit { kOk = 0, kUsage = 1, kViolations = 2, kIo = 3 };

struct Params {
  heis_params* p = nullptr;
  Params() { heis_params_new(&p); }
  ~Params() { heis_params_free(p); }
};

struct CurveHandle {
  heis_curve* c = nullptr;
  ~CurveHandle() { heis_curve_free(c); }
};

struct CString {
  char* s = nullptr;
  ~CString() { heis_string_free(s); }
};

int exit_for(heis_status s) {
  std::fprintf(stderr, "error: %s\n", heis_last_error());
  switch (s) {
    case HEIS_E_IO: return kIo;
    case HEIS_E_INVALID:
    case HEIS_E_UNKNOWN:
    case HEIS_E_DOMAIN:
    case HEIS_E_HYPOTHESIS: return kUsage;
    default: return kIo;
  }
}

// Flag values by parameter key; only flags given on the command line are applied.
struct Flags {
  std::map<std::string, std::string> values;
  std::string config;
  std::string out;
  std::string format = "csv";

  void add(CLI::App* app, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        "--" + key, [this, key](const std::string& v) { values[key] = v; }, help);
  }

  // Config file first, then command-line flags on top.
  int apply(heis_params* p) const {
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) {
        std::fprintf(stderr, "error: cannot open %s\n", config.c_str());
        return kIo;
      }
      std::stringstream ss;
      ss << in.rdbuf();
      if (heis_status s = heis_params_load_config(p, ss.str().c_str()); s != HEIS_OK)
        return exit_for(s);
    }
    for (const auto& [k, v] : values)
      if (heis_status s = heis_params_set(p, k.c_str(), v.c_str()); s != HEIS_OK) return exit_for(s);
    if (heis_status s = heis_params_validate(p); s != HEIS_OK) return exit_for(s);
    return kOk;
  }
};

void add_common(CLI::App* app, Flags& f) {
  for (const auto& [k, h] : std::vector<std::pair<std::string, std::string>>{
           {"eta", "Koranyi parameter in (0,16]"},
           {"epsilon", "curvature-inequality epsilon in (0,1/2)"},
           {"eps0", "flatness threshold"},
           {"A", "ball dilation A > 2"},
           {"J", "scale step J >= 10"},
           {"kappa", "family separation"},
           {"delta", "filtration gap threshold in (0,1)"},
           {"depth", "number of net scales"},
           {"stages", "oscillation stages"},
           {"q", "oscillation exponent"},
           {"c", "oscillation amplitude"},
           {"M", "martingale depth parameter"},
           {"samples", "Monte-Carlo sample count"},
           {"seed", "random seed"}})
    f.add(app, k, h);
  app->add_option("--config", f.config, "key=value parameter file");
}

int write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return kOk;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    std::fprintf(stderr, "error: cannot open %s for writing\n", path.c_str());
    return kIo;
  }
  out << text;
  out.close();
  if (!out) {
    std::fprintf(stderr, "error: write failed for %s\n", path.c_str());
    return kIo;
  }
  return kOk;
}

double eta_of(const Flags& f) {
  auto it = f.values.find("eta");
  return it == f.values.end() ? 1.0 : std::stod(it->second);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale flatness analysis of curves in the Heisenberg group"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(heis_version()));

  // gen
  Flags gen_f;
  std::string gen_kind = "oscillating";
  auto* gen = app.add_subcommand("gen", "write a generated curve to a file");
  add_common(gen, gen_f);
  gen->add_option("--kind", gen_kind, "oscillating|segment|circle|square|walk");
  gen->add_option("--out", gen_f.out, "output curve file")->required();

  // beta
  Flags beta_f;
  std::string beta_curve;
  std::vector<double> center;
  double radius = 0.0;
  auto* beta = app.add_subcommand("beta", "beta number of a curve in one ball");
  add_common(beta, beta_f);
  beta->add_option("curve,--curve", beta_curve, "curve file")->required();
  beta->add_option("--center", center, "ball center x y z")->expected(3)->required();
  beta->add_option("--radius", radius, "ball radius")->required();

  // sum
  Flags sum_f;
  std::string sum_curve;
  auto* sum = app.add_subcommand("sum", "multiscale sums of beta^p diam");
  add_common(sum, sum_f);
  sum->add_option("curve,--curve", sum_curve, "curve file")->required();
  sum->add_option("--out", sum_f.out, "output file (default stdout)");
  sum->add_option("--format", sum_f.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  sum->add_option_function<std::string>(
      "--p", [&](const std::string& v) { sum_f.values["p"] = v; }, "exponents, comma separated");

  // verify
  Flags ver_f;
  std::string which;
  auto* ver = app.add_subcommand("verify", "Monte-Carlo checks of the inequalities");
  add_common(ver, ver_f);
  ver->add_option("check", which, "prop4|lemmas|martingale")
      ->required()
      ->check(CLI::IsMember({"prop4", "lemmas", "martingale"}));
  ver->add_option("--out", ver_f.out, "JSON report file (default stdout)");

  // filtration
  Flags fil_f;
  auto* fil = app.add_subcommand("filtration", "build and audit a filtration");
  add_common(fil, fil_f);
  fil->add_option("--out", fil_f.out, "JSON report file (default stdout)");

  // report
  std::vector<std::string> inputs;
  std::string rep_out;
  auto* rep = app.add_subcommand("report", "merge CSV results sharing one header");
  rep->add_option("inputs", inputs, "CSV files")->required();
  rep->add_option("--out", rep_out, "merged CSV")->required();

  // experiment
  Flags exp_f;
  std::string exp_name;
  auto* exp = app.add_subcommand("experiment", "run a preset and write results to a directory");
  add_common(exp, exp_f);
  exp->add_option("name", exp_name,
                  "dichotomy|mainbound|prop4|lemmas|martingale|filtration-audit")
      ->required();
  exp->add_option("--out", exp_f.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  Params P;
  auto apply = [&](const Flags& f) { return f.apply(P.p); };

  if (gen->parsed()) {
    if (int rc = apply(gen_f)) return rc;
    CurveHandle c;
    if (heis_status s = heis_curve_generate(gen_kind.c_str(), P.p, &c.c); s != HEIS_OK)
      return exit_for(s);
    if (heis_status s = heis_curve_write(c.c, gen_f.out.c_str()); s != HEIS_OK) return exit_for(s);
    return kOk;
  }
  if (beta->parsed()) {
    if (int rc = apply(beta_f)) return rc;
    CurveHandle c;
    if (heis_status s = heis_curve_read(beta_curve.c_str(), eta_of(beta_f), &c.c); s != HEIS_OK)
      return exit_for(s);
    double b = 0.0;
    if (heis_status s = heis_beta_ball(c.c, eta_of(beta_f), center.data(), radius, &b);
        s != HEIS_OK)
      return exit_for(s);
    std::printf("%.12g\n", b);
    return kOk;
  }
  if (sum->parsed()) {
    if (int rc = apply(sum_f)) return rc;
    CurveHandle c;
    if (heis_status s = heis_curve_read(sum_curve.c_str(), eta_of(sum_f), &c.c); s != HEIS_OK)
      return exit_for(s);
    CString csv, json;
    if (heis_status s = heis_beta_sum(c.c, P.p, &csv.s, &json.s); s != HEIS_OK) return exit_for(s);
    return write_text(sum_f.out, sum_f.format == "csv" ? csv.s : std::string(json.s) + "\n");
  }
  if (ver->parsed()) {
    if (int rc = apply(ver_f)) return rc;
    CString json;
    long violations = 0;
    if (heis_status s = heis_verify(which.c_str(), P.p, &json.s, &violations); s != HEIS_OK)
      return exit_for(s);
    if (int rc = write_text(ver_f.out, std::string(json.s) + "\n")) return rc;
    return violations > 0 ? kViolations : kOk;
  }
  if (fil->parsed()) {
    if (int rc = apply(fil_f)) return rc;
    CString json;
    int ok = 0;
    if (heis_status s = heis_filtration_audit(P.p, &json.s, &ok); s != HEIS_OK) return exit_for(s);
    if (int rc = write_text(fil_f.out, std::string(json.s) + "\n")) return rc;
    return ok ? kOk : kViolations;
  }
  if (rep->parsed()) {
    std::vector<const char*> ptrs;
    for (const auto& s : inputs) ptrs.push_back(s.c_str());
    if (heis_status s = heis_merge_csv(ptrs.data(), ptrs.size(), rep_out.c_str()); s != HEIS_OK)
      return exit_for(s);
    return kOk;
  }
  if (exp->parsed()) {
    if (int rc = apply(exp_f)) return rc;
    int violations = 0;
    if (heis_status s = heis_run_experiment(exp_name.c_str(), P.p, exp_f.out.c_str(), &violations);
        s != HEIS_OK)
      return exit_for(s);
    return violations ? kViolations : kOk;
  }
  return kUsage;
}
