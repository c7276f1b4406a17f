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
#include "heis/verify.hpp"

namespace heis {

struct ParamSet {
  double A = 10.0;
  int J = 10;
  double kappa = 3.0;
  double delta = 1.0 / 1024.0;
  double eps0 = 0.01;
  double eta = 1.0;
  double epsilon = 0.05;
  int M = 3;
  uint64_t seed = 1;
  int net_depth = 6;
  std::vector<double> p_exponents{2.0, 4.0};
  // Generator and sampling knobs, so a config file can mirror every flag.
  double q = 0.6;
  double c = 0.5;
  int stages = 4;
  long samples = 10000;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  // Applies one key=value pair; unknown keys throw std::invalid_argument.
  void set(const std::string& key, const std::string& value);
  // Line-based key=value text; '#' starts a comment.
  void load_config(const std::string& text);
  std::string json() const;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScaleRow {
  int n = 0;
  size_t balls = 0;
  std::vector<double> level;    // sum over the balls of scale n, one per exponent
  std::vector<double> partial;  // cumulative through scale n
};

struct Report {
  ParamSet params;
  std::vector<ScaleRow> rows;
  std::vector<double> totals;  // one per exponent
  double length = 0.0;         // of the normalized curve
  double normalize_factor = 1.0;
  size_t curve_points = 0;
  std::string created;  // UTC timestamp; the only field that differs between reruns

  double total(double p) const;  // throws when p was not requested
  double ratio(double p) const { return total(p) / length; }
  std::string csv() const;  // n,balls,sum_p2,sum_p4,length_ratio_p4
  std::string json() const;
};

// Worker count: HEIS_TSP_THREADS if set and positive, else hardware concurrency.
unsigned worker_threads();

// beta_Gamma(B) for the curve image, sampled on the edges at spacing r/32.
BetaResult beta_curve_ball(const MetricCtx& ctx, const Curve& c, const Ball& B);

// Normalizes to diameter 1, builds nets on curve samples over scales
// first_G_level(A) .. +net_depth-1 and sums beta^p diam(B) per scale. Exponents 2 and 4
// are always included.
Report beta_sum(const Curve& curve, const ParamSet& params);

struct DichotomyRow {
  int stage = 0;
  int depth = 0;
  double length = 0.0;
  double length_bound = 0.0;
  double sum_p2 = 0.0;
  double sum_p4 = 0.0;
};
// The oscillating curve starts from 2^kDichotomyBaseLevels collinear pieces, so even the
// first-stage tents sit below the largest admitted radius 1/100 and every stage is seen at its
// own scale.
constexpr int kDichotomyBaseLevels = 8;
// Scales run from first_G_level(A) down to the first radius below the finest tent edge.
int dichotomy_depth(int stage, const ParamSet& params);
std::vector<DichotomyRow> dichotomy(const ParamSet& params, const std::vector<int>& stages);

struct CorpusRow {
  std::string curve;
  double length = 0.0;
  double ratio_lo = 0.0;  // sum beta^4 diam / length at net_depth
  double ratio_hi = 0.0;  // at net_depth + 2
  double rel_change() const;
};
std::vector<std::pair<std::string, Curve>> analysis_corpus(uint64_t seed);
std::vector<CorpusRow> main_bound(const ParamSet& params);

struct AuditRun {
  size_t families = 0;
  size_t cubes = 0;
  size_t arcs = 0;
  size_t telescoped = 0;
  size_t telescope_failures = 0;
  size_t lemma8_arcs = 0;
  double lemma8_worst = 0.0;  // min slack / diam
  PrefiltrationAudit pre;
  FiltrationAudit filt;
  bool ok() const;
  std::string json() const;
};
// Builds the family forests of a two-level multiresolution on a closed retraced oscillating
// curve, then the prefiltration and filtration of the family holding the coarse level, and
// audits them.
AuditRun filtration_audit(const ParamSet& params, const std::vector<int>& levels);

class UnknownExperiment : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentResult {
  std::vector<std::string> files;
  bool violations = false;
};

// name in {dichotomy, mainbound, prop4, lemmas, martingale, filtration-audit}. Writes
// <name>.csv and/or <name>.json plus manifest.json into out_dir.
ExperimentResult run_experiment(const std::string& name, const ParamSet& params,
                                const std::string& out_dir);

// 12 significant digits, '.' separator regardless of locale.
std::string fmt12(double v);

}  // namespace heis
