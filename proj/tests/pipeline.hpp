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

#include <algorithm>
#include <memory>
#include <vector>

#include "heis/curves.hpp"
#include "heis/filtration.hpp"
#include "heis/multires.hpp"

namespace heis::testing {

inline Curve closed_oscillating(int stages, double max_dt) {
  auto o = gen_oscillating(1.0, 0.4, stages, 1.0);
  return close_by_retrace(densify(o.curve, max_dt));
}

// Multiresolution on the curve samples restricted to the given levels, doubled and split.
struct Pipeline {
  Curve c;
  std::unique_ptr<EdgeIndex> idx;
  FamilyForests ff;

  Pipeline(const MetricCtx& ctx, Curve curve, std::vector<int> levels, double A, int J)
      : c(std::move(curve)) {
    idx = std::make_unique<EdgeIndex>(c);
    const int lo = *std::min_element(levels.begin(), levels.end());
    const int hi = *std::max_element(levels.begin(), levels.end());
    auto all = multiresolution(build_nets(ctx, c.p, lo, hi), c.p, A);
    std::vector<Ball> keep;
    for (const auto& b : all)
      if (std::find(levels.begin(), levels.end(), b.level) != levels.end()) keep.push_back(b);
    ff = family_forests(ctx, keep, J, 3.0, 2 * A);
  }

  // The family with the most balls among those holding a ball of the given level.
  size_t family_with(int level) const {
    size_t best = 0, best_n = 0;
    for (size_t i = 0; i < ff.forests.size(); ++i) {
      const auto& f = ff.forests[i];
      bool has = false;
      for (const auto& b : f.balls) has |= b.level == level;
      if (has && f.balls.size() > best_n) {
        best = i;
        best_n = f.balls.size();
      }
    }
    return best;
  }
};

}  // namespace heis::testing
