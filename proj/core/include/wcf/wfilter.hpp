// Copyright 2026 The WCF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Wasserstein filtering: per-user cold-item preference inference.

#pragma once

#include <utility>
#include <vector>

#include "wcf/transport.hpp"

namespace wcf {

/// Sparse interaction strengths of one user over the interacted items,
/// as (row index into the item list, strength) pairs. Strengths are > 0.
struct UserInteractions {
  UserId user_id = 0;
  std::vector<std::pair<Eigen::Index, double>> counts;
};

struct RankedList {
  std::vector<ItemId> items;
  std::vector<double> scores;
};

/// p_u = R_u / <R_u, 1> as a dense length-n simplex vector.
SimplexVector estimate_preference(const UserInteractions& interactions,
                                  Eigen::Index n);

/// argmin_q W_gamma(p, q). Minimizing over the second marginal drops the
/// column constraint, so the plan is diag(p ./ K1) K and the answer is its
/// column sum K^T (p ./ K1) -- the conjugate gradient at g = 0.
SimplexVector infer_cold(const SimplexVector& p, const GibbsKernel& kernel);
SimplexVector infer_cold(const SimplexVector& p, const CostMatrix& costs,
                         double gamma);

/// Sorts by score descending, ties by ascending item id.
RankedList rank_items(const SimplexVector& q,
                      const std::vector<ItemId>& cold_ids);

}  // namespace wcf
