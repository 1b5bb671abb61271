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

#include "wcf/wfilter.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "wcf/error.hpp"

namespace wcf {

SimplexVector estimate_preference(const UserInteractions& interactions,
                                  Eigen::Index n) {
  Vector dense = Vector::Zero(n);
  for (const auto& [index, strength] : interactions.counts) {
    if (index < 0 || index >= n) {
      throw DomainError("interaction index " + std::to_string(index) +
                        " out of range for " + std::to_string(n) + " items");
    }
    if (!(strength >= 0.0)) {
      throw DomainError("negative interaction strength for user " +
                        std::to_string(interactions.user_id));
    }
    dense[index] += strength;
  }
  if (!(dense.sum() > 0.0)) {
    throw DomainError("user " + std::to_string(interactions.user_id) +
                      " has no interactions");
  }
  return SimplexVector(std::move(dense));
}

SimplexVector infer_cold(const SimplexVector& p, const GibbsKernel& kernel) {
  return conjugate_grad(p, DualPotential::zeros(kernel.cols()), kernel);
}

SimplexVector infer_cold(const SimplexVector& p, const CostMatrix& costs,
                         double gamma) {
  return infer_cold(p, GibbsKernel(costs, gamma));
}

RankedList rank_items(const SimplexVector& q,
                      const std::vector<ItemId>& cold_ids) {
  if (static_cast<Eigen::Index>(cold_ids.size()) != q.size()) {
    throw DomainError("score vector and id list lengths differ");
  }
  std::vector<std::size_t> order(cold_ids.size());
  std::iota(order.begin(), order.end(), 0);
  const Vector& w = q.weights();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double wa = w[static_cast<Eigen::Index>(a)];
    const double wb = w[static_cast<Eigen::Index>(b)];
    if (wa != wb) return wa > wb;
    return cold_ids[a] < cold_ids[b];
  });
  RankedList out;
  out.items.reserve(order.size());
  out.scores.reserve(order.size());
  for (std::size_t k : order) {
    out.items.push_back(cold_ids[k]);
    out.scores.push_back(w[static_cast<Eigen::Index>(k)]);
  }
  return out;
}

}  // namespace wcf
