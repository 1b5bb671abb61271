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

// Transportation simplex. The basis is a spanning tree over n row nodes and
// s column nodes (node ids 0..n-1 are rows, n..n+s-1 are columns) with
// exactly n + s - 1 basic cells, some of which may carry zero flow.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wcf/error.hpp"
#include "wcf/transport.hpp"

namespace wcf {

namespace {

constexpr double kReducedCostTol = 1e-12;

struct Cell {
  Eigen::Index row;
  Eigen::Index col;
};

class TransportationSimplex {
 public:
  TransportationSimplex(const Vector& supply, const Vector& demand,
                        const Matrix& costs)
      : n_(supply.size()),
        s_(demand.size()),
        costs_(costs),
        flow_(Matrix::Zero(n_, s_)),
        basic_(n_, std::vector<bool>(static_cast<std::size_t>(s_), false)) {
    north_west_corner(supply, demand);
  }

  int solve(int max_pivots) {
    for (int pivot = 0; pivot < max_pivots; ++pivot) {
      compute_potentials();
      const auto entering = find_entering();
      if (!entering) return pivot;
      exchange(*entering);
    }
    throw SolverError("transportation simplex exceeded " +
                      std::to_string(max_pivots) + " pivots");
  }

  const Matrix& flow() const { return flow_; }

 private:
  void north_west_corner(Vector supply, Vector demand) {
    Eigen::Index i = 0;
    Eigen::Index j = 0;
    while (true) {
      const double x = std::max(0.0, std::min(supply[i], demand[j]));
      set_basic(i, j, x);
      supply[i] -= x;
      demand[j] -= x;
      if (i == n_ - 1 && j == s_ - 1) break;
      if (i == n_ - 1) {
        ++j;
      } else if (j == s_ - 1) {
        ++i;
      } else if (supply[i] <= demand[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  void set_basic(Eigen::Index i, Eigen::Index j, double x) {
    basic_[i][j] = true;
    flow_(i, j) = x;
  }

  std::vector<std::vector<Eigen::Index>> adjacency() const {
    std::vector<std::vector<Eigen::Index>> adj(
        static_cast<std::size_t>(n_ + s_));
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = 0; j < s_; ++j) {
        if (basic_[i][j]) {
          adj[i].push_back(n_ + j);
          adj[n_ + j].push_back(i);
        }
      }
    }
    return adj;
  }

  // u_i + v_j = c_ij on basic cells, u_0 = 0.
  void compute_potentials() {
    const auto adj = adjacency();
    row_pot_.assign(static_cast<std::size_t>(n_), 0.0);
    col_pot_.assign(static_cast<std::size_t>(s_), 0.0);
    std::vector<bool> seen(static_cast<std::size_t>(n_ + s_), false);
    std::vector<Eigen::Index> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const Eigen::Index node = stack.back();
      stack.pop_back();
      for (Eigen::Index next : adj[node]) {
        if (seen[next]) continue;
        seen[next] = true;
        if (node < n_) {
          col_pot_[next - n_] = costs_(node, next - n_) - row_pot_[node];
        } else {
          row_pot_[next] = costs_(next, node - n_) - col_pot_[node - n_];
        }
        stack.push_back(next);
      }
    }
  }

  // Bland's rule: first improving cell in row-major order.
  std::optional<Cell> find_entering() const {
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = 0; j < s_; ++j) {
        if (basic_[i][j]) continue;
        if (costs_(i, j) - row_pot_[i] - col_pot_[j] < -kReducedCostTol) {
          return Cell{i, j};
        }
      }
    }
    return std::nullopt;
  }

  // Tree path from column node of the entering cell back to its row node.
  std::vector<Cell> cycle_for(const Cell& entering) const {
    const auto adj = adjacency();
    const Eigen::Index start = entering.row;
    const Eigen::Index goal = n_ + entering.col;
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(n_ + s_), -1);
    std::vector<Eigen::Index> queue{start};
    parent[start] = start;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const Eigen::Index node = queue[head];
      if (node == goal) break;
      for (Eigen::Index next : adj[node]) {
        if (parent[next] != -1) continue;
        parent[next] = node;
        queue.push_back(next);
      }
    }
    std::vector<Cell> cycle{entering};
    for (Eigen::Index node = goal; node != start; node = parent[node]) {
      const Eigen::Index prev = parent[node];
      cycle.push_back(node < n_ ? Cell{node, prev - n_} : Cell{prev, node - n_});
    }
    return cycle;
  }

  void exchange(const Cell& entering) {
    const auto cycle = cycle_for(entering);
    // Cells at odd positions lose flow.
    std::size_t leaving = 1;
    for (std::size_t k = 3; k < cycle.size(); k += 2) {
      const Cell& c = cycle[k];
      const Cell& best = cycle[leaving];
      const double fc = flow_(c.row, c.col);
      const double fb = flow_(best.row, best.col);
      if (fc < fb || (fc == fb && (c.row < best.row ||
                                   (c.row == best.row && c.col < best.col)))) {
        leaving = k;
      }
    }
    const double theta = flow_(cycle[leaving].row, cycle[leaving].col);
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      double& f = flow_(cycle[k].row, cycle[k].col);
      f = (k % 2 == 0) ? f + theta : std::max(0.0, f - theta);
    }
    basic_[cycle[leaving].row][cycle[leaving].col] = false;
    flow_(cycle[leaving].row, cycle[leaving].col) = 0.0;
    basic_[entering.row][entering.col] = true;
  }

  Eigen::Index n_;
  Eigen::Index s_;
  const Matrix& costs_;
  Matrix flow_;
  std::vector<std::vector<bool>> basic_;
  std::vector<double> row_pot_;
  std::vector<double> col_pot_;
};

}  // namespace

TransportPlan exact_ot_oracle(const SimplexVector& p, const SimplexVector& q,
                              const CostMatrix& costs,
                              const ExactOtOptions& options) {
  if (p.size() != costs.rows() || q.size() != costs.cols()) {
    throw DomainError("marginals do not match cost matrix shape");
  }
  const auto cells = static_cast<std::size_t>(costs.rows() * costs.cols());
  if (cells > options.max_cells) {
    throw DomainError("exact transport refused: " + std::to_string(cells) +
                      " cells exceeds the cap of " +
                      std::to_string(options.max_cells));
  }
  TransportationSimplex simplex(p.weights(), q.weights(), costs.costs());
  TransportPlan out;
  out.iterations = simplex.solve(options.max_pivots);
  out.plan = simplex.flow();
  out.transport_cost = (out.plan.array() * costs.costs().array()).sum();
  out.regularized_value = out.transport_cost;
  out.marginal_violation = std::max(
      (out.plan.rowwise().sum() - p.weights()).cwiseAbs().maxCoeff(),
      (out.plan.colwise().sum().transpose() - q.weights()).cwiseAbs().maxCoeff());
  return out;
}

}  // namespace wcf
