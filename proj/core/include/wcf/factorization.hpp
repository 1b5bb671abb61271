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

// Wasserstein collaborative filtering.
//
// Fits a dictionary D (s x k) and loadings L (k x m) so that the columns of
// D L are cold-item preferences minimizing sum_u W_gamma(p_u, D L_u) subject
// to every column lying on the simplex. Each block is solved through its
// dual:
//
//   L-step:  g_u* = argmin H_{p_u}^*(g)             s.t. D^T g = 0
//   D-step:  G*   = argmin sum_u H_{p_u}^*(G_u)     s.t. G L^T = 0
//
// and the primal block is recovered by least squares against the targets
// grad H_{p_u}^*(g_u*), which always lie on the simplex.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wcf/transport.hpp"

namespace wcf {

struct WcfOptions {
  // Outer block-coordinate loop.
  double tol = 1e-5;  // relative objective change
  int max_outer = 50;

  // Inner projected gradient on the duals.
  double inner_tol = 1e-7;  // L2 norm of the projected gradient
  int inner_max_iter = 500;
  double step_init = 1.0;
  double step_shrink = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 60;

  // Relative pivot threshold for the rank test of the fixed block.
  double rank_tol = 1e-10;

  std::uint64_t seed = 0;
  int max_reinit = 3;
};

struct DualState {
  Matrix duals;  // s x m, one potential per user
  std::vector<double> objective_trace;
  int inner_iterations = 0;         // summed over users / iterations
  double projected_grad_norm = 0.0; // worst final projected gradient
  double constraint_violation = 0.0;
};

struct StepResult {
  Matrix factor;  // loadings for lambda_step, dictionary for d_step
  DualState state;
};

struct FactorModel {
  Matrix dictionary;  // s x k
  Matrix loadings;    // k x m
  double gamma = 0.05;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<ItemId> item_ids;
  std::vector<UserId> user_ids;
  std::vector<double> objective_trace;  // sum_u W_gamma(D L_u, p_u) per outer iteration
  int outer_iterations = 0;
  int reinitializations = 0;
  bool converged = false;
  double max_simplex_violation = 0.0;

  Eigen::Index user_index(UserId user) const;
};

/// Random column-stochastic D, and L chosen so every column of D L is the
/// uniform distribution (least squares under the unit-sum constraint).
FactorModel init_factors(Eigen::Index s, Eigen::Index m, Eigen::Index k,
                         std::uint64_t seed);

StepResult lambda_step(const Matrix& dictionary,
                       std::span<const SimplexVector> preferences,
                       const GibbsKernel& kernel, const WcfOptions& options,
                       const Matrix& warm_start = Matrix());

StepResult d_step(const Matrix& loadings,
                  std::span<const SimplexVector> preferences,
                  const GibbsKernel& kernel, const WcfOptions& options,
                  const Matrix& warm_start = Matrix());

/// Overloads over prebuilt per-user conjugates (one per column).
StepResult lambda_step(const Matrix& dictionary,
                       std::span<const ConjugateObjective> objectives,
                       const WcfOptions& options,
                       const Matrix& warm_start = Matrix());
StepResult d_step(const Matrix& loadings,
                  std::span<const ConjugateObjective> objectives,
                  const WcfOptions& options,
                  const Matrix& warm_start = Matrix());

/// sum_u W_gamma(p_u, grad H_u^*(g_u)) via the Fenchel equality
/// W = <g, q> - H^*(g). Exact for the dual targets.
double dual_objective(std::span<const ConjugateObjective> objectives,
                      const Matrix& duals);

/// Block-coordinate descent from init_factors. User ids default to 0..m-1;
/// item ids are the cost matrix's column ids.
FactorModel train_wcf(std::span<const SimplexVector> preferences,
                      const CostMatrix& costs, int k, double gamma,
                      const WcfOptions& options = {},
                      std::vector<UserId> user_ids = {});

/// Column D L_u with negatives clipped to zero, renormalized.
SimplexVector predict_user(const FactorModel& model, UserId user);

/// Largest simplex violation over the columns of D L: max of the most
/// negative entry and the unit-sum error.
double simplex_violation(const Matrix& columns);

/// Directory with dictionary.tsv, loadings.tsv and manifest.json. Matrices
/// are written at 17 significant digits, so loading is bit-exact.
void save_model(const FactorModel& model, const std::filesystem::path& dir);
FactorModel load_model(const std::filesystem::path& dir);

void write_matrix_tsv(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix_tsv(const std::filesystem::path& path);

}  // namespace wcf
