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

#include "wcf/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include "wcf/error.hpp"

namespace wcf {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct DescentResult {
  int iterations = 0;
  double grad_norm = 0.0;
  double value = 0.0;
};

// Projected gradient with Armijo backtracking on the subspace described by
// `project` (an orthogonal projector). x must hold the starting point.
template <typename ValueGrad, typename Value, typename Project>
DescentResult projected_descent(Matrix& x, ValueGrad&& value_grad,
                                Value&& value, Project&& project,
                                const WcfOptions& opt) {
  x = project(x);
  Matrix grad;
  double f = value_grad(x, grad);
  Matrix pg = project(grad);
  double norm = pg.norm();
  int it = 0;
  Matrix trial;
  for (; it < opt.inner_max_iter && norm >= opt.inner_tol; ++it) {
    // Rounding slack keeps the search from failing at the precision floor.
    const double slack = 4.0 * kEps * std::max(1.0, std::abs(f));
    double step = opt.step_init;
    bool accepted = false;
    for (int b = 0; b < opt.max_backtracks; ++b, step *= opt.step_shrink) {
      trial = x - step * pg;
      double ft;
      try {
        ft = value(trial);
      } catch (const SolverError&) {
        continue;
      }
      if (ft <= f - opt.armijo * step * norm * norm + slack) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw SolverError("dual descent diverged: no decrease after " +
                        std::to_string(opt.max_backtracks) +
                        " backtracks at inner iteration " + std::to_string(it) +
                        " (objective " + std::to_string(f) +
                        ", projected gradient norm " + std::to_string(norm) +
                        ")");
    }
    x = project(trial);
    f = value_grad(x, grad);
    pg = project(grad);
    norm = pg.norm();
  }
  return {it, norm, f};
}

void check_full_rank(const Matrix& a, const char* what, double tol) {
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(tol);
  const auto rank = qr.rank();
  if (rank < a.cols()) {
    throw RankDeficientError(std::string(what) + " is rank deficient (rank " +
                                 std::to_string(rank) + " of " +
                                 std::to_string(a.cols()) + "); reinitialize it",
                             rank, a.cols());
  }
}

// Orthonormal basis of the column space of a full-column-rank matrix.
Matrix column_basis(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

std::vector<ConjugateObjective> make_objectives(
    std::span<const SimplexVector> preferences, const GibbsKernel& kernel) {
  std::vector<ConjugateObjective> out;
  out.reserve(preferences.size());
  for (const auto& p : preferences) out.emplace_back(p, kernel);
  return out;
}

void check_objectives(std::span<const ConjugateObjective> objectives,
                      Eigen::Index s) {
  if (objectives.empty()) throw DomainError("no users to fit");
  for (const auto& obj : objectives) {
    if (obj.dual_size() != s) {
      throw DomainError("cold-item count " + std::to_string(s) +
                        " does not match kernel columns " +
                        std::to_string(obj.dual_size()));
    }
  }
}

Matrix initial_duals(const Matrix& warm, Eigen::Index s, Eigen::Index m) {
  if (warm.rows() == s && warm.cols() == m) return warm;
  return Matrix::Zero(s, m);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// sum_u W_gamma(p_u, q_u) over the cleaned columns q_u of D L.
double model_objective(const Matrix& dictionary, const Matrix& loadings,
                       std::span<const SimplexVector> preferences,
                       const CostMatrix& costs, double gamma) {
  const Matrix columns = dictionary * loadings;
  SinkhornOptions opts;
  opts.max_iter = 100000;
  double total = 0.0;
  for (std::size_t u = 0; u < preferences.size(); ++u) {
    SimplexVector q(
        Vector(columns.col(static_cast<Eigen::Index>(u)).cwiseMax(0.0)));
    total += smoothed_wasserstein(preferences[u], q, costs, gamma, opts);
  }
  return total;
}

std::uint64_t derived_seed(std::uint64_t seed, int attempt) {
  return seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(attempt);
}

Matrix random_stochastic(Eigen::Index rows, Eigen::Index cols,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = uniform01(rng);
    a.col(j) /= a.col(j).sum();
  }
  return a;
}

}  // namespace

Eigen::Index FactorModel::user_index(UserId user) const {
  const auto it = std::find(user_ids.begin(), user_ids.end(), user);
  if (it == user_ids.end()) {
    throw DomainError("unknown user " + std::to_string(user));
  }
  return it - user_ids.begin();
}

FactorModel init_factors(Eigen::Index s, Eigen::Index m, Eigen::Index k,
                         std::uint64_t seed) {
  if (s < 1 || m < 1 || k < 1 || k > std::min(s, m)) {
    throw DomainError("latent dimension " + std::to_string(k) +
                      " must lie in [1, min(s=" + std::to_string(s) +
                      ", m=" + std::to_string(m) + ")]");
  }
  FactorModel model;
  model.k = static_cast<int>(k);
  model.seed = seed;
  model.dictionary = random_stochastic(s, k, seed);

  // min ||D l - 1/s|| s.t. 1^T l = 1. D has unit column sums, so the
  // constraint makes every column of D L sum to one.
  const Matrix& d = model.dictionary;
  Matrix kkt = Matrix::Zero(k + 1, k + 1);
  kkt.topLeftCorner(k, k) = d.transpose() * d;
  kkt.topRightCorner(k, 1).setOnes();
  kkt.bottomLeftCorner(1, k).setOnes();
  Vector rhs(k + 1);
  rhs.head(k) = d.transpose() * Vector::Constant(s, 1.0 / static_cast<double>(s));
  rhs[k] = 1.0;
  const Vector sol = kkt.fullPivLu().solve(rhs);
  model.loadings = sol.head(k).replicate(1, m);

  model.user_ids.resize(static_cast<std::size_t>(m));
  model.item_ids.resize(static_cast<std::size_t>(s));
  for (Eigen::Index u = 0; u < m; ++u) model.user_ids[u] = u;
  for (Eigen::Index j = 0; j < s; ++j) model.item_ids[j] = j;
  return model;
}

double dual_objective(std::span<const ConjugateObjective> objectives,
                      const Matrix& duals) {
  double total = 0.0;
  Vector grad;
  for (std::size_t u = 0; u < objectives.size(); ++u) {
    const auto g = duals.col(static_cast<Eigen::Index>(u));
    const double h = objectives[u].value_and_gradient(g, grad);
    total += g.dot(grad) - h;
  }
  return total;
}

StepResult lambda_step(const Matrix& dictionary,
                       std::span<const ConjugateObjective> objectives,
                       const WcfOptions& options, const Matrix& warm_start) {
  const Eigen::Index s = dictionary.rows();
  const Eigen::Index k = dictionary.cols();
  const auto m = static_cast<Eigen::Index>(objectives.size());
  check_objectives(objectives, s);
  if (k < 1 || k > s) throw DomainError("dictionary must be s x k with k <= s");
  check_full_rank(dictionary, "dictionary", options.rank_tol);

  const Matrix basis = column_basis(dictionary);
  auto project = [&](const Matrix& v) -> Matrix {
    return v - basis * (basis.transpose() * v);
  };

  StepResult out;
  Matrix duals = initial_duals(warm_start, s, m);
  Matrix targets(s, m);
  Vector grad;
  for (Eigen::Index u = 0; u < m; ++u) {
    const ConjugateObjective& obj = objectives[static_cast<std::size_t>(u)];
    auto value_grad = [&](const Matrix& x, Matrix& g) {
      const double v = obj.value_and_gradient(x.col(0), grad);
      g = grad;
      return v;
    };
    auto value = [&](const Matrix& x) { return obj.value(x.col(0)); };
    Matrix g = duals.col(u);
    const auto r = projected_descent(g, value_grad, value, project, options);
    duals.col(u) = g;
    obj.value_and_gradient(g.col(0), grad);
    targets.col(u) = grad;
    out.state.inner_iterations += r.iterations;
    out.state.projected_grad_norm =
        std::max(out.state.projected_grad_norm, r.grad_norm);
  }

  out.factor = dictionary.colPivHouseholderQr().solve(targets);
  out.state.constraint_violation =
      (dictionary.transpose() * duals).cwiseAbs().maxCoeff();
  out.state.objective_trace.push_back(dual_objective(objectives, duals));
  out.state.duals = std::move(duals);
  return out;
}

StepResult d_step(const Matrix& loadings,
                  std::span<const ConjugateObjective> objectives,
                  const WcfOptions& options, const Matrix& warm_start) {
  const Eigen::Index k = loadings.rows();
  const Eigen::Index m = loadings.cols();
  if (static_cast<Eigen::Index>(objectives.size()) != m) {
    throw DomainError("loadings have " + std::to_string(m) +
                      " columns but there are " +
                      std::to_string(objectives.size()) + " users");
  }
  const Eigen::Index s = objectives.empty() ? 0 : objectives[0].dual_size();
  check_objectives(objectives, s);
  if (k < 1 || k > m) throw DomainError("loadings must be k x m with k <= m");
  const Matrix loadings_t = loadings.transpose();
  check_full_rank(loadings_t, "loadings", options.rank_tol);

  // G -> G (I - L^T (L L^T)^{-1} L) using an orthonormal basis of L^T.
  const Matrix basis = column_basis(loadings_t);
  auto project = [&](const Matrix& g) -> Matrix {
    return g - (g * basis) * basis.transpose();
  };
  Vector grad;
  auto value_grad = [&](const Matrix& g, Matrix& out_grad) {
    out_grad.resize(s, m);
    double total = 0.0;
    for (Eigen::Index u = 0; u < m; ++u) {
      total += objectives[static_cast<std::size_t>(u)].value_and_gradient(
          g.col(u), grad);
      out_grad.col(u) = grad;
    }
    return total;
  };
  auto value = [&](const Matrix& g) {
    double total = 0.0;
    for (Eigen::Index u = 0; u < m; ++u) {
      total += objectives[static_cast<std::size_t>(u)].value(g.col(u));
    }
    return total;
  };

  StepResult out;
  Matrix duals = initial_duals(warm_start, s, m);
  const auto r = projected_descent(duals, value_grad, value, project, options);
  Matrix targets;
  value_grad(duals, targets);

  out.factor =
      loadings_t.colPivHouseholderQr().solve(targets.transpose()).transpose();
  out.state.inner_iterations = r.iterations;
  out.state.projected_grad_norm = r.grad_norm;
  out.state.constraint_violation =
      (duals * loadings_t).cwiseAbs().maxCoeff();
  out.state.objective_trace.push_back(dual_objective(objectives, duals));
  out.state.duals = std::move(duals);
  return out;
}

StepResult lambda_step(const Matrix& dictionary,
                       std::span<const SimplexVector> preferences,
                       const GibbsKernel& kernel, const WcfOptions& options,
                       const Matrix& warm_start) {
  const auto objectives = make_objectives(preferences, kernel);
  return lambda_step(dictionary, std::span<const ConjugateObjective>(objectives),
                     options, warm_start);
}

StepResult d_step(const Matrix& loadings,
                  std::span<const SimplexVector> preferences,
                  const GibbsKernel& kernel, const WcfOptions& options,
                  const Matrix& warm_start) {
  const auto objectives = make_objectives(preferences, kernel);
  return d_step(loadings, std::span<const ConjugateObjective>(objectives),
                options, warm_start);
}

double simplex_violation(const Matrix& columns) {
  if (columns.size() == 0) return 0.0;
  const double negative = std::max(0.0, -columns.minCoeff());
  const double sum_error =
      (columns.colwise().sum().array() - 1.0).abs().maxCoeff();
  return std::max(negative, sum_error);
}

FactorModel train_wcf(std::span<const SimplexVector> preferences,
                      const CostMatrix& costs, int k, double gamma,
                      const WcfOptions& options,
                      std::vector<UserId> user_ids) {
  if (preferences.empty()) throw DomainError("no users to fit");
  const Eigen::Index s = costs.cols();
  const auto m = static_cast<Eigen::Index>(preferences.size());
  for (const auto& p : preferences) {
    if (p.size() != costs.rows()) {
      throw DomainError("preference length does not match cost matrix rows");
    }
  }
  if (!user_ids.empty() && static_cast<Eigen::Index>(user_ids.size()) != m) {
    throw DomainError("user id list does not match the number of users");
  }

  const GibbsKernel kernel(costs, gamma);
  const auto objectives = make_objectives(preferences, kernel);
  const std::span<const ConjugateObjective> objs(objectives);

  FactorModel model = init_factors(s, m, k, options.seed);
  model.gamma = gamma;
  model.item_ids = costs.col_ids();
  if (!user_ids.empty()) model.user_ids = std::move(user_ids);

  Matrix dictionary = model.dictionary;
  Matrix loadings = model.loadings;
  Matrix lambda_duals;
  Matrix d_duals;
  Matrix best_dictionary = dictionary;
  Matrix best_loadings = loadings;
  double best = std::numeric_limits<double>::infinity();
  int reinit = 0;

  // Every user at its filtering solution: no factorization can do better.
  double lower_bound = 0.0;
  for (const auto& obj : objectives) {
    lower_bound -= obj.value(Vector::Zero(s));
  }
  auto at_lower_bound = [&](double objective) {
    return objective - lower_bound <=
           options.tol * std::max(std::abs(lower_bound), 1e-12);
  };
  auto reinitialize = [&](const RankDeficientError& e) {
    if (++reinit > options.max_reinit) {
      throw SolverError(std::string(e.what()) + " after " +
                        std::to_string(options.max_reinit) +
                        " reinitializations; try a smaller latent dimension");
    }
  };

  for (int outer = 0; outer < options.max_outer;) {
    StepResult ls;
    try {
      ls = lambda_step(dictionary, objs, options, lambda_duals);
    } catch (const RankDeficientError& e) {
      reinitialize(e);
      dictionary = random_stochastic(s, k, derived_seed(options.seed, reinit));
      lambda_duals.resize(0, 0);
      continue;
    }
    loadings = std::move(ls.factor);
    lambda_duals = std::move(ls.state.duals);
    const double after_lambda =
        model_objective(dictionary, loadings, preferences, costs, gamma);
    if (at_lower_bound(after_lambda)) {
      model.objective_trace.push_back(after_lambda);
      best_dictionary = dictionary;
      best_loadings = loadings;
      model.converged = true;
      break;
    }

    StepResult ds;
    while (true) {
      try {
        ds = d_step(loadings, objs, options, d_duals);
        break;
      } catch (const RankDeficientError& e) {
        reinitialize(e);
        loadings = random_stochastic(k, m, derived_seed(options.seed, reinit));
        d_duals.resize(0, 0);
      }
    }
    dictionary = std::move(ds.factor);
    d_duals = std::move(ds.state.duals);
    ++outer;

    const double objective =
        model_objective(dictionary, loadings, preferences, costs, gamma);
    const double previous = model.objective_trace.empty()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : model.objective_trace.back();
    model.objective_trace.push_back(objective);
    if (objective < best) {
      best = objective;
      best_dictionary = dictionary;
      best_loadings = loadings;
    }
    if (at_lower_bound(objective) ||
        (std::isfinite(previous) &&
         std::abs(previous - objective) <=
             options.tol * std::max(std::abs(previous), 1e-12))) {
      model.converged = true;
      break;
    }
  }

  model.dictionary = std::move(best_dictionary);
  model.loadings = std::move(best_loadings);
  model.outer_iterations = static_cast<int>(model.objective_trace.size());
  model.reinitializations = reinit;
  model.max_simplex_violation =
      simplex_violation(model.dictionary * model.loadings);
  return model;
}

SimplexVector predict_user(const FactorModel& model, UserId user) {
  const Eigen::Index u = model.user_index(user);
  Vector column = model.dictionary * model.loadings.col(u);
  column = column.cwiseMax(0.0);
  return SimplexVector(std::move(column));
}

}  // namespace wcf
