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

#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wcf/error.hpp"
#include "wcf/factorization.hpp"
#include "wcf/wfilter.hpp"

namespace wcf {
namespace {

namespace fs = std::filesystem;

std::vector<SimplexVector> random_users(std::mt19937_64& rng, int m, int n) {
  std::vector<SimplexVector> out;
  for (int u = 0; u < m; ++u) out.emplace_back(testing::random_simplex(rng, n));
  return out;
}

// Columns of D L, clipped and renormalized, scored with the semi-dual oracle.
double total_distance(const Matrix& columns, const std::vector<SimplexVector>& p,
                      const Matrix& costs, double gamma) {
  testing::SemiDualOracle w(costs, gamma);
  double total = 0.0;
  for (Eigen::Index u = 0; u < columns.cols(); ++u) {
    Vector q = columns.col(u).cwiseMax(0.0);
    q /= q.sum();
    total += w(p[static_cast<std::size_t>(u)].weights(), q);
  }
  return total;
}

Matrix wf_columns(const std::vector<SimplexVector>& p, const GibbsKernel& k) {
  Matrix out(k.cols(), static_cast<Eigen::Index>(p.size()));
  for (std::size_t u = 0; u < p.size(); ++u) {
    out.col(static_cast<Eigen::Index>(u)) = infer_cold(p[u], k).weights();
  }
  return out;
}

TEST(InitFactors, SquareDictionaryGivesUniformColumns) {
  const auto model = init_factors(5, 8, 5, 3);
  const Matrix dl = model.dictionary * model.loadings;
  EXPECT_LT((dl.array() - 0.2).abs().maxCoeff(), 1e-10);
  EXPECT_LT((model.dictionary.colwise().sum().array() - 1.0).abs().maxCoeff(),
            1e-14);
  EXPECT_GE(model.dictionary.minCoeff(), 0.0);
}

TEST(InitFactors, DeterministicPerSeed) {
  const auto a = init_factors(6, 9, 3, 42);
  const auto b = init_factors(6, 9, 3, 42);
  const auto c = init_factors(6, 9, 3, 43);
  EXPECT_EQ(a.dictionary, b.dictionary);
  EXPECT_EQ(a.loadings, b.loadings);
  EXPECT_NE(a.dictionary, c.dictionary);
}

TEST(InitFactors, ColumnsSumToOne) {
  for (int s = 2; s <= 8; ++s) {
    for (int m = 1; m <= 6; ++m) {
      const int k = std::min(s, m);
      const auto model = init_factors(s, m, k, static_cast<std::uint64_t>(s * m));
      const Matrix dl = model.dictionary * model.loadings;
      EXPECT_LT((dl.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-8);
    }
  }
}

TEST(InitFactors, RejectsBadDimensions) {
  EXPECT_THROW(init_factors(3, 5, 4, 0), DomainError);
  EXPECT_THROW(init_factors(5, 3, 4, 0), DomainError);
  EXPECT_THROW(init_factors(3, 3, 0, 0), DomainError);
}

TEST(LambdaStep, InvertibleDictionaryGivesFilteringSolution) {
  std::mt19937_64 rng(51);
  const int s = 4, n = 6, m = 5;
  const Matrix costs = testing::random_costs(rng, n, s);
  const auto prefs = random_users(rng, m, n);
  const GibbsKernel k(CostMatrix(costs), 0.05);
  const Matrix d = init_factors(s, m, s, 1).dictionary;
  const auto r = lambda_step(d, prefs, k, {});
  EXPECT_LT(r.state.duals.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((d * r.factor - wf_columns(prefs, k)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LambdaStep, UniformDictionaryMatchesConstrainedGridSearch) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 3; ++trial) {
    const int s = 3, n = 2 + trial;
    const double gamma = 0.05;
    const Matrix costs = testing::random_costs(rng, n, s);
    const std::vector<SimplexVector> prefs{
        SimplexVector(testing::random_simplex(rng, n))};
    const Matrix d = Matrix::Constant(s, 1, 1.0 / s);
    WcfOptions opts;
    opts.inner_tol = 1e-10;
    opts.inner_max_iter = 5000;
    const auto r = lambda_step(d, prefs, GibbsKernel(CostMatrix(costs), gamma), opts);

    // Orthonormal basis of {g : sum g = 0}.
    Vector e1(3), e2(3);
    e1 << 1, -1, 0;
    e2 << 1, 1, -2;
    e1.normalize();
    e2.normalize();
    auto h = [&](const Vector& x) {
      return testing::direct_conjugate(prefs[0].weights(), x[0] * e1 + x[1] * e2,
                                       costs, gamma);
    };
    const Vector best = testing::zoom_minimize(h, Vector::Zero(2), 2.0, 60, 21);
    const Vector g = best[0] * e1 + best[1] * e2;
    EXPECT_LT((r.state.duals.col(0) - g).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LT(((d * r.factor).array() - 1.0 / 3).abs().maxCoeff(), 1e-6);
    EXPECT_LE(r.state.constraint_violation, 1e-10);
  }
}

TEST(LambdaStep, DoesNotIncreaseObjective) {
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 5; ++trial) {
    const int s = 3 + trial % 4, n = 4 + trial % 3, m = 6, kdim = 1 + trial % 3;
    const double gamma = 0.05;
    const Matrix costs = testing::random_costs(rng, n, s);
    const auto prefs = random_users(rng, m, n);
    const auto init = init_factors(s, m, kdim, static_cast<std::uint64_t>(trial));
    const double before =
        total_distance(init.dictionary * init.loadings, prefs, costs, gamma);
    const auto r =
        lambda_step(init.dictionary, prefs, GibbsKernel(CostMatrix(costs), gamma), {});
    const double after =
        total_distance(init.dictionary * r.factor, prefs, costs, gamma);
    EXPECT_LE(after, before + 1e-6);
    EXPECT_LE(r.state.constraint_violation, 1e-10);
    // The recorded value is the transport objective at the dual targets.
    EXPECT_NEAR(r.state.objective_trace.back(), after, 1e-6);
  }
}

TEST(LambdaStep, RejectsRankDeficientDictionary) {
  Matrix d(3, 2);
  d << 0.5, 0.5, 0.25, 0.25, 0.25, 0.25;
  const std::vector<SimplexVector> prefs{SimplexVector::uniform(2)};
  const GibbsKernel k(CostMatrix(Matrix::Ones(2, 3)), 0.05);
  EXPECT_THROW(lambda_step(d, prefs, k, {}), RankDeficientError);
}

TEST(DStep, InvertibleLoadingsGiveFilteringSolution) {
  std::mt19937_64 rng(59);
  const int s = 5, n = 4, m = 3;
  const Matrix costs = testing::random_costs(rng, n, s);
  const auto prefs = random_users(rng, m, n);
  const GibbsKernel k(CostMatrix(costs), 0.05);
  Matrix l = Matrix::Identity(m, m) + 0.2 * Matrix::Ones(m, m);
  const auto r = d_step(l, prefs, k, {});
  EXPECT_LT(r.state.duals.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((r.factor * l - wf_columns(prefs, k)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DStep, SharedLoadingMatchesSearch) {
  // Two users with one shared loading: both columns equal the single
  // dictionary atom, which must minimize the summed distance.
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 3; ++trial) {
    const int s = 2, n = 3;
    const double gamma = 0.05;
    const Matrix costs = testing::random_costs(rng, n, s);
    const auto prefs = random_users(rng, 2, n);
    const Matrix l = Matrix::Ones(1, 2);
    WcfOptions opts;
    opts.inner_tol = 1e-10;
    opts.inner_max_iter = 5000;
    const auto r = d_step(l, prefs, GibbsKernel(CostMatrix(costs), gamma), opts);
    EXPECT_LE(r.state.constraint_violation, 1e-10);

    // Dual oracle: G = x w^T with w orthogonal to the loading row.
    Vector w(2);
    w << 1, -1;
    w.normalize();
    auto dual = [&](const Vector& x) {
      return testing::direct_conjugate(prefs[0].weights(), x * w[0], costs, gamma) +
             testing::direct_conjugate(prefs[1].weights(), x * w[1], costs, gamma);
    };
    const Vector x = testing::zoom_minimize(dual, Vector::Zero(2), 2.0, 60, 21);
    // The dual is flat along G + 1 c^T with c orthogonal to the loadings, so
    // compare up to a constant per column.
    for (int u = 0; u < 2; ++u) {
      Vector got = r.state.duals.col(u);
      Vector want = x * w[u];
      got.array() -= got.mean();
      want.array() -= want.mean();
      EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-5);
    }

    // Primal oracle over the single free parameter of q in the 1-simplex.
    testing::SemiDualOracle wd(costs, gamma);
    auto primal = [&](const Vector& t) {
      if (t[0] < 0 || t[0] > 1) return std::numeric_limits<double>::infinity();
      Vector q(2);
      q << t[0], 1 - t[0];
      return wd(prefs[0].weights(), q) + wd(prefs[1].weights(), q);
    };
    const Vector t = testing::zoom_minimize(
        primal, (Vector(1) << 0.5).finished(), 0.5, 60, 41);
    EXPECT_NEAR(r.factor(0, 0), t[0], 1e-5);
    EXPECT_NEAR(r.factor(1, 0), 1 - t[0], 1e-5);
  }
}

TEST(DStep, DoesNotIncreaseObjective) {
  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 5; ++trial) {
    const int s = 3 + trial % 4, n = 4 + trial % 3, m = 7, kdim = 1 + trial % 3;
    const double gamma = 0.05;
    const Matrix costs = testing::random_costs(rng, n, s);
    const auto prefs = random_users(rng, m, n);
    const GibbsKernel k(CostMatrix(costs), gamma);
    const auto init = init_factors(s, m, kdim, static_cast<std::uint64_t>(trial));
    const auto ls = lambda_step(init.dictionary, prefs, k, {});
    const double before =
        total_distance(init.dictionary * ls.factor, prefs, costs, gamma);
    const auto ds = d_step(ls.factor, prefs, k, {});
    const double after = total_distance(ds.factor * ls.factor, prefs, costs, gamma);
    EXPECT_LE(after, before + 1e-6);
    EXPECT_LE(ds.state.constraint_violation, 1e-10);
  }
}

TEST(DStep, RejectsRankDeficientLoadings) {
  const Matrix l = Matrix::Ones(2, 3);
  const std::vector<SimplexVector> prefs(3, SimplexVector::uniform(2));
  const GibbsKernel k(CostMatrix(Matrix::Ones(2, 3)), 0.05);
  EXPECT_THROW(d_step(l, prefs, k, {}), RankDeficientError);
}

TEST(RecoveryTargets, AlwaysOnSimplex) {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 5, s = 2 + trial % 6;
    const ConjugateObjective obj(SimplexVector(testing::random_simplex(rng, n)),
                                 GibbsKernel(CostMatrix(testing::random_costs(rng, n, s)),
                                             0.05));
    Vector g(s), grad;
    for (auto& x : g) x = normal(rng);
    obj.value_and_gradient(g, grad);
    EXPECT_GE(grad.minCoeff(), 0.0);
    EXPECT_NEAR(grad.sum(), 1.0, 1e-12);
  }
}

TEST(TrainWcf, FullRankMatchesFiltering) {
  std::mt19937_64 rng(73);
  const int s = 5, n = 7, m = 10;
  const Matrix costs = testing::random_costs(rng, n, s);
  const auto prefs = random_users(rng, m, n);
  const auto model = train_wcf(prefs, CostMatrix(costs), s, 0.05);
  const GibbsKernel k(CostMatrix(costs), 0.05);
  const Matrix wf = wf_columns(prefs, k);
  EXPECT_LT((model.dictionary * model.loadings - wf).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE(model.converged);
  EXPECT_NEAR(model.objective_trace.front(), model.objective_trace.back(), 1e-12);
  for (int u = 0; u < m; ++u) {
    EXPECT_LT((predict_user(model, u).weights() - wf.col(u)).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(TrainWcf, SharedPreferenceRankOne) {
  std::mt19937_64 rng(79);
  const int s = 6, n = 5, m = 8;
  const Matrix costs = testing::random_costs(rng, n, s);
  const SimplexVector p(testing::random_simplex(rng, n));
  const std::vector<SimplexVector> prefs(m, p);
  const auto model = train_wcf(prefs, CostMatrix(costs), 1, 0.05);
  const Vector wf = infer_cold(p, CostMatrix(costs), 0.05).weights();
  for (int u = 0; u < m; ++u) {
    EXPECT_LT((predict_user(model, u).weights() - wf).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(TrainWcf, ObjectiveTraceIsNonIncreasing) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 4; ++trial) {
    const int s = 4 + trial, n = 6, m = 12, kdim = 2 + trial % 2;
    const Matrix costs = testing::random_costs(rng, n, s);
    const auto prefs = random_users(rng, m, n);
    WcfOptions opts;
    opts.seed = static_cast<std::uint64_t>(trial);
    const auto model = train_wcf(prefs, CostMatrix(costs), kdim, 0.05, opts);
    ASSERT_FALSE(model.objective_trace.empty());
    for (std::size_t t = 1; t < model.objective_trace.size(); ++t) {
      EXPECT_LE(model.objective_trace[t], model.objective_trace[t - 1] + 1e-6);
    }
    EXPECT_LE(model.max_simplex_violation, 1e-6);
    EXPECT_EQ(model.reinitializations, 0);
  }
}

TEST(TrainWcf, DeterministicForSeed) {
  std::mt19937_64 rng(89);
  const Matrix costs = testing::random_costs(rng, 5, 6);
  const auto prefs = random_users(rng, 9, 5);
  WcfOptions opts;
  opts.seed = 5;
  const auto a = train_wcf(prefs, CostMatrix(costs), 3, 0.05, opts);
  const auto b = train_wcf(prefs, CostMatrix(costs), 3, 0.05, opts);
  EXPECT_EQ(a.dictionary, b.dictionary);
  EXPECT_EQ(a.loadings, b.loadings);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
}

TEST(TrainWcf, IdenticalUsersReachFilteringOptimum) {
  // Identical users make the first loadings rank one; after reinitializing
  // them the dictionary step reaches the per-user optimum.
  std::mt19937_64 rng(91);
  const Matrix costs = testing::random_costs(rng, 3, 4);
  const SimplexVector p(testing::random_simplex(rng, 3));
  const std::vector<SimplexVector> prefs(5, p);
  const auto model = train_wcf(prefs, CostMatrix(costs), 2, 0.05);
  EXPECT_TRUE(model.converged);
  EXPECT_GE(model.reinitializations, 1);
  const Vector wf = infer_cold(p, CostMatrix(costs), 0.05).weights();
  for (int u = 0; u < 5; ++u) {
    EXPECT_LT((predict_user(model, u).weights() - wf).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(TrainWcf, RankFailureBeyondReinitBudgetIsASolverError) {
  std::mt19937_64 rng(91);
  const Matrix costs = testing::random_costs(rng, 3, 4);
  const std::vector<SimplexVector> prefs(
      5, SimplexVector(testing::random_simplex(rng, 3)));
  WcfOptions opts;
  opts.max_reinit = 0;
  try {
    train_wcf(prefs, CostMatrix(costs), 2, 0.05, opts);
    FAIL() << "expected a solver error";
  } catch (const SolverError& e) {
    EXPECT_NE(std::string(e.what()).find("0 reinitializations"), std::string::npos)
        << e.what();
  }
}

TEST(TrainWcf, StopsAtFilteringLowerBound) {
  // Two interacted items cannot support three independent loadings; the
  // first step already attains the per-user optimum.
  std::mt19937_64 rng(93);
  const Matrix costs = testing::random_costs(rng, 2, 3);
  const auto prefs = random_users(rng, 6, 2);
  const auto model = train_wcf(prefs, CostMatrix(costs), 3, 0.05);
  EXPECT_TRUE(model.converged);
  EXPECT_EQ(model.outer_iterations, 1);
  EXPECT_EQ(model.reinitializations, 0);
  const GibbsKernel k(CostMatrix(costs), 0.05);
  EXPECT_LT((model.dictionary * model.loadings - wf_columns(prefs, k)).cwiseAbs().maxCoeff(),
            1e-10);
}

TEST(TrainWcf, RejectsBadInput) {
  const CostMatrix costs(Matrix::Ones(3, 4));
  EXPECT_THROW(train_wcf({}, costs, 1, 0.05), DomainError);
  const std::vector<SimplexVector> wrong(2, SimplexVector::uniform(2));
  EXPECT_THROW(train_wcf(wrong, costs, 1, 0.05), DomainError);
  const std::vector<SimplexVector> ok(2, SimplexVector::uniform(3));
  EXPECT_THROW(train_wcf(ok, costs, 3, 0.05), DomainError);
  EXPECT_THROW(train_wcf(ok, costs, 1, 0.05, {}, {7}), DomainError);
  EXPECT_THROW(train_wcf(ok, costs, 1, 0.0), DomainError);
}

TEST(PredictUser, CleansColumns) {
  FactorModel model;
  model.k = 1;
  model.dictionary = (Matrix(3, 1) << 0.2, 0.3, 0.5).finished();
  model.loadings = (Matrix(1, 2) << 1.0, 1.0).finished();
  model.user_ids = {4, 9};
  EXPECT_EQ(predict_user(model, 9).weights(), model.dictionary.col(0));
  model.dictionary << 0.6, -1e-9, 0.4;
  const auto q = predict_user(model, 4);
  EXPECT_EQ(q[1], 0.0);
  EXPECT_NEAR(q.weights().sum(), 1.0, 1e-15);
  EXPECT_THROW(predict_user(model, 5), DomainError);
}

TEST(SimplexViolation, ReportsWorstColumn) {
  Matrix c(2, 2);
  c << 0.5, -0.1, 0.5, 1.0;
  EXPECT_DOUBLE_EQ(simplex_violation(c), 0.1);
  c << 0.5, 0.3, 0.5, 0.7;
  EXPECT_NEAR(simplex_violation(c), 0.0, 1e-16);
}

TEST(ModelIo, RoundTripIsBitExact) {
  std::mt19937_64 rng(97);
  const Matrix costs = testing::random_costs(rng, 5, 6);
  const auto prefs = random_users(rng, 7, 5);
  auto model = train_wcf(prefs, CostMatrix(costs, {1, 2, 3, 4, 5}, {11, 12, 13, 14, 15, 16}),
                         2, 0.05, {}, {100, 101, 102, 103, 104, 105, 106});
  const fs::path dir = fs::temp_directory_path() / "wcf_model_roundtrip";
  fs::remove_all(dir);
  save_model(model, dir);
  const auto loaded = load_model(dir);
  EXPECT_EQ(loaded.dictionary, model.dictionary);
  EXPECT_EQ(loaded.loadings, model.loadings);
  EXPECT_EQ(loaded.gamma, model.gamma);
  EXPECT_EQ(loaded.k, model.k);
  EXPECT_EQ(loaded.item_ids, model.item_ids);
  EXPECT_EQ(loaded.user_ids, model.user_ids);
  EXPECT_EQ(loaded.objective_trace, model.objective_trace);
  EXPECT_EQ(loaded.converged, model.converged);
  fs::remove_all(dir);
}

TEST(ModelIo, RejectsMissingOrInconsistentModel) {
  const fs::path dir = fs::temp_directory_path() / "wcf_model_bad";
  fs::remove_all(dir);
  EXPECT_THROW(load_model(dir), DataError);
  auto model = init_factors(3, 2, 2, 0);
  save_model(model, dir);
  write_matrix_tsv(Matrix::Ones(2, 2), dir / "dictionary.tsv");
  EXPECT_THROW(load_model(dir), DataError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace wcf
