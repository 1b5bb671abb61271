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

// Entropic optimal transport between a distribution p over n "interacted"
// items and a distribution q over s "cold" items. Cost matrices are always
// oriented n x s, so p indexes rows and q indexes columns.
//
//   W(p, q)   = min_{T in U(p,q)} <T, M>
//   W_g(p, q) = min_{T in U(p,q)} <T, M> - g * h(T),   h(T) = -<T, log T>
//
// H_p(q) = W_g(p, q) has a closed-form convex conjugate
//
//   H_p^*(g)      = gamma * (h(p) + <p, log K alpha>)
//   grad H_p^*(g) = alpha .* K^T (p ./ K alpha)
//
// with K = exp(-M / gamma) and alpha = exp(g / gamma).

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace wcf {

using ItemId = std::int64_t;
using UserId = std::int64_t;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A probability vector. Construction rejects negative or non-finite entries
/// and all-zero input, then renormalizes to unit mass.
class SimplexVector {
 public:
  explicit SimplexVector(Vector weights);

  static SimplexVector uniform(Eigen::Index n);

  const Vector& weights() const noexcept { return weights_; }
  Eigen::Index size() const noexcept { return weights_.size(); }
  double operator[](Eigen::Index i) const { return weights_[i]; }

 private:
  Vector weights_;
};

/// Nonnegative utility cost between row items (interacted) and column items
/// (cold). Row and column id lists must each be duplicate-free.
class CostMatrix {
 public:
  /// Ids default to 0..n-1 for rows and 0..s-1 for columns.
  explicit CostMatrix(Matrix costs);
  CostMatrix(Matrix costs, std::vector<ItemId> row_ids,
             std::vector<ItemId> col_ids);

  const Matrix& costs() const noexcept { return costs_; }
  Eigen::Index rows() const noexcept { return costs_.rows(); }
  Eigen::Index cols() const noexcept { return costs_.cols(); }
  const std::vector<ItemId>& row_ids() const noexcept { return row_ids_; }
  const std::vector<ItemId>& col_ids() const noexcept { return col_ids_; }

  CostMatrix transposed() const;

 private:
  Matrix costs_;
  std::vector<ItemId> row_ids_;
  std::vector<ItemId> col_ids_;
};

/// K = exp(-M / gamma), stored row-major. The log form -M / gamma is always
/// kept; the exponentiated form is only available when every entry is safely
/// above the underflow threshold.
class GibbsKernel {
 public:
  GibbsKernel(const CostMatrix& costs, double gamma);

  double gamma() const noexcept { return data_->gamma; }
  Eigen::Index rows() const noexcept { return data_->log_kernel.rows(); }
  Eigen::Index cols() const noexcept { return data_->log_kernel.cols(); }

  /// True when exp(-M / gamma) would underflow for some entry.
  bool log_domain() const noexcept { return data_->log_domain; }

  /// Requires !log_domain().
  const RowMatrix& kernel() const;
  const RowMatrix& log_kernel() const noexcept { return data_->log_kernel; }

  /// Largest exponent max(M) / gamma for which the plain form is kept.
  static constexpr double kMaxPlainExponent = 600.0;

 private:
  struct Data {
    double gamma;
    bool log_domain;
    RowMatrix kernel;
    RowMatrix log_kernel;
  };
  std::shared_ptr<const Data> data_;
};

/// Dual variable of the second marginal. Entries must be finite.
class DualPotential {
 public:
  explicit DualPotential(Vector values);

  static DualPotential zeros(Eigen::Index s);

  const Vector& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.size(); }

 private:
  Vector values_;
};

struct TransportPlan {
  Matrix plan;
  double transport_cost = 0.0;     // <T, M>
  double regularized_value = 0.0;  // <T, M> - gamma * h(T)
  double marginal_violation = 0.0; // max of both marginals' L-inf error
  int iterations = 0;
  bool log_domain = false;
};

/// -sum x log x with 0 log 0 = 0. Throws DomainError on a negative entry.
double entropy(const Eigen::Ref<const Matrix>& x);
double entropy(const SimplexVector& p);
double entropy(const TransportPlan& plan);

struct SinkhornOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

/// Solves the entropic problem by matrix scaling. Falls back to log-domain
/// iterations (with gamma annealing) for gamma < 0.01 or when the kernel
/// underflows. Throws ConvergenceError when the marginal violation is still
/// above tol after max_iter iterations at the target gamma.
TransportPlan sinkhorn(const SimplexVector& p, const SimplexVector& q,
                       const CostMatrix& costs, double gamma,
                       const SinkhornOptions& options = {});

/// W_gamma(p, q), the regularized value of the Sinkhorn plan.
double smoothed_wasserstein(const SimplexVector& p, const SimplexVector& q,
                            const CostMatrix& costs, double gamma,
                            const SinkhornOptions& options = {});

struct ExactOtOptions {
  std::size_t max_cells = 400;
  int max_pivots = 100000;
};

/// Exact unregularized transport by the transportation simplex method
/// (MODI potentials, Bland's rule). Test-scale only: refuses instances with
/// more than max_cells cells.
TransportPlan exact_ot_oracle(const SimplexVector& p, const SimplexVector& q,
                              const CostMatrix& costs,
                              const ExactOtOptions& options = {});

/// H_p^* for a fixed p, evaluated repeatedly for many dual vectors. Only rows
/// in the support of p contribute, so sparse preferences are cheap. Holds a
/// shared handle to the kernel and is safe for concurrent const use.
class ConjugateObjective {
 public:
  ConjugateObjective(const SimplexVector& p, GibbsKernel kernel);

  double value(const Eigen::Ref<const Vector>& g) const;
  /// Writes grad H_p^*(g) into grad (resized to s) and returns H_p^*(g).
  double value_and_gradient(const Eigen::Ref<const Vector>& g,
                            Vector& grad) const;

  Eigen::Index dual_size() const noexcept { return kernel_.cols(); }
  const GibbsKernel& kernel() const noexcept { return kernel_; }

 private:
  template <bool kWantGradient>
  double evaluate(const Eigen::Ref<const Vector>& g, Vector* grad) const;

  GibbsKernel kernel_;
  std::vector<Eigen::Index> support_;
  std::vector<double> mass_;
  double entropy_;
};

double conjugate_value(const SimplexVector& p, const DualPotential& g,
                       const GibbsKernel& kernel);

SimplexVector conjugate_grad(const SimplexVector& p, const DualPotential& g,
                             const GibbsKernel& kernel);

}  // namespace wcf
