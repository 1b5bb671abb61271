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

#include "wcf/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>
#include <utility>

#include "wcf/error.hpp"

namespace wcf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_unique(const std::vector<ItemId>& ids, const char* what) {
  std::unordered_set<ItemId> seen;
  for (ItemId id : ids) {
    if (!seen.insert(id).second) {
      throw DomainError(std::string("duplicate ") + what +
                        " id: " + std::to_string(id));
    }
  }
}

std::vector<ItemId> iota_ids(Eigen::Index n) {
  std::vector<ItemId> ids(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  return ids;
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw DomainError("gamma must be positive and finite, got " +
                      std::to_string(gamma));
  }
}

void check_shapes(const SimplexVector& p, const SimplexVector& q,
                  const CostMatrix& costs) {
  if (p.size() != costs.rows() || q.size() != costs.cols()) {
    throw DomainError("marginals " + std::to_string(p.size()) + "x" +
                      std::to_string(q.size()) + " do not match cost matrix " +
                      std::to_string(costs.rows()) + "x" +
                      std::to_string(costs.cols()));
  }
}

std::vector<Eigen::Index> support_of(const Vector& w) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) idx.push_back(i);
  }
  return idx;
}

// Log-sum-exp over a contiguous or strided range of values.
template <typename Expr>
double log_sum_exp(const Expr& x) {
  const double mx = x.maxCoeff();
  if (mx == kNegInf) return kNegInf;
  return mx + std::log((x.array() - mx).exp().sum());
}

// Sinkhorn on a problem restricted to strictly positive marginals.
struct ReducedProblem {
  Vector p;
  Vector q;
  Matrix costs;
};

struct ScalingResult {
  Matrix plan;
  Matrix log_plan;  // only filled by the log-domain solver
  double violation = 0.0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;  // numerical breakdown in the plain solver
};

ScalingResult plain_sinkhorn(const ReducedProblem& pr, double gamma,
                             const SinkhornOptions& opt) {
  ScalingResult res;
  const Matrix kernel = (-pr.costs / gamma).array().exp().matrix();
  Vector u(pr.p.size());
  Vector v = Vector::Ones(pr.q.size());
  Vector kv = kernel * v;
  for (int it = 1; it <= opt.max_iter; ++it) {
    u = pr.p.cwiseQuotient(kv);
    const Vector ktu = kernel.transpose() * u;
    v = pr.q.cwiseQuotient(ktu);
    kv = kernel * v;
    if (!u.allFinite() || !v.allFinite() || !kv.allFinite() ||
        kv.minCoeff() <= 0.0) {
      res.failed = true;
      return res;
    }
    // Columns are exact after the v update up to rounding; rows carry the
    // remaining violation.
    const double row_viol = (u.cwiseProduct(kv) - pr.p).cwiseAbs().maxCoeff();
    const double col_viol =
        (v.cwiseProduct(kernel.transpose() * u) - pr.q).cwiseAbs().maxCoeff();
    res.violation = std::max(row_viol, col_viol);
    res.iterations = it;
    if (res.violation < opt.tol) {
      res.converged = true;
      break;
    }
  }
  res.plan = u.asDiagonal() * kernel * v.asDiagonal();
  return res;
}

// Log-domain potentials f (rows) and g (cols): T = exp((f + g - M) / gamma).
struct LogState {
  Vector f;
  Vector g;
};

ScalingResult log_sinkhorn_stage(const ReducedProblem& pr, double gamma,
                                 double tol, int max_iter, LogState& st) {
  ScalingResult res;
  const Eigen::Index n = pr.p.size();
  const Eigen::Index s = pr.q.size();
  const Vector log_p = pr.p.array().log().matrix();
  const Vector log_q = pr.q.array().log().matrix();
  Vector row_lse(n);
  Vector col_lse(s);
  auto rows_lse = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      row_lse[i] =
          log_sum_exp((st.g.transpose() - pr.costs.row(i)) / gamma);
    }
  };
  rows_lse();
  for (int it = 1; it <= max_iter; ++it) {
    st.f = gamma * (log_p - row_lse);
    for (Eigen::Index j = 0; j < s; ++j) {
      col_lse[j] = log_sum_exp((st.f - pr.costs.col(j)) / gamma);
    }
    st.g = gamma * (log_q - col_lse);
    rows_lse();
    // Row mass is exp(f_i / gamma + row_lse_i).
    double viol = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      viol = std::max(viol,
                      std::abs(std::exp(st.f[i] / gamma + row_lse[i]) - pr.p[i]));
    }
    res.violation = viol;
    res.iterations = it;
    if (viol < tol) {
      res.converged = true;
      break;
    }
  }
  res.log_plan.resize(n, s);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < s; ++j) {
      res.log_plan(i, j) = (st.f[i] + st.g[j] - pr.costs(i, j)) / gamma;
    }
  }
  res.plan = res.log_plan.array().exp().matrix();
  double col_viol = (res.plan.colwise().sum().transpose() - pr.q)
                        .cwiseAbs()
                        .maxCoeff();
  res.violation = std::max(res.violation, col_viol);
  return res;
}

// Anneals gamma from a coarse value toward the target, warm-starting the
// potentials at each stage; only the final stage counts toward convergence.
ScalingResult log_sinkhorn(const ReducedProblem& pr, double gamma,
                           const SinkhornOptions& opt) {
  LogState st{Vector::Zero(pr.p.size()), Vector::Zero(pr.q.size())};
  const double range = pr.costs.maxCoeff() - pr.costs.minCoeff();
  double stage_gamma = std::max(range, gamma);
  int warmup_iterations = 0;
  while (stage_gamma > 2.0 * gamma) {
    const auto stage = log_sinkhorn_stage(pr, stage_gamma,
                                          std::max(opt.tol, 1e-6),
                                          opt.max_iter, st);
    warmup_iterations += stage.iterations;
    stage_gamma *= 0.5;
  }
  auto res = log_sinkhorn_stage(pr, gamma, opt.tol, opt.max_iter, st);
  res.converged = res.violation < opt.tol;
  res.iterations += warmup_iterations;
  return res;
}

double plan_entropy_term(const Matrix& plan, const Matrix& log_plan) {
  // sum T log T, using the exact logarithm when available.
  double acc = 0.0;
  for (Eigen::Index j = 0; j < plan.cols(); ++j) {
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
      const double t = plan(i, j);
      if (t > 0.0) {
        acc += t * (log_plan.size() ? log_plan(i, j) : std::log(t));
      }
    }
  }
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------

SimplexVector::SimplexVector(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0) throw DomainError("empty probability vector");
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    const double w = weights_[i];
    if (!std::isfinite(w) || w < 0.0) {
      throw DomainError("probability entry " + std::to_string(i) +
                        " is negative or non-finite: " + std::to_string(w));
    }
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("probability vector has zero mass");
  weights_ /= total;
}

SimplexVector SimplexVector::uniform(Eigen::Index n) {
  return SimplexVector(Vector::Ones(n));
}

CostMatrix::CostMatrix(Matrix costs)
    : CostMatrix(costs, iota_ids(costs.rows()), iota_ids(costs.cols())) {}

CostMatrix::CostMatrix(Matrix costs, std::vector<ItemId> row_ids,
                       std::vector<ItemId> col_ids)
    : costs_(std::move(costs)),
      row_ids_(std::move(row_ids)),
      col_ids_(std::move(col_ids)) {
  if (costs_.rows() == 0 || costs_.cols() == 0) {
    throw DomainError("cost matrix must be non-empty");
  }
  if (static_cast<Eigen::Index>(row_ids_.size()) != costs_.rows() ||
      static_cast<Eigen::Index>(col_ids_.size()) != costs_.cols()) {
    throw DomainError("cost matrix id lists do not match its shape");
  }
  if (!costs_.allFinite() || costs_.minCoeff() < 0.0) {
    throw DomainError("cost matrix entries must be finite and nonnegative");
  }
  check_unique(row_ids_, "row");
  check_unique(col_ids_, "column");
}

CostMatrix CostMatrix::transposed() const {
  return CostMatrix(costs_.transpose(), col_ids_, row_ids_);
}

GibbsKernel::GibbsKernel(const CostMatrix& costs, double gamma) {
  check_gamma(gamma);
  Data d;
  d.gamma = gamma;
  d.log_kernel = -costs.costs() / gamma;
  d.log_domain = costs.costs().maxCoeff() / gamma > kMaxPlainExponent;
  if (!d.log_domain) d.kernel = d.log_kernel.array().exp().matrix();
  data_ = std::make_shared<const Data>(std::move(d));
}

const RowMatrix& GibbsKernel::kernel() const {
  if (data_->log_domain) {
    throw DomainError("Gibbs kernel underflows; use the log-domain form");
  }
  return data_->kernel;
}

DualPotential::DualPotential(Vector values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw DomainError("dual potential is not finite");
}

DualPotential DualPotential::zeros(Eigen::Index s) {
  return DualPotential(Vector::Zero(s));
}

// ---------------------------------------------------------------------------

double entropy(const Eigen::Ref<const Matrix>& x) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double v = x(i, j);
      if (v < 0.0 || std::isnan(v)) {
        throw DomainError("entropy of a negative entry");
      }
      if (v > 0.0) acc -= v * std::log(v);
    }
  }
  return acc;
}

double entropy(const SimplexVector& p) { return entropy(p.weights()); }

double entropy(const TransportPlan& plan) { return entropy(plan.plan); }

TransportPlan sinkhorn(const SimplexVector& p, const SimplexVector& q,
                       const CostMatrix& costs, double gamma,
                       const SinkhornOptions& options) {
  check_gamma(gamma);
  check_shapes(p, q, costs);
  if (options.max_iter < 1) throw DomainError("max_iter must be >= 1");
  if (!(options.tol > 0.0)) throw DomainError("tol must be positive");

  const auto rows = support_of(p.weights());
  const auto cols = support_of(q.weights());
  ReducedProblem pr;
  pr.p = p.weights()(rows);
  pr.q = q.weights()(cols);
  pr.costs = costs.costs()(rows, cols);

  const bool want_log =
      gamma < 0.01 || pr.costs.maxCoeff() / gamma > GibbsKernel::kMaxPlainExponent;
  ScalingResult res;
  bool used_log = want_log;
  if (!want_log) {
    res = plain_sinkhorn(pr, gamma, options);
    if (res.failed) used_log = true;
  }
  if (used_log) res = log_sinkhorn(pr, gamma, options);

  if (!res.converged || !res.plan.allFinite()) {
    throw ConvergenceError(
        "sinkhorn did not converge: marginal violation " +
            std::to_string(res.violation) + " after " +
            std::to_string(res.iterations) + " iterations",
        res.violation, res.iterations);
  }

  TransportPlan out;
  out.plan = Matrix::Zero(costs.rows(), costs.cols());
  out.plan(rows, cols) = res.plan;
  out.transport_cost = (res.plan.array() * pr.costs.array()).sum();
  out.regularized_value =
      out.transport_cost + gamma * plan_entropy_term(res.plan, res.log_plan);
  out.marginal_violation = res.violation;
  out.iterations = res.iterations;
  out.log_domain = used_log;
  return out;
}

double smoothed_wasserstein(const SimplexVector& p, const SimplexVector& q,
                            const CostMatrix& costs, double gamma,
                            const SinkhornOptions& options) {
  return sinkhorn(p, q, costs, gamma, options).regularized_value;
}

// ---------------------------------------------------------------------------

ConjugateObjective::ConjugateObjective(const SimplexVector& p,
                                       GibbsKernel kernel)
    : kernel_(std::move(kernel)), entropy_(entropy(p)) {
  if (p.size() != kernel_.rows()) {
    throw DomainError("preference length " + std::to_string(p.size()) +
                      " does not match kernel rows " +
                      std::to_string(kernel_.rows()));
  }
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      support_.push_back(i);
      mass_.push_back(p[i]);
    }
  }
}

template <bool kWantGradient>
double ConjugateObjective::evaluate(const Eigen::Ref<const Vector>& g,
                                    Vector* grad) const {
  const Eigen::Index s = kernel_.cols();
  if (g.size() != s) {
    throw DomainError("dual potential length " + std::to_string(g.size()) +
                      " does not match kernel columns " + std::to_string(s));
  }
  const double gamma = kernel_.gamma();
  double acc = 0.0;  // sum_i p_i log (K alpha)_i
  if constexpr (kWantGradient) grad->setZero(s);

  if (!kernel_.log_domain()) {
    // alpha scaled by exp(-max g / gamma) so that its largest entry is 1.
    const double shift = g.maxCoeff();
    const Vector alpha = ((g.array() - shift) / gamma).exp().matrix();
    const RowMatrix& k = kernel_.kernel();
    for (std::size_t r = 0; r < support_.size(); ++r) {
      const auto row = k.row(support_[r]);
      const double z = row.dot(alpha);
      acc += mass_[r] * std::log(z);
      if constexpr (kWantGradient) {
        grad->noalias() += (mass_[r] / z) * row.transpose();
      }
    }
    acc += shift / gamma;  // mass sums to one
    if constexpr (kWantGradient) *grad = grad->cwiseProduct(alpha);
  } else {
    const RowMatrix& lk = kernel_.log_kernel();
    const Vector scaled = g / gamma;
    Vector logits(s);
    for (std::size_t r = 0; r < support_.size(); ++r) {
      logits = lk.row(support_[r]).transpose() + scaled;
      const double lse = log_sum_exp(logits);
      acc += mass_[r] * lse;
      if constexpr (kWantGradient) {
        grad->array() += mass_[r] * (logits.array() - lse).exp();
      }
    }
  }

  const double value = gamma * (entropy_ + acc);
  if (!std::isfinite(value) || (kWantGradient && !grad->allFinite())) {
    throw SolverError("conjugate evaluation is not finite");
  }
  return value;
}

double ConjugateObjective::value(const Eigen::Ref<const Vector>& g) const {
  return evaluate<false>(g, nullptr);
}

double ConjugateObjective::value_and_gradient(const Eigen::Ref<const Vector>& g,
                                              Vector& grad) const {
  return evaluate<true>(g, &grad);
}

double conjugate_value(const SimplexVector& p, const DualPotential& g,
                       const GibbsKernel& kernel) {
  return ConjugateObjective(p, kernel).value(g.values());
}

SimplexVector conjugate_grad(const SimplexVector& p, const DualPotential& g,
                             const GibbsKernel& kernel) {
  Vector grad;
  ConjugateObjective(p, kernel).value_and_gradient(g.values(), grad);
  return SimplexVector(std::move(grad));
}

}  // namespace wcf
