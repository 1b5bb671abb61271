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

// Reference computations used only by tests. None of these call into the
// library's solvers.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace wcf::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double plain_entropy(const VectorXd& x) {
  double h = 0.0;
  for (double v : x) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

inline double log_sum_exp(const VectorXd& x) {
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

/// Smoothed transport value min <T,M> - gamma h(T) over U(p,q), computed by
/// damped Newton ascent on the semi-dual
///   max_g <g,q> - gamma sum_i p_i LSE_j((g_j - M_ij)/gamma) - gamma h(p)
/// restricted to the supports of p and q. One potential is pinned to zero
/// to remove the shift invariance.
class SemiDualOracle {
 public:
  SemiDualOracle(MatrixXd costs, double gamma)
      : costs_(std::move(costs)), gamma_(gamma) {}

  double operator()(const VectorXd& p, const VectorXd& q) {
    std::vector<int> rows, cols;
    for (int i = 0; i < p.size(); ++i) {
      if (p[i] > 0) rows.push_back(i);
    }
    for (int j = 0; j < q.size(); ++j) {
      if (q[j] > 0) cols.push_back(j);
    }
    const int n = static_cast<int>(rows.size());
    const int s = static_cast<int>(cols.size());
    VectorXd pp(n), qq(s);
    MatrixXd c(n, s);
    for (int a = 0; a < n; ++a) pp[a] = p[rows[a]];
    for (int b = 0; b < s; ++b) qq[b] = q[cols[b]];
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < s; ++b) c(a, b) = costs_(rows[a], cols[b]);
    }
    pp /= pp.sum();
    qq /= qq.sum();
    const double hp = plain_entropy(pp);
    if (s == 1) {
      return pp.dot(c.col(0)) - gamma_ * hp;
    }

    // Start from the previous solution when the support is unchanged, else
    // from one scaling step: g_j = gamma (log q_j - log sum_i p_i K_ij).
    VectorXd g(s);
    if (cols == warm_cols_ && rows == warm_rows_) {
      g = warm_;
    } else {
      VectorXd z(n);
      for (int b = 0; b < s; ++b) {
        for (int a = 0; a < n; ++a) z[a] = std::log(pp[a]) - c(a, b) / gamma_;
        g[b] = gamma_ * (std::log(qq[b]) - log_sum_exp(z));
      }
    }
    g.array() -= g[0];
    VectorXd z(s), pi(s);
    auto objective = [&](const VectorXd& x, VectorXd* grad, MatrixXd* hess) {
      double f = x.dot(qq) - gamma_ * hp;
      if (grad) *grad = qq;
      if (hess) hess->setZero(s, s);
      for (int a = 0; a < n; ++a) {
        double zmax = -std::numeric_limits<double>::infinity();
        for (int b = 0; b < s; ++b) {
          z[b] = (x[b] - c(a, b)) / gamma_;
          zmax = std::max(zmax, z[b]);
        }
        double sum = 0;
        for (int b = 0; b < s; ++b) sum += std::exp(z[b] - zmax);
        const double lse = zmax + std::log(sum);
        f -= gamma_ * pp[a] * lse;
        if (grad || hess) {
          for (int b = 0; b < s; ++b) pi[b] = std::exp(z[b] - lse);
          if (grad) *grad -= pp[a] * pi;
          if (hess) {
            const double w = pp[a] / gamma_;
            for (int i = 0; i < s; ++i) {
              (*hess)(i, i) -= w * pi[i];
              for (int j = 0; j < s; ++j) (*hess)(i, j) += w * pi[i] * pi[j];
            }
          }
        }
      }
      return f;
    };

    VectorXd grad;
    MatrixXd hess;
    double f = objective(g, &grad, &hess);
    for (int it = 0; it < 1000; ++it) {
      // Newton on coordinates 1..s-1 (g_0 pinned).
      const VectorXd gr = grad.tail(s - 1);
      if (gr.lpNorm<Eigen::Infinity>() < 1e-14) break;
      const MatrixXd h = hess.bottomRightCorner(s - 1, s - 1);
      VectorXd newton = h.ldlt().solve(-gr);
      if (!newton.allFinite() || gr.dot(newton) <= 0) newton = gr;
      // Trust region of a few gamma: where some softmax weights vanish the
      // objective is nearly linear and the raw Newton step is useless.
      const double reach = newton.lpNorm<Eigen::Infinity>();
      if (reach > 5 * gamma_) newton *= 5 * gamma_ / reach;
      // The Hessian is bounded by 1/gamma, so a gradient step of gamma is a
      // safe fallback when the Newton step is useless (flat directions).
      bool moved = false;
      for (const VectorXd& dir : {newton, VectorXd(gamma_ * gr)}) {
        double t = 1.0;
        for (int b = 0; b < 60 && !moved; ++b, t *= 0.5) {
          VectorXd trial = g;
          trial.tail(s - 1) += t * dir;
          const double ft = objective(trial, nullptr, nullptr);
          if (ft >= f + 1e-4 * t * gr.dot(dir) - 1e-15 * std::abs(f)) {
            g = trial;
            moved = true;
          }
        }
        if (moved) break;
      }
      if (!moved) break;
      f = objective(g, &grad, &hess);
    }
    warm_ = g;
    warm_cols_ = cols;
    warm_rows_ = rows;
    return f;
  }

 private:
  MatrixXd costs_;
  double gamma_;
  VectorXd warm_;
  std::vector<int> warm_cols_, warm_rows_;
};

/// Central differences of f at x with step h.
inline VectorXd central_difference(const std::function<double(const VectorXd&)>& f,
                                   const VectorXd& x, double h = 1e-6) {
  VectorXd out(x.size());
  for (int i = 0; i < x.size(); ++i) {
    VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    out[i] = (f(a) - f(b)) / (2 * h);
  }
  return out;
}

/// Calls fn(q) for every point of the grid {k/steps} over the simplex of
/// dimension s (s <= 3).
inline void for_each_simplex_point(int s, int steps,
                                   const std::function<void(const VectorXd&)>& fn) {
  VectorXd q(s);
  if (s == 1) {
    q << 1.0;
    fn(q);
  } else if (s == 2) {
    for (int a = 0; a <= steps; ++a) {
      q << double(a) / steps, double(steps - a) / steps;
      fn(q);
    }
  } else {
    for (int a = 0; a <= steps; ++a) {
      // Serpentine order keeps consecutive points adjacent for warm starts.
      for (int bb = 0; bb <= steps - a; ++bb) {
        const int b = (a % 2 == 0) ? bb : steps - a - bb;
        q << double(a) / steps, double(b) / steps, double(steps - a - b) / steps;
        fn(q);
      }
    }
  }
}

/// Minimizes f over a box in R^d (d = 1 or 2) by repeated grid refinement.
inline VectorXd zoom_minimize(const std::function<double(const VectorXd&)>& f,
                              VectorXd center, double radius, int rounds = 40,
                              int points = 21) {
  const int d = static_cast<int>(center.size());
  double best = f(center);
  for (int r = 0; r < rounds; ++r) {
    VectorXd best_x = center;
    const double h = 2 * radius / (points - 1);
    VectorXd x(d);
    if (d == 1) {
      for (int a = 0; a < points; ++a) {
        x[0] = center[0] - radius + a * h;
        const double v = f(x);
        if (v < best) {
          best = v;
          best_x = x;
        }
      }
    } else {
      for (int a = 0; a < points; ++a) {
        for (int b = 0; b < points; ++b) {
          x << center[0] - radius + a * h, center[1] - radius + b * h;
          const double v = f(x);
          if (v < best) {
            best = v;
            best_x = x;
          }
        }
      }
    }
    center = best_x;
    radius *= 0.35;
  }
  return center;
}

/// Dual function of a smoothed transport problem written directly from the
/// definition: gamma * (h(p) + sum_i p_i log sum_j exp((g_j - M_ij)/gamma)).
inline double direct_conjugate(const VectorXd& p, const VectorXd& g,
                               const MatrixXd& costs, double gamma) {
  double v = plain_entropy(p);
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] == 0) continue;
    VectorXd z = (g - costs.row(i).transpose()) / gamma;
    v += p[i] * log_sum_exp(z);
  }
  return gamma * v;
}

// Ranking metrics written from their textbook definitions over a 0/1
// relevance vector in rank order.
inline double brute_ap(const std::vector<int>& rel) {
  double sum = 0;
  int total = 0;
  for (int r : rel) total += r;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (!rel[k]) continue;
    int hits = 0;
    for (std::size_t j = 0; j <= k; ++j) hits += rel[j];
    sum += double(hits) / double(k + 1);
  }
  return sum / total;
}

inline double brute_ndcg(const std::vector<int>& rel, int scope) {
  double dcg = 0, idcg = 0;
  int total = 0;
  for (int r : rel) total += r;
  for (int k = 1; k <= scope && k <= int(rel.size()); ++k) {
    dcg += rel[k - 1] / std::log2(k + 1.0);
  }
  for (int k = 1; k <= std::min(scope, total); ++k) idcg += 1 / std::log2(k + 1.0);
  return dcg / idcg;
}

inline double brute_recall(const std::vector<int>& rel, int scope) {
  int hits = 0, total = 0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    total += rel[k];
    if (int(k) < scope) hits += rel[k];
  }
  return double(hits) / total;
}

inline VectorXd random_simplex(std::mt19937_64& rng, int n) {
  std::exponential_distribution<double> e(1.0);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = e(rng);
  return v / v.sum();
}

inline MatrixXd random_costs(std::mt19937_64& rng, int n, int s) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd m(n, s);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < s; ++j) m(i, j) = u(rng);
  }
  return m;
}

}  // namespace wcf::testing
