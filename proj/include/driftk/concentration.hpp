#pragma once

#include "driftk/common.hpp"

namespace driftk {

// Numeric calculators for the sub-Gaussian toolbox.  These evaluate closed
// forms; validity is established empirically in the test suite.

// per-component sub-Gaussian norms of a random vector; B(v) = sum tau_j
struct SubGaussianSpec {
  Vec tau;

  double B() const {
    double s = 0.0;
    for (double t : tau) {
      if (t < 0.0) throw std::invalid_argument("SubGaussianSpec: tau >= 0 required");
      s += t;
    }
    return s;
  }
};

// B(mean of K iid vectors) <= tau * d / sqrt(K) under a uniform tau cap
inline double avg_norm_bound(double tau, int d, int K) {
  if (tau < 0.0 || d < 1 || K < 1)
    throw std::invalid_argument("avg_norm_bound: need tau >= 0, d >= 1, K >= 1");
  return tau * static_cast<double>(d) / std::sqrt(static_cast<double>(K));
}

// P{ |v| > t } <= 2 exp(-t^2 / (2 B(v)^2))
inline double norm_tail(double Bv, double t) {
  if (!(Bv > 0.0) || t < 0.0) throw std::invalid_argument("norm_tail: need Bv > 0, t >= 0");
  return 2.0 * std::exp(-t * t / (2.0 * Bv * Bv));
}

// centered variable with tail 2 exp(-c t^2) has mgf parameter sigma^2 = 9/c
inline double mgf_sigma_from_tail(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("mgf_sigma_from_tail: c > 0 required");
  return 9.0 / c;
}

// conditional Hoeffding: a <= V <= b, E[V|F] = 0  =>  sigma^2 = (b-a)^2 / 4
inline double hoeffding_sigma(double a, double b) {
  if (b < a) throw std::invalid_argument("hoeffding_sigma: b >= a required");
  return (b - a) * (b - a) / 4.0;
}

// sub-Gaussian martingale sum: P{ sum a_i V_i > t } <= exp(-t^2 / (2 nu)),
// nu = sum sigma_i^2 a_i^2
inline double martingale_sum_tail(const Vec& sigma2, const Vec& a, double t) {
  if (sigma2.size() != a.size())
    throw std::invalid_argument("martingale_sum_tail: length mismatch");
  if (t < 0.0) throw std::invalid_argument("martingale_sum_tail: t >= 0 required");
  double nu = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) nu += sigma2[i] * a[i] * a[i];
  if (nu == 0.0) return t == 0.0 ? 1.0 : 0.0;
  return std::exp(-t * t / (2.0 * nu));
}

// A_j = { j, j+W, ..., j + floor((n-j)/W) W } for j = 1..W; disjoint, and the
// union is {1..n}.  Indices are 1-based to match the combinatorial convention.
inline std::vector<std::vector<int>> cover(int n, int W) {
  if (W < 1 || W > n) throw std::invalid_argument("cover: 1 <= W <= n required");
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(W));
  for (int j = 1; j <= W; ++j)
    for (int i = j; i <= n; i += W) groups[j - 1].push_back(i);
  return groups;
}

// dependent Hoeffding: P{ sum V_i > t } <= exp(-2 t^2 / (W sum (b_i - a_i)^2))
inline double dependent_hoeffding_tail(const std::vector<std::pair<double, double>>& ranges,
                                       int W, double t) {
  if (t < 0.0) throw std::invalid_argument("dependent_hoeffding_tail: t >= 0 required");
  if (W < 1) throw std::invalid_argument("dependent_hoeffding_tail: W >= 1 required");
  double ss = 0.0;
  for (const auto& [a, b] : ranges) {
    if (b < a) throw std::invalid_argument("dependent_hoeffding_tail: b_i >= a_i required");
    ss += (b - a) * (b - a);
  }
  if (ss == 0.0) return t == 0.0 ? 1.0 : 0.0;
  return std::exp(-2.0 * t * t / (static_cast<double>(W) * ss));
}

}  // namespace driftk
