#pragma once

#include "driftk/drift.hpp"

namespace driftk {

enum class ProbeMode { Grid, EigenGradientDescent };

// probe points: feasible-set center plus +- half-radius along each axis
inline std::vector<Vec> default_probes(const FeasibleSet& set) {
  std::vector<Vec> probes;
  const Vec c = set.centroid();
  probes.push_back(c);
  for (int axis = 0; axis < set.dim; ++axis) {
    const double h = 0.5 * set.half_extent(axis);
    Vec p = c;
    p[axis] = c[axis] + h;
    probes.push_back(project(set, p));
    p[axis] = c[axis] - h;
    probes.push_back(project(set, p));
  }
  return probes;
}

namespace detail {

// v' (dT/dx_q) v with dT/dx_q by central differences of the batch-mean Hessian
inline Vec eigen_gradient(const LossModel& model, const Vec& x, const std::vector<Sample>& batch,
                          const Vec& v) {
  const int d = model.dim();
  Vec g(d, 0.0);
  const double h = 1e-5 * (1.0 + norm2(x));
  for (int q = 0; q < d; ++q) {
    Vec xp = x, xm = x;
    xp[q] += h;
    xm[q] -= h;
    const Matrix tp = empirical_hessian(model, xp, batch);
    const Matrix tm = empirical_hessian(model, xm, batch);
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) s += v[i] * v[j] * (tp(i, j) - tm(i, j));
    g[q] = s / (2.0 * h);
  }
  return g;
}

struct EigenGradientOptions {
  int steps = 25;
  double step_frac = 0.1;  // step size as a fraction of diam(X)
};

inline double hessian_extreme_eig(const LossModel& model, const std::vector<Sample>& batch,
                                  const FeasibleSet& set, ProbeMode probe, bool want_min,
                                  const EigenGradientOptions& opts) {
  if (!model.has_hessian()) throw std::logic_error("hessian capability missing");
  if (batch.empty()) throw std::invalid_argument("hessian estimator: empty batch");

  auto eig_at = [&](const Vec& x) {
    const SymEigen e = jacobi_eigen(empirical_hessian(model, x, batch));
    return want_min ? e.values.front() : e.values.back();
  };

  if (probe == ProbeMode::Grid) {
    double best = want_min ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
    for (const Vec& p : default_probes(set)) {
      const double v = eig_at(p);
      best = want_min ? std::min(best, v) : std::max(best, v);
    }
    return best;
  }

  // eigen-gradient descent (ascent for lambda_max) from the set center
  Vec x = set.centroid();
  const double mu = opts.step_frac * set.diameter();
  for (int p = 0; p < opts.steps; ++p) {
    const SymEigen e = jacobi_eigen(empirical_hessian(model, x, batch));
    const Vec& v = want_min ? e.vectors.front() : e.vectors.back();
    const Vec g = eigen_gradient(model, x, batch, v);
    for (int q = 0; q < set.dim; ++q) x[q] += (want_min ? -mu : mu) * g[q];
    x = project(set, x);
  }
  return eig_at(x);
}

}  // namespace detail

// min over probed x of lambda_min(batch-mean Hessian)
inline double m_hat_hessian(const LossModel& model, const std::vector<Sample>& batch,
                            const FeasibleSet& set, ProbeMode probe = ProbeMode::Grid,
                            detail::EigenGradientOptions opts = {}) {
  return detail::hessian_extreme_eig(model, batch, set, probe, /*want_min=*/true, opts);
}

// max over probed x of lambda_max(batch-mean Hessian)
inline double M_hat_hessian(const LossModel& model, const std::vector<Sample>& batch,
                            const FeasibleSet& set, ProbeMode probe = ProbeMode::Grid,
                            detail::EigenGradientOptions opts = {}) {
  return detail::hessian_extreme_eig(model, batch, set, probe, /*want_min=*/false, opts);
}

// min/max over ordered probe pairs of the empirical secant curvature ratio
//   [ L(x_i) - L(x_j) - <g(x_j), x_i - x_j> ] / ( |x_i - x_j|^2 / 2 )
inline std::pair<double, double> m_M_heuristic(const LossModel& model,
                                               const std::vector<Sample>& batch,
                                               const std::vector<Vec>& probes) {
  if (probes.size() < 2) throw std::invalid_argument("m_M_heuristic: need at least 2 probes");
  if (batch.empty()) throw std::invalid_argument("m_M_heuristic: empty batch");
  const int N = static_cast<int>(probes.size());
  Vec losses(N);
  std::vector<Vec> grads(N);
  for (int i = 0; i < N; ++i) {
    losses[i] = empirical_loss(model, probes[i], batch);
    grads[i] = empirical_gradient(model, probes[i], batch);
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      if (i == j) continue;
      const Vec diff = sub(probes[i], probes[j]);
      const double dd = dot(diff, diff);
      if (dd < 1e-24) throw std::invalid_argument("m_M_heuristic: duplicate probes");
      const double ratio = (losses[i] - losses[j] - dot(grads[j], diff)) / (0.5 * dd);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  return {lo, hi};
}

// closed-form estimates for the penalized quadratic:
//   m = lambda + lambda_min( (1/K) sum w w' ),  M = lambda + lambda_max(...)
inline std::pair<double, double> quadratic_specific(const std::vector<Sample>& batch,
                                                    double lambda, int feature_dim) {
  if (batch.empty()) throw std::invalid_argument("quadratic_specific: empty batch");
  Matrix W(feature_dim);
  for (const Sample& s : batch)
    for (int i = 0; i < feature_dim; ++i)
      for (int j = 0; j < feature_dim; ++j) W(i, j) += s.z[i] * s.z[j];
  for (auto& v : W.a) v /= static_cast<double>(batch.size());
  const SymEigen e = jacobi_eigen(W);
  return {lambda + e.values.front(), lambda + e.values.back()};
}

// B = 2 M^2 plug-in
inline double B_hat(double M_tilde) {
  if (M_tilde < 0.0) throw std::invalid_argument("B_hat: M >= 0 required");
  return 2.0 * M_tilde * M_tilde;
}

// A estimate at a point x:
//   (2/K) sum |grad l(x,z)|^2 + 4 ((M_adj)/(m_adj))^2 |mean grad(x)|^2
// with (m_adj, M_adj) the previous step's adjusted estimates.
inline double A_hat(const LossModel& model, const Vec& x, const std::vector<Sample>& batch,
                    double m_prev_adj, double M_prev_adj) {
  if (!(m_prev_adj > 0.0)) throw std::invalid_argument("A_hat: adjusted m must be > 0");
  if (batch.empty()) throw std::invalid_argument("A_hat: empty batch");
  double sq = 0.0;
  Vec g(model.dim(), 0.0);
  for (const Sample& s : batch) {
    const Vec gi = model.grad(x, s.z);
    sq += dot(gi, gi);
    axpy(1.0, gi, g);
  }
  const double K = static_cast<double>(batch.size());
  for (auto& v : g) v /= K;
  const double ratio = M_prev_adj / m_prev_adj;
  return 2.0 * sq / K + 4.0 * ratio * ratio * dot(g, g);
}

struct PsiOneStep {
  double m = kNaN, M = kNaN, A = kNaN, B = kNaN;
};

// Running means of the one-step estimates with the t_n adjustment applied in
// the conservative direction: m down, (M, A, B) up.
struct ParamEstimates {
  int n = 0;
  double m_mean = kNaN, M_mean = kNaN, A_mean = kNaN, B_mean = kNaN;
  double t = 0.0;

  double m_adjusted() const {
    const double v = m_mean - t;
    if (!(v > 0.0))
      throw std::invalid_argument("ParamEstimates: adjusted m must be > 0 before use");
    return v;
  }
  double M_adjusted() const { return M_mean + t; }
  double A_adjusted() const { return A_mean + t; }
  double B_adjusted() const { return B_mean + t; }

  // psi handed to the bounds; Cg/LG/diam2 are copied from a template
  FunctionParams adjusted(const FunctionParams& base) const {
    FunctionParams p = base;
    p.m = m_adjusted();
    p.M = std::max(M_adjusted(), p.m);
    p.A = std::max(A_adjusted(), 0.0);
    p.B = std::max(B_adjusted(), 0.0);
    return p;
  }
};

inline ParamEstimates combine_params(const std::vector<PsiOneStep>& history,
                                     const TnSchedule& tn_sched) {
  if (history.empty()) throw std::invalid_argument("combine_params: n >= 1 required");
  ParamEstimates out;
  out.n = static_cast<int>(history.size());
  double sm = 0, sM = 0, sA = 0, sB = 0;
  int nA = 0;
  for (const auto& h : history) {
    sm += h.m;
    sM += h.M;
    sB += h.B;
    if (std::isfinite(h.A)) {
      sA += h.A;
      ++nA;
    }
  }
  out.m_mean = sm / out.n;
  out.M_mean = sM / out.n;
  out.B_mean = sB / out.n;
  out.A_mean = nA > 0 ? sA / nA : kNaN;
  out.t = tn_sched.at(out.n);
  return out;
}

}  // namespace driftk
