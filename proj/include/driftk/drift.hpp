#pragma once

#include <functional>

#include "driftk/gap_bounds.hpp"

namespace driftk {

enum class DriftMethod { Direct, Ipm };
enum class DriftMode { Practical, Certified };

struct OneStepEstimate {
  double value = 0.0;     // capped at diam(X)
  DriftMethod method = DriftMethod::Direct;
  int index = 0;          // the n-index i of |x_i^* - x_{i-1}^*|
};

// t_n = c n^(-eta); eta < 1/2 keeps n t_n^2 -> infinity so every
// exp(-C n t_n^2) series converges.
struct TnSchedule {
  double c = 1.0;
  double eta = 0.375;

  TnSchedule() = default;
  TnSchedule(double c_in, double eta_in) : c(c_in), eta(eta_in) {
    if (!(c > 0.0)) throw std::invalid_argument("TnSchedule: c > 0 required");
    if (!(eta > 0.0 && eta < 0.5))
      throw std::invalid_argument("TnSchedule: eta in (0, 1/2) required");
  }

  double at(int n) const {
    if (n < 1) throw std::invalid_argument("TnSchedule: n >= 1 required");
    return c * std::pow(static_cast<double>(n), -eta);
  }
};

inline double tn(const TnSchedule& schedule, int n) { return schedule.at(n); }

struct DriftEstimate {
  double rho_hat = 0.0;
  DriftMethod method = DriftMethod::Direct;
  DriftMode mode = DriftMode::Practical;
  int window = 0;                 // 0 marks the constant-change combiner
  double correction_opt = 0.0;    // C_n (constant) or U_n (bounded)
  double correction_grad = 0.0;   // C_n^(2) (constant) or V_n (bounded)
  double slack = 0.0;             // t_n
  double certified = 0.0;         // rho_hat + corrections + slack
};

// ---- one-step estimators ----

// |x_i - x_{i-1}| + |mean grad_i(x_i)|/m + |mean grad_{i-1}(x_{i-1})|/m,
// capped at diam(X)
inline OneStepEstimate direct_one_step(const LossModel& model, const Vec& x_i, const Vec& x_prev,
                                       const std::vector<Sample>& batch_i,
                                       const std::vector<Sample>& batch_prev, double m,
                                       double diam, int index = 0) {
  if (!(m > 0.0)) throw std::invalid_argument("direct_one_step: m > 0 required");
  if (batch_i.empty() || batch_prev.empty())
    throw std::invalid_argument("direct_one_step: empty batch");
  const double g_i = norm2(empirical_gradient(model, x_i, batch_i));
  const double g_prev = norm2(empirical_gradient(model, x_prev, batch_prev));
  OneStepEstimate e;
  e.method = DriftMethod::Direct;
  e.index = index;
  e.value = std::min(diam, dist2(x_i, x_prev) + (g_i + g_prev) / m);
  return e;
}

// variant for streaming callers that already hold the empirical gradient norms
inline OneStepEstimate direct_one_step_from_norms(double dx, double gnorm_i, double gnorm_prev,
                                                  double m, double diam, int index = 0) {
  if (!(m > 0.0)) throw std::invalid_argument("direct_one_step: m > 0 required");
  OneStepEstimate e;
  e.method = DriftMethod::Direct;
  e.index = index;
  e.value = std::min(diam, dx + (gnorm_i + gnorm_prev) / m);
  return e;
}

using SampleMetric = std::function<double(const Vec&, const Vec&)>;

inline double euclidean_metric(const Vec& a, const Vec& b) { return dist2(a, b); }

// pairwise relaxation of the empirical vector-IPM program:
//   Gamma = (1 / (K_i K_{i-1})) sum_{k,j} r(z_i(k), z_{i-1}(j))
// Always an upper bound on the program value by the triangle inequality.
inline double ipm_pairwise_relaxation(const std::vector<Sample>& batch_i,
                                      const std::vector<Sample>& batch_prev,
                                      const SampleMetric& r) {
  if (batch_i.empty() || batch_prev.empty())
    throw std::invalid_argument("ipm: empty batch");
  double s = 0.0;
  for (const Sample& a : batch_i)
    for (const Sample& b : batch_prev) {
      const double v = r(a.z, b.z);
      if (v < 0.0) throw std::invalid_argument("ipm: metric returned a negative value");
      s += v;
    }
  return s / (static_cast<double>(batch_i.size()) * static_cast<double>(batch_prev.size()));
}

inline OneStepEstimate ipm_one_step(const std::vector<Sample>& batch_i,
                                    const std::vector<Sample>& batch_prev, const SampleMetric& r,
                                    double m, double diam, int index = 0) {
  if (!(m > 0.0)) throw std::invalid_argument("ipm_one_step: m > 0 required");
  OneStepEstimate e;
  e.method = DriftMethod::Ipm;
  e.index = index;
  e.value = std::min(diam, ipm_pairwise_relaxation(batch_i, batch_prev, r) / m);
  return e;
}

namespace detail {

// The vector program
//   max | mean_k alpha_k - mean_j alpha'_j |  s.t.  |alpha_k - alpha_j| <= r_kj
// collapses to a scalar linear program: at an optimum with value v and unit
// direction u = v/|v|, the projections s_k = <u, alpha_k> are feasible for the
// scalar constraints |s_k - s_j| <= r_kj and attain the same value, and any
// scalar solution embeds back along a single direction.  So the exact value is
//   max sum c_k s_k  s.t.  |s_k - s_j| <= r_kj,  s_1 = 0 pinned.
struct TinyLp {
  int n = 0;
  std::vector<double> c;                 // objective coefficients
  std::vector<std::vector<double>> r;    // pairwise caps
};

inline TinyLp build_tiny_lp(const std::vector<Sample>& batch_i,
                            const std::vector<Sample>& batch_prev, const SampleMetric& metric) {
  TinyLp lp;
  const int ki = static_cast<int>(batch_i.size());
  const int kp = static_cast<int>(batch_prev.size());
  lp.n = ki + kp;
  lp.c.resize(lp.n);
  std::vector<const Sample*> all;
  for (const Sample& s : batch_i) all.push_back(&s);
  for (const Sample& s : batch_prev) all.push_back(&s);
  for (int k = 0; k < lp.n; ++k) lp.c[k] = k < ki ? 1.0 / ki : -1.0 / kp;
  lp.r.assign(lp.n, std::vector<double>(lp.n, 0.0));
  for (int a = 0; a < lp.n; ++a)
    for (int b = a + 1; b < lp.n; ++b) {
      const double v = metric(all[a]->z, all[b]->z);
      if (v < 0.0) throw std::invalid_argument("ipm: metric returned a negative value");
      lp.r[a][b] = lp.r[b][a] = v;
    }
  return lp;
}

inline bool tiny_lp_feasible(const TinyLp& lp, const std::vector<double>& s, double tol) {
  for (int a = 0; a < lp.n; ++a)
    for (int b = a + 1; b < lp.n; ++b)
      if (std::abs(s[a] - s[b]) > lp.r[a][b] + tol) return false;
  return true;
}

// solve a k x k linear system by Gaussian elimination; false if singular
inline bool solve_small(std::vector<std::vector<double>> A, std::vector<double> rhs,
                        std::vector<double>& out) {
  const int k = static_cast<int>(rhs.size());
  for (int col = 0; col < k; ++col) {
    int piv = col;
    for (int row = col + 1; row < k; ++row)
      if (std::abs(A[row][col]) > std::abs(A[piv][col])) piv = row;
    if (std::abs(A[piv][col]) < 1e-12) return false;
    std::swap(A[piv], A[col]);
    std::swap(rhs[piv], rhs[col]);
    for (int row = 0; row < k; ++row) {
      if (row == col) continue;
      const double f = A[row][col] / A[col][col];
      for (int c2 = col; c2 < k; ++c2) A[row][c2] -= f * A[col][c2];
      rhs[row] -= f * rhs[col];
    }
  }
  out.resize(k);
  for (int i = 0; i < k; ++i) out[i] = rhs[i] / A[i][i];
  return true;
}

}  // namespace detail

// Exhaustive oracle for tiny instances (total samples <= 4): enumerates the
// vertices of the scalar polytope { |s_k - s_j| <= r_kj, s_1 = 0 } and takes
// the best objective value.  Exact up to floating point; test use only.
inline double ipm_exact_tiny(const std::vector<Sample>& batch_i,
                             const std::vector<Sample>& batch_prev, const SampleMetric& r,
                             double m) {
  if (!(m > 0.0)) throw std::invalid_argument("ipm_exact_tiny: m > 0 required");
  if (batch_i.empty() || batch_prev.empty())
    throw std::invalid_argument("ipm_exact_tiny: empty batch");
  const detail::TinyLp lp = detail::build_tiny_lp(batch_i, batch_prev, r);
  if (lp.n > 4) throw std::invalid_argument("ipm_exact_tiny: instance too large");

  const int free_vars = lp.n - 1;  // s_0 pinned to zero
  if (free_vars == 0) return 0.0;

  // constraint rows over free variables s_1..s_{n-1}: s_a - s_b = +-r_ab
  struct Row {
    std::vector<double> a;
    double rhs;
  };
  std::vector<Row> rows;
  for (int a = 0; a < lp.n; ++a) {
    for (int b = a + 1; b < lp.n; ++b) {
      for (int sign = -1; sign <= 1; sign += 2) {
        Row row;
        row.a.assign(free_vars, 0.0);
        if (a > 0) row.a[a - 1] += 1.0;
        if (b > 0) row.a[b - 1] -= 1.0;
        row.rhs = sign * lp.r[a][b];
        rows.push_back(std::move(row));
      }
    }
  }

  double best = 0.0;  // s = 0 is always feasible
  const int R = static_cast<int>(rows.size());
  std::vector<int> pick(free_vars);
  std::function<void(int, int)> enumerate = [&](int start, int depth) {
    if (depth == free_vars) {
      std::vector<std::vector<double>> A(free_vars);
      std::vector<double> rhs(free_vars);
      for (int i = 0; i < free_vars; ++i) {
        A[i] = rows[pick[i]].a;
        rhs[i] = rows[pick[i]].rhs;
      }
      std::vector<double> sol;
      if (!detail::solve_small(A, rhs, sol)) return;
      std::vector<double> s(lp.n, 0.0);
      for (int i = 1; i < lp.n; ++i) s[i] = sol[i - 1];
      if (!detail::tiny_lp_feasible(lp, s, 1e-9 * (1.0 + std::abs(best)))) return;
      double val = 0.0;
      for (int i = 0; i < lp.n; ++i) val += lp.c[i] * s[i];
      best = std::max(best, val);
      return;
    }
    for (int i = start; i < R; ++i) {
      pick[depth] = i;
      enumerate(i + 1, depth + 1);
    }
  };
  enumerate(0, 0);
  return best / m;
}

// Projected-gradient ascent on the vector program; only feasible points are
// scored, so the result is a guaranteed lower bound on the exact value.
inline double ipm_ascent_lower_bound(const std::vector<Sample>& batch_i,
                                     const std::vector<Sample>& batch_prev, const SampleMetric& r,
                                     double m, int x_dim, int iters = 200,
                                     std::uint64_t seed = 1234) {
  if (!(m > 0.0)) throw std::invalid_argument("ipm_ascent: m > 0 required");
  const detail::TinyLp lp = detail::build_tiny_lp(batch_i, batch_prev, r);
  const int n = lp.n;
  Rng rng = Rng::from_keys(seed, static_cast<std::uint64_t>(n));

  double rmax = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) rmax = std::max(rmax, lp.r[a][b]);
  if (rmax == 0.0) return 0.0;

  std::vector<Vec> alpha(n, Vec(x_dim, 0.0));
  for (auto& v : alpha)
    for (auto& x : v) x = 0.01 * rmax * (rng.uniform() - 0.5);

  auto objective_vec = [&](const std::vector<Vec>& as) {
    Vec v(x_dim, 0.0);
    for (int k = 0; k < n; ++k) axpy(lp.c[k], as[k], v);
    return v;
  };

  auto sweep_project = [&](std::vector<Vec>& as) {
    for (int pass = 0; pass < 60; ++pass) {
      double worst = 0.0;
      for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
          const double dist = dist2(as[a], as[b]);
          if (dist > lp.r[a][b]) {
            worst = std::max(worst, lp.r[a][b] > 0 ? dist / lp.r[a][b] : 2.0);
            // pull both ends symmetrically to the cap
            const double target = lp.r[a][b];
            if (dist < 1e-15) continue;
            const double shift = 0.5 * (dist - target) / dist;
            for (int q = 0; q < x_dim; ++q) {
              const double delta = as[a][q] - as[b][q];
              as[a][q] -= shift * delta;
              as[b][q] += shift * delta;
            }
          }
        }
      }
      if (worst <= 1.0 + 1e-12) break;
    }
    // residual violation is absorbed by a contraction about the centroid,
    // which scales every pairwise distance uniformly
    double gamma = 1.0;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const double dist = dist2(as[a], as[b]);
        if (lp.r[a][b] == 0.0) {
          if (dist > 0.0) gamma = std::numeric_limits<double>::infinity();
        } else {
          gamma = std::max(gamma, dist / lp.r[a][b]);
        }
      }
    if (std::isinf(gamma)) {
      // zero-cap pairs must coincide exactly
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
          if (lp.r[a][b] == 0.0) as[b] = as[a];
      gamma = 1.0;
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
          if (lp.r[a][b] > 0.0) gamma = std::max(gamma, dist2(as[a], as[b]) / lp.r[a][b]);
    }
    if (gamma > 1.0) {
      Vec centroid(x_dim, 0.0);
      for (const auto& v : as) axpy(1.0 / n, v, centroid);
      for (auto& v : as)
        for (int q = 0; q < x_dim; ++q) v[q] = centroid[q] + (v[q] - centroid[q]) / gamma;
    }
  };

  double best = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vec v = objective_vec(alpha);
    double nv = norm2(v);
    Vec dir;
    if (nv < 1e-14) {
      dir = rng.unit_vec(x_dim);
    } else {
      dir = scaled(v, 1.0 / nv);
    }
    const double step = rmax * 0.5 / (1.0 + 0.05 * it);
    for (int k = 0; k < n; ++k) axpy(step * lp.c[k], dir, alpha[k]);
    sweep_project(alpha);
    best = std::max(best, norm2(objective_vec(alpha)));
  }
  return best / m;
}

// Finite-sample spot check of the function-class inclusion the IPM bound
// assumes: gradient increments must stay under the metric on sampled
// (x, z, z~) triples.  Returns the fraction of satisfied triples; callers
// treat anything below 1 as a broken user assertion.
inline double ipm_inclusion_spot_check(const LossModel& model, const FeasibleSet& set,
                                       const std::vector<Sample>& samples, const SampleMetric& r,
                                       int trials = 200, std::uint64_t seed = 99) {
  if (samples.size() < 2) throw std::invalid_argument("spot check: need at least 2 samples");
  Rng rng = Rng::from_keys(seed, samples.size());
  int ok = 0;
  for (int t = 0; t < trials; ++t) {
    const int a = rng.uniform_int(static_cast<int>(samples.size()));
    int b = rng.uniform_int(static_cast<int>(samples.size()));
    if (b == a) b = (b + 1) % static_cast<int>(samples.size());
    Vec x = set.centroid();
    for (int i = 0; i < set.dim; ++i) x[i] += set.half_extent(i) * (rng.uniform() - 0.5);
    x = project(set, x);
    const Vec incr = sub(model.grad(x, samples[a].z), model.grad(x, samples[b].z));
    if (norm2(incr) <= r(samples[a].z, samples[b].z) + 1e-12) ++ok;
  }
  return static_cast<double>(ok) / trials;
}

// ---- window estimators for the bounded-change model ----

struct HWindowEstimator {
  // combine(window) over trailing one-step values, newest last
  std::function<double(const Vec&)> combine;
  // Lipschitz constants b_1..b_W of the estimator at window size W
  std::function<Vec(int)> lipschitz;
};

// the uniform-case instance: (W+1)/W * max over the window
inline HWindowEstimator uniform_max_estimator() {
  HWindowEstimator h;
  h.combine = [](const Vec& window) {
    if (window.empty()) throw std::invalid_argument("window estimator: empty window");
    double mx = window[0];
    for (double v : window) mx = std::max(mx, v);
    const double W = static_cast<double>(window.size());
    return (W + 1.0) / W * mx;
  };
  h.lipschitz = [](int W) {
    if (W < 1) throw std::invalid_argument("window estimator: W >= 1 required");
    return Vec(static_cast<std::size_t>(W), (static_cast<double>(W) + 1.0) / W);
  };
  return h;
}

// ---- combiners ----

struct CombineOptions {
  DriftMode mode = DriftMode::Practical;
  // b(d0, K), needed for C(K) in certified mode
  std::function<double(double, int)> bound;
  int dim = 0;  // ambient dimension d, used by the gradient-noise corrections
};

namespace detail {

inline double correction_C_of_K(const std::function<double(double, int)>& bound,
                                const FunctionParams& params, int K) {
  if (!bound) throw std::invalid_argument("certified mode requires a bound function");
  return 2.0 * std::sqrt((2.0 / params.m) * bound(params.diam2, K));
}

inline void require_certified_constants(const FunctionParams& params, bool need_cg,
                                        bool need_lg) {
  if (need_cg && !std::isfinite(params.Cg))
    throw std::invalid_argument("certified mode requires C_g");
  if (need_lg && !std::isfinite(params.LG))
    throw std::invalid_argument("certified mode requires L_G");
}

}  // namespace detail

// Constant-change combiner: rho_hat = mean of the one-step estimates
// (indices 2..n).  In certified mode with the direct method the corrections
//   C_n   = (1 + LG/m)/(n-1) * ( C(K_1) + 2 sum_{i=2}^{n-1} C(K_i) + C(K_n) )
//   C_n^2 = 1/(d m (n-1)) * ( sqrt(Cg/K_1) + 2 sum_{i=2}^{n-1} sqrt(Cg/K_i)
//                             + sqrt(Cg/K_n) )
// are added; the IPM method certifies with the slack alone.
inline DriftEstimate combine_constant(const std::vector<OneStepEstimate>& estimates,
                                      const std::vector<int>& budgets,
                                      const FunctionParams& params, const TnSchedule& tn_sched,
                                      const CombineOptions& options = {}) {
  const int n = static_cast<int>(estimates.size()) + 1;
  if (n < 2) throw std::invalid_argument("combine_constant: n >= 2 required");
  if (static_cast<int>(budgets.size()) != n)
    throw std::invalid_argument("combine_constant: need budgets K_1..K_n");

  DriftEstimate out;
  out.method = estimates.front().method;
  out.mode = options.mode;
  double s = 0.0;
  for (const auto& e : estimates) s += e.value;
  out.rho_hat = s / static_cast<double>(n - 1);
  out.slack = tn_sched.at(n);

  if (options.mode == DriftMode::Certified && out.method == DriftMethod::Direct) {
    detail::require_certified_constants(params, true, true);
    if (options.dim < 1) throw std::invalid_argument("combine_constant: dim >= 1 required");
    auto ck = [&](int K) { return detail::correction_C_of_K(options.bound, params, K); };
    auto gk = [&](int K) { return std::sqrt(params.Cg / static_cast<double>(K)); };
    double c_sum = ck(budgets[0]);
    double g_sum = gk(budgets[0]);
    for (int i = 2; i <= n - 1; ++i) {
      c_sum += 2.0 * ck(budgets[i - 1]);
      g_sum += 2.0 * gk(budgets[i - 1]);
    }
    c_sum += ck(budgets[n - 1]);
    g_sum += gk(budgets[n - 1]);
    out.correction_opt = (1.0 + params.LG / params.m) / (n - 1.0) * c_sum;
    out.correction_grad = g_sum / (options.dim * params.m * (n - 1.0));
  }
  out.certified = out.rho_hat + out.correction_opt + out.correction_grad + out.slack;
  return out;
}

// Bounded-change combiner: window statistics over the trailing
// min(W, i-1) one-step values feed the average.  Certified corrections for
// the direct method:
//   U_n = 2 (1 + LG/m) (sum b_j) / (n - W) * sum_{i=1}^{n} C(K_i)
//   V_n = 2 (sum b_j) / (m (n - W)) * sum_{i=1}^{n} sqrt(Cg / (d K_i))
inline DriftEstimate combine_bounded(const std::vector<OneStepEstimate>& estimates, int W,
                                     const HWindowEstimator& hw, const std::vector<int>& budgets,
                                     const FunctionParams& params, const TnSchedule& tn_sched,
                                     const CombineOptions& options = {}) {
  const int n = static_cast<int>(estimates.size()) + 1;
  if (n < 2) throw std::invalid_argument("combine_bounded: n >= 2 required");
  if (W < 1) throw std::invalid_argument("combine_bounded: W >= 1 required");
  if (static_cast<int>(budgets.size()) != n)
    throw std::invalid_argument("combine_bounded: need budgets K_1..K_n");

  DriftEstimate out;
  out.method = estimates.front().method;
  out.mode = options.mode;
  out.window = W;

  double s = 0.0;
  for (int i = 2; i <= n; ++i) {
    const int w = std::min(W, i - 1);
    Vec window(static_cast<std::size_t>(w));
    for (int j = 0; j < w; ++j) window[j] = estimates[i - 2 - (w - 1) + j].value;
    s += hw.combine(window);
  }
  out.rho_hat = s / static_cast<double>(n - 1);
  out.slack = tn_sched.at(n);

  if (options.mode == DriftMode::Certified && out.method == DriftMethod::Direct) {
    if (n <= W)
      throw std::invalid_argument("combine_bounded: corrections need n > W");
    detail::require_certified_constants(params, true, true);
    if (options.dim < 1) throw std::invalid_argument("combine_bounded: dim >= 1 required");
    const Vec bj = hw.lipschitz(W);
    double b_sum = 0.0;
    for (double b : bj) b_sum += b;
    double c_sum = 0.0, g_sum = 0.0;
    for (int i = 1; i <= n; ++i) {
      c_sum += detail::correction_C_of_K(options.bound, params, budgets[i - 1]);
      g_sum += std::sqrt(params.Cg / (options.dim * static_cast<double>(budgets[i - 1])));
    }
    out.correction_opt = 2.0 * (1.0 + params.LG / params.m) * b_sum / (n - W) * c_sum;
    out.correction_grad = 2.0 * b_sum / (params.m * (n - W)) * g_sum;
  }
  out.certified = out.rho_hat + out.correction_opt + out.correction_grad + out.slack;
  return out;
}

}  // namespace driftk
