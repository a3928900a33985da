#pragma once

#include <optional>

#include "driftk/sgd.hpp"

namespace driftk {

// psi = (m, M, A, B) plus the constants the drift corrections need.
// Cg and LG stay NaN unless the user supplies them (certified mode only).
struct FunctionParams {
  double m = 0.0;      // strong convexity
  double M = 0.0;      // gradient Lipschitz modulus of f
  double A = 0.0;      // gradient growth offset: E|grad l|^2 <= A + B |x - x*|^2
  double B = 0.0;      // gradient growth slope
  double Cg = kNaN;    // per-component sub-Gaussian constant (B.2)
  double LG = kNaN;    // per-sample gradient Lipschitz modulus (B.1)
  double diam2 = 0.0;  // squared diameter of the feasible set

  void validate() const {
    if (!(m > 0.0)) throw std::invalid_argument("FunctionParams: m must be > 0");
    if (M < m) throw std::invalid_argument("FunctionParams: M >= m required");
    if (A < 0.0 || B < 0.0) throw std::invalid_argument("FunctionParams: A, B >= 0 required");
  }
};

enum class BoundKind { LastIterate, ConstStepAvg, NedicLeeAvg, QuadraticAvg, ClosedFormD };

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::LastIterate: return "last_iterate";
    case BoundKind::ConstStepAvg: return "const_step_avg";
    case BoundKind::NedicLeeAvg: return "nedic_lee_avg";
    case BoundKind::QuadraticAvg: return "quadratic_avg";
    case BoundKind::ClosedFormD: return "closed_form_d";
  }
  return "?";
}

struct Factorization {
  double alpha = 0.0;
  double beta = 0.0;
};

namespace detail {

// contraction factor of the iterate-distance recursion; must sit in [0,1)
inline double d_step_factor(double m, double B, double mu) {
  const double q = 1.0 - 2.0 * m * mu + B * mu * mu;
  if (!(q >= 0.0 && q < 1.0))
    throw std::invalid_argument("inadmissible step size: 1 - 2m*mu + B*mu^2 not in [0,1)");
  return q;
}

// (alpha, beta) with d-bound(d0, K) = alpha * d0 + beta.  alpha is the product
// of the contraction factors accumulated in log space so K > 1e4 cannot
// underflow mid-product; beta unwinds the noise terms.
inline Factorization d_recursion_factors(int K, const StepSchedule& schedule,
                                         const FunctionParams& params) {
  if (K < 0) throw std::invalid_argument("d_recursion: K >= 0 required");
  double log_alpha = 0.0;
  bool alpha_zero = false;
  double beta = 0.0;
  for (int ell = 1; ell <= K; ++ell) {
    const double mu = schedule.at(ell);
    const double q = d_step_factor(params.m, params.B, mu);
    beta = q * beta + params.A * mu * mu;
    if (q == 0.0)
      alpha_zero = true;
    else
      log_alpha += std::log(q);
  }
  Factorization f;
  f.alpha = alpha_zero ? 0.0 : std::exp(log_alpha);
  f.beta = beta;
  return f;
}

inline double phi_beta(double beta, double t) {
  if (beta == 0.0) return std::log(t);
  return (std::pow(t, beta) - 1.0) / beta;
}

}  // namespace detail

// Upper bound on E|x(K) - x*|^2 after K projected SGD steps starting within
// squared distance d0, via the unwound recursion
//   E[d(ell)] <= d0 * prod(1 - 2m*mu + B*mu^2) + A * sum mu^2 * prod(...)
inline double d_recursion_bound(double d0, int K, const StepSchedule& schedule,
                                const FunctionParams& params) {
  if (d0 < 0.0) throw std::invalid_argument("d_recursion_bound: d0 >= 0 required");
  const Factorization f = detail::d_recursion_factors(K, schedule, params);
  return f.alpha * d0 + f.beta;
}

// Closed-form counterpart for mu(ell) = C ell^(-alpha); looser than the
// recursion but O(1) to evaluate.  Requires B > 0 because of the A/B residual.
inline double closed_form_d_bound(double d0, int ell, double C, double alpha,
                                  const FunctionParams& params) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("closed_form_d_bound: alpha in [0,1]");
  if (!(params.B > 0.0)) throw std::invalid_argument("closed_form_d_bound: B > 0 required");
  if (ell < 1) throw std::invalid_argument("closed_form_d_bound: ell >= 1 required");
  if (!(C > 0.0)) throw std::invalid_argument("closed_form_d_bound: C > 0 required");
  const double t = static_cast<double>(ell);
  const double head = d0 + params.A / params.B;
  if (alpha < 1.0) {
    const double decay = 2.0 * std::exp(2.0 * params.B * C * C * detail::phi_beta(1.0 - 2.0 * alpha, t)) *
                         std::exp(-(params.m * C / 4.0) * std::pow(t, 1.0 - alpha)) * head;
    return decay + 2.0 * params.A * C / (params.m * std::pow(t, alpha));
  }
  const double decay = std::exp(params.B * C * C) / std::pow(t, params.m * C) * head;
  const double tail = params.A * C * C * detail::phi_beta(params.m * C / 2.0 - 1.0, t) /
                      std::pow(t, params.m * C / 2.0);
  return decay + tail;
}

// last iterate: b = (M/2) * d-bound
inline Factorization last_iterate_factors(int K, const StepSchedule& schedule,
                                          const FunctionParams& params) {
  Factorization f = detail::d_recursion_factors(K, schedule, params);
  f.alpha *= 0.5 * params.M;
  f.beta *= 0.5 * params.M;
  return f;
}

inline double b_last_iterate(double d0, int K, const StepSchedule& schedule,
                             const FunctionParams& params) {
  const Factorization f = last_iterate_factors(K, schedule, params);
  return f.alpha * d0 + f.beta;
}

// constant step with gamma-weighted averaging:
//   b = d0 / (2 mu sum_{ell=0..K} gamma(ell)) + A mu / 2,  gamma(ell) = q^(-ell)
inline Factorization const_step_avg_factors(int K, double mu, const FunctionParams& params) {
  if (K < 0) throw std::invalid_argument("const_step_avg: K >= 0 required");
  const double q = 1.0 - params.m * mu + params.B * mu * mu;
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("inadmissible step size: 1 - m*mu + B*mu^2 not in (0,1)");
  // sum_{ell=0..K} q^(-ell) = (q^-(K+1) - 1) / (q^-1 - 1); overflow -> inf -> alpha 0
  const double inv_q = 1.0 / q;
  const double gamma_sum = (std::pow(inv_q, static_cast<double>(K + 1)) - 1.0) / (inv_q - 1.0);
  Factorization f;
  f.alpha = 1.0 / (2.0 * mu * gamma_sum);
  f.beta = 0.5 * params.A * mu;
  return f;
}

inline double b_const_step_avg(double d0, int K, double mu, const FunctionParams& params) {
  const Factorization f = const_step_avg_factors(K, mu, params);
  return f.alpha * d0 + f.beta;
}

// mu(ell) = 1/(m ell) with inverse-step weighting:
//   b = (d0/2 + (K+1) A / 2 + B/2 * sum gamma(ell)) / (1 + m (K+1)(K+2) / 2)
// gamma_bounds[ell] must dominate E[d(ell)] for ell = 0..K; by default they
// come from the distance recursion under the same schedule.
inline double b_nedic_lee(double d0, int K, const FunctionParams& params,
                          const std::optional<Vec>& gamma_bounds = std::nullopt) {
  if (K < 1) throw std::invalid_argument("b_nedic_lee: K >= 1 required");
  double gamma_sum = 0.0;
  if (gamma_bounds) {
    if (static_cast<int>(gamma_bounds->size()) != K + 1)
      throw std::invalid_argument("b_nedic_lee: gamma_bounds length must be K+1");
    for (double g : *gamma_bounds) gamma_sum += g;
  } else if (params.B > 0.0) {
    // default per-iterate bounds via the distance recursion under the
    // same 1/(m ell) schedule; the term vanishes entirely when B = 0
    gamma_sum = d0;
    const StepSchedule sched = StepSchedule::inv_strong(params.m);
    double d = d0;
    for (int ell = 1; ell <= K; ++ell) {
      const double mu = sched.at(ell);
      const double q = detail::d_step_factor(params.m, params.B, mu);
      d = q * d + params.A * mu * mu;
      gamma_sum += d;
    }
  }
  const double Kd = static_cast<double>(K);
  const double numer = 0.5 * d0 + 0.5 * (Kd + 1.0) * params.A + 0.5 * params.B * gamma_sum;
  const double denom = 1.0 + 0.5 * params.m * (Kd + 1.0) * (Kd + 2.0);
  return numer / denom;
}

// Uniform averaging on loss families whose gradients are exactly linear in x
// (quadratics).  Minkowski combination of five terms, squared, scaled by M/2.
// The telescoping terms carry the 1/K factor of the average they come from.
inline double b_quadratic_avg(double d0, int K, double C, double alpha,
                              const FunctionParams& params,
                              const std::optional<Vec>& d_bounds = std::nullopt) {
  if (alpha < 0.5 || alpha > 1.0)
    throw std::invalid_argument("b_quadratic_avg: alpha in [1/2, 1] required");
  if (K < 1) throw std::invalid_argument("b_quadratic_avg: K >= 1 required");
  const StepSchedule sched = StepSchedule::power(C, alpha);

  // per-iterate distance bounds d(0..K), by default from the recursion
  Vec db;
  if (d_bounds) {
    if (static_cast<int>(d_bounds->size()) != K + 1)
      throw std::invalid_argument("b_quadratic_avg: d_bounds length must be K+1");
    db = *d_bounds;
  } else {
    db.resize(static_cast<std::size_t>(K) + 1);
    db[0] = d0;
    double d = d0;
    for (int ell = 1; ell <= K; ++ell) {
      const double mu = sched.at(ell);
      const double q = detail::d_step_factor(params.m, params.B, mu);
      d = q * d + params.A * mu * mu;
      db[ell] = d;
    }
  }

  const double rm = std::sqrt(params.m);
  const double Kd = static_cast<double>(K);
  double telescope = 0.0;
  for (int k = 1; k <= K - 1; ++k)
    telescope += std::abs(1.0 / sched.at(k + 1) - 1.0 / sched.at(k)) * std::sqrt(db[k]);
  const double t1 = telescope / (rm * Kd);
  const double t2 = std::sqrt(d0) / (rm * Kd * sched.at(1));
  const double t3 = std::sqrt(db[K]) / (rm * Kd * sched.at(K));
  const double t4 = std::sqrt(params.A / (params.m * Kd));
  double dsum = 0.0;
  for (int k = 1; k <= K; ++k) dsum += db[k - 1];
  const double t5 = std::sqrt(2.0 * params.B * dsum / (params.m * Kd * Kd));

  const double root = t1 + t2 + t3 + t4 + t5;
  return 0.5 * params.M * root * root;
}

struct NonFactoringBound : std::logic_error {
  using std::logic_error::logic_error;
};

// Bundles a bound kind with its schedule and psi, exposing b(d0, K) and the
// affine factorization where one exists.
struct GapBound {
  BoundKind kind = BoundKind::LastIterate;
  StepSchedule schedule = StepSchedule::constant(1.0);
  FunctionParams params;

  GapBound() = default;
  GapBound(BoundKind k, StepSchedule s, FunctionParams p)
      : kind(k), schedule(std::move(s)), params(std::move(p)) {
    params.validate();
    if (kind == BoundKind::ConstStepAvg && !schedule.is_constant())
      throw std::invalid_argument("ConstStepAvg requires a constant schedule");
    if (kind == BoundKind::QuadraticAvg && schedule.kind != StepSchedule::Kind::Power)
      throw std::invalid_argument("QuadraticAvg requires a power schedule");
    if (kind == BoundKind::ClosedFormD && schedule.kind != StepSchedule::Kind::Power)
      throw std::invalid_argument("ClosedFormD requires a power schedule");
  }

  bool factorizable() const {
    return kind == BoundKind::LastIterate || kind == BoundKind::ConstStepAvg;
  }

  double operator()(double d0, int K) const {
    if (d0 < 0.0) throw std::invalid_argument("GapBound: d0 >= 0 required");
    switch (kind) {
      case BoundKind::LastIterate: return b_last_iterate(d0, K, schedule, params);
      case BoundKind::ConstStepAvg: return b_const_step_avg(d0, K, schedule.mu, params);
      case BoundKind::NedicLeeAvg: return b_nedic_lee(d0, K, params);
      case BoundKind::QuadraticAvg:
        return b_quadratic_avg(d0, K, schedule.C, schedule.alpha, params);
      case BoundKind::ClosedFormD:
        return 0.5 * params.M * closed_form_d_bound(d0, K, schedule.C, schedule.alpha, params);
    }
    return kNaN;
  }

  Factorization factorize(int K) const {
    switch (kind) {
      case BoundKind::LastIterate: return last_iterate_factors(K, schedule, params);
      case BoundKind::ConstStepAvg: return const_step_avg_factors(K, schedule.mu, params);
      default: throw NonFactoringBound("non-factoring bound kind");
    }
  }

  // the SGD configuration whose analysis this bound reflects
  AveragingScheme matching_averaging() const {
    switch (kind) {
      case BoundKind::LastIterate:
      case BoundKind::ClosedFormD: return AveragingScheme::last_iterate();
      case BoundKind::ConstStepAvg: return AveragingScheme::gamma_weighted(params.m, params.B);
      case BoundKind::NedicLeeAvg: return AveragingScheme::inv_step_weighted();
      case BoundKind::QuadraticAvg: return AveragingScheme::uniform();
    }
    return AveragingScheme::last_iterate();
  }

  StepSchedule matching_schedule() const {
    if (kind == BoundKind::NedicLeeAvg) return StepSchedule::inv_strong(params.m);
    return schedule;
  }
};

inline Factorization factorize(BoundKind kind, int K, const StepSchedule& schedule,
                               const FunctionParams& params) {
  GapBound b(kind, schedule, params);
  return b.factorize(K);
}

}  // namespace driftk
