#pragma once

#include <functional>

#include "driftk/objective.hpp"

namespace driftk {

// ---- step-size schedules; mu(ell) is defined for ell >= 1 ----

struct StepSchedule {
  enum class Kind { Constant, Power, InvStrong };
  Kind kind = Kind::Constant;
  double mu = 0.0;     // constant
  double C = 0.0;      // power: C * ell^(-alpha)
  double alpha = 0.0;  // power exponent in [0,1]
  double m = 0.0;      // inverse strong convexity: 1/(m ell)

  static StepSchedule constant(double mu_in) {
    if (!(mu_in > 0.0)) throw std::invalid_argument("StepSchedule: mu must be > 0");
    StepSchedule s;
    s.kind = Kind::Constant;
    s.mu = mu_in;
    return s;
  }

  static StepSchedule power(double C_in, double alpha_in) {
    if (!(C_in > 0.0) || alpha_in < 0.0 || alpha_in > 1.0)
      throw std::invalid_argument("StepSchedule: need C > 0 and alpha in [0,1]");
    StepSchedule s;
    s.kind = Kind::Power;
    s.C = C_in;
    s.alpha = alpha_in;
    return s;
  }

  static StepSchedule inv_strong(double m_in) {
    if (!(m_in > 0.0)) throw std::invalid_argument("StepSchedule: m must be > 0");
    StepSchedule s;
    s.kind = Kind::InvStrong;
    s.m = m_in;
    return s;
  }

  double at(int ell) const {
    switch (kind) {
      case Kind::Constant: return mu;
      case Kind::Power: return C * std::pow(static_cast<double>(ell), -alpha);
      case Kind::InvStrong: return 1.0 / (m * static_cast<double>(ell));
    }
    return 0.0;
  }

  bool is_constant() const { return kind == Kind::Constant; }
};

// ---- iterate combination schemes ----

struct AveragingScheme {
  enum class Kind { LastIterate, Uniform, GammaWeighted, InvStepWeighted };
  Kind kind = Kind::LastIterate;
  double m = 0.0;  // gamma weighting ratio comes from 1 - m*mu + B*mu^2
  double B = 0.0;

  static AveragingScheme last_iterate() { return {}; }

  static AveragingScheme uniform() {
    AveragingScheme s;
    s.kind = Kind::Uniform;
    return s;
  }

  static AveragingScheme gamma_weighted(double m_in, double B_in) {
    if (!(m_in > 0.0) || B_in < 0.0)
      throw std::invalid_argument("AveragingScheme: need m > 0, B >= 0");
    AveragingScheme s;
    s.kind = Kind::GammaWeighted;
    s.m = m_in;
    s.B = B_in;
    return s;
  }

  static AveragingScheme inv_step_weighted() {
    AveragingScheme s;
    s.kind = Kind::InvStepWeighted;
    return s;
  }

  // gamma ratio q = 1 - m*mu + B*mu^2; must sit in (0,1) for the scheme to apply
  double gamma_ratio(const StepSchedule& schedule) const {
    if (!schedule.is_constant())
      throw std::invalid_argument("gamma averaging requires a constant step size");
    const double q = 1.0 - m * schedule.mu + B * schedule.mu * schedule.mu;
    if (!(q > 0.0 && q < 1.0))
      throw std::invalid_argument("gamma averaging requires 1 - m*mu + B*mu^2 in (0,1)");
    return q;
  }
};

// Explicit weight vector over the iterates x(0..K).  lambda(0) = 0 for every
// scheme except last-iterate.
inline Vec averaging_weights(const AveragingScheme& scheme, const StepSchedule& schedule, int K) {
  if (K < 1) throw std::invalid_argument("averaging_weights: K >= 1 required");
  Vec w(static_cast<std::size_t>(K) + 1, 0.0);
  switch (scheme.kind) {
    case AveragingScheme::Kind::LastIterate:
      w[K] = 1.0;
      break;
    case AveragingScheme::Kind::Uniform:
      for (int ell = 1; ell <= K; ++ell) w[ell] = 1.0 / static_cast<double>(K);
      break;
    case AveragingScheme::Kind::GammaWeighted: {
      const double q = scheme.gamma_ratio(schedule);
      // gamma(ell) = q^(-ell); normalize with q^(K-ell) <= 1 to dodge overflow
      double sum = 0.0;
      for (int ell = 1; ell <= K; ++ell) {
        w[ell] = std::pow(q, static_cast<double>(K - ell));
        sum += w[ell];
      }
      for (int ell = 1; ell <= K; ++ell) w[ell] /= sum;
      break;
    }
    case AveragingScheme::Kind::InvStepWeighted: {
      double sum = 0.0;
      for (int ell = 1; ell <= K; ++ell) {
        w[ell] = 1.0 / schedule.at(ell);
        sum += w[ell];
      }
      for (int ell = 1; ell <= K; ++ell) w[ell] /= sum;
      break;
    }
  }
  return w;
}

struct SgdResult {
  Vec x_hat;        // combined output
  Vec last_iterate; // x(K)
  int samples_used = 0;
};

// Projected SGD: x(ell+1) = proj[ x(ell) - mu(ell+1) grad(x(ell), z(ell)) ].
// Consumes exactly K samples, one per iteration; the sampler is indexed by the
// iteration counter so runs replay bit-identically.
template <class Sampler>
SgdResult run_sgd(const LossModel& model, Sampler&& sampler, const Vec& x0, int K,
                  const StepSchedule& schedule, const AveragingScheme& averaging,
                  const FeasibleSet& set) {
  if (K < 1) throw std::invalid_argument("run_sgd: K >= 1 required");
  if (static_cast<int>(x0.size()) != set.dim)
    throw std::invalid_argument("run_sgd: x0 dimension mismatch");
  if (!set.contains(x0)) throw std::invalid_argument("run_sgd: x0 must be feasible");
  if (averaging.kind == AveragingScheme::Kind::GammaWeighted)
    (void)averaging.gamma_ratio(schedule);  // validated up front

  Vec x = x0;
  Vec avg;             // running weighted average over x(1..K)
  double inv_step_sum = 0.0;
  const bool want_avg = averaging.kind != AveragingScheme::Kind::LastIterate;
  const double q = averaging.kind == AveragingScheme::Kind::GammaWeighted
                       ? averaging.gamma_ratio(schedule)
                       : 0.0;

  for (int ell = 1; ell <= K; ++ell) {
    const double mu = schedule.at(ell);
    const Sample s = sampler(ell - 1);
    const Vec g = model.grad(x, s.z);
    for (int i = 0; i < set.dim; ++i) x[i] -= mu * g[i];
    x = project(set, x);

    if (want_avg) {
      double w = 0.0;
      switch (averaging.kind) {
        case AveragingScheme::Kind::Uniform:
          w = 1.0 / static_cast<double>(ell);
          break;
        case AveragingScheme::Kind::GammaWeighted:
          // weight of x(ell) within x(1..ell): (1-q)/(1-q^ell)
          w = (1.0 - q) / (1.0 - std::pow(q, static_cast<double>(ell)));
          break;
        case AveragingScheme::Kind::InvStepWeighted:
          inv_step_sum += 1.0 / mu;
          w = (1.0 / mu) / inv_step_sum;
          break;
        default: break;
      }
      if (avg.empty()) {
        avg = x;
      } else {
        for (int i = 0; i < set.dim; ++i) avg[i] = (1.0 - w) * avg[i] + w * x[i];
      }
    }
  }

  SgdResult r;
  r.last_iterate = x;
  r.x_hat = want_avg ? avg : x;
  r.samples_used = K;
  return r;
}

}  // namespace driftk
