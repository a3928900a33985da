#pragma once

#include "driftk/drift.hpp"

namespace driftk {

enum class Policy { KnownRho, UpdatePast, NoUpdate };

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::KnownRho: return "known_rho";
    case Policy::UpdatePast: return "update_past";
    case Policy::NoUpdate: return "no_update";
  }
  return "?";
}

// one step of the mean-gap recursion: b( (sqrt(2 eps_prev / m) + rho)^2, K )
template <class BoundFn>
double propagate_eps(double eps_prev, double rho, int K, BoundFn&& bound, double m) {
  if (eps_prev < 0.0) throw std::invalid_argument("propagate_eps: eps_prev >= 0 required");
  const double root = std::sqrt(2.0 * eps_prev / m) + rho;
  return bound(root * root, K);
}

namespace detail {

// minimal K with b(d0, K) <= eps via doubling then bisection; relies only on
// b nonincreasing in K
template <class BoundFn>
int min_k_for(double d0, double eps, BoundFn&& bound, int K_max) {
  if (!(eps > 0.0)) throw std::invalid_argument("budget search: eps > 0 required");
  if (K_max < 1) throw std::invalid_argument("budget search: K_max >= 1 required");
  if (bound(d0, 1) <= eps) return 1;
  int lo = 1;  // bound(lo) > eps
  int hi = 2;
  while (hi < K_max && bound(d0, hi) > eps) {
    lo = hi;
    hi = std::min(K_max, hi * 2);
  }
  if (bound(d0, hi) > eps)
    throw InfeasibleBudget("no budget K <= K_max reaches the target mean gap");
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (bound(d0, mid) <= eps)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace detail

// K* = min{ K >= 1 : b( (sqrt(2 eps / m) + rho)^2, K ) <= eps }
template <class BoundFn>
int k_star(double eps, double rho, BoundFn&& bound, double m, int K_max = 1000000) {
  const double root = std::sqrt(2.0 * eps / m) + rho;
  return detail::min_k_for(root * root, eps, bound, K_max);
}

// initial budget rule: min{ K : b(diam^2, K) <= eps }
template <class BoundFn>
int k_initial(double eps, BoundFn&& bound, double diam2, int K_max = 1000000) {
  return detail::min_k_for(diam2, eps, bound, K_max);
}

// bootstrap values eps_i = b(diam^2, K_i) for i = 1, 2
template <class BoundFn>
std::pair<double, double> bootstrap(int K1, int K2, BoundFn&& bound, double diam2) {
  if (K1 < 1 || K2 < 1) throw std::invalid_argument("bootstrap: K1, K2 >= 1 required");
  return {bound(diam2, K1), bound(diam2, K2)};
}

struct GapLedger {
  Policy policy = Policy::NoUpdate;
  double eps1 = 0.0, eps2 = 0.0;  // bootstrap values
  std::vector<int> K_hist;        // K_1..K_n
  Vec eps_hist;                   // per-n bound values as computed
};

// no-update-past: K* with the certified drift value in place of rho
template <class BoundFn>
int choose_K_no_update(double rho_certified, double eps, BoundFn&& bound, double m,
                       int K_max = 1000000) {
  return k_star(eps, rho_certified, bound, m, K_max);
}

// update-past: recompute every past bound with the newest certified drift
// value, anchored at the two bootstrap values, then require
//   b( (sqrt((2/m) max{eps_{n-1}, eps}) + rho_cert)^2, K ) <= eps.
// Returns K_n and leaves the refreshed per-step bounds in the ledger.
template <class BoundFn>
int choose_K_update_past(GapLedger& ledger, double rho_certified, double eps, BoundFn&& bound,
                         double m, int K_max = 1000000) {
  const int n_prev = static_cast<int>(ledger.K_hist.size());
  if (n_prev < 2) throw std::invalid_argument("choose_K_update_past: needs K_1 and K_2");
  Vec eps_upd(static_cast<std::size_t>(n_prev));
  eps_upd[0] = ledger.eps1;
  eps_upd[1] = ledger.eps2;
  for (int i = 3; i <= n_prev; ++i)
    eps_upd[i - 1] =
        propagate_eps(eps_upd[i - 2], rho_certified, ledger.K_hist[i - 1], bound, m);
  ledger.eps_hist = eps_upd;
  const double ref = std::max(eps_upd[n_prev - 1], eps);
  const double root = std::sqrt(2.0 * ref / m) + rho_certified;
  return detail::min_k_for(root * root, eps, bound, K_max);
}

// sampled monotonicity check for a bound kind before trusting the K search
template <class BoundFn>
bool bound_nonincreasing_in_K(BoundFn&& bound, double d0, int K_hi = 4096) {
  double prev = bound(d0, 1);
  for (int K = 2; K <= K_hi; K *= 2) {
    const double cur = bound(d0, K);
    if (cur > prev * (1.0 + 1e-12)) return false;
    prev = cur;
  }
  return true;
}

// ---- fixed point of the one-step propagation map ----

// phi(v) = alpha (sqrt(2 v / m) + rho)^2 + beta
struct PhiMap {
  double alpha = 0.0;
  double beta = 0.0;
  double m = 1.0;
  double rho = 0.0;

  double operator()(double v) const {
    const double root = std::sqrt(2.0 * v / m) + rho;
    return alpha * root * root + beta;
  }

  double derivative(double v) const {
    if (v <= 0.0) return std::numeric_limits<double>::infinity();
    return 2.0 * alpha * (std::sqrt(2.0 * v / m) + rho) / std::sqrt(2.0 * v * m);
  }

  bool admissible() const { return 2.0 * alpha / m < 1.0; }
};

struct FixedPointResult {
  double v_bar = 0.0;
  double derivative = 0.0;
  int iterations = 0;
  bool degenerate = false;  // beta = 0 and rho = 0: only v = 0 is fixed
};

inline FixedPointResult fixed_point(const PhiMap& map, double tol, double v0,
                                    int max_iter = 1000000) {
  if (!map.admissible())
    throw std::invalid_argument("fixed_point: inadmissible map (2 alpha / m >= 1)");
  if (!(v0 > 0.0)) throw std::invalid_argument("fixed_point: v0 > 0 required");
  FixedPointResult r;
  if (map.beta == 0.0 && map.rho == 0.0) {
    r.degenerate = true;
    r.v_bar = 0.0;
    r.derivative = 2.0 * map.alpha / map.m;
    return r;
  }
  double v = v0;
  for (int it = 1; it <= max_iter; ++it) {
    const double next = map(v);
    r.iterations = it;
    if (std::abs(next - v) <= tol) {
      v = next;
      break;
    }
    v = next;
  }
  if (std::abs(map(v) - v) > tol)
    throw std::runtime_error("fixed_point: iteration did not converge");
  r.v_bar = v;
  r.derivative = map.derivative(v);
  return r;
}

}  // namespace driftk
