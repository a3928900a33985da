#pragma once

#include "driftk/objective.hpp"

namespace driftk {

// Drifting penalized-quadratic regression with analytic minimizers.
//
// z = (w, y) is zero-mean Gaussian with covariance [[sw2 I, r_n], [r_n', sy2_n]].
// The cross-covariance walks along a fixed seeded unit direction,
//   r_n = r_1 + (n-1) rho (sw2 + lambda) u,
// so |x*_n - x*_{n-1}| = rho exactly; sy2_n = |r_n|^2 / sw2 + 1 keeps the
// joint covariance positive definite with unit conditional variance.
class RegressionSequence final : public TaskSequence {
 public:
  RegressionSequence(int d, double sw2, double lambda, double rho, int N,
                     std::uint64_t base_seed, double r1_norm = kNaN)
      : d_(d), sw2_(sw2), lambda_(lambda), rho_(rho), N_(N), base_seed_(base_seed),
        loss_(d, lambda) {
    if (d < 1) throw std::invalid_argument("make_regression: d >= 1 required");
    if (!(sw2 > 0.0)) throw std::invalid_argument("make_regression: sigma_w^2 > 0 required");
    if (lambda < 0.0 || rho < 0.0)
      throw std::invalid_argument("make_regression: lambda, rho >= 0 required");
    if (N < 1) throw std::invalid_argument("make_regression: N >= 1 required");
    Rng rng = Rng::from_keys(base_seed, 0x7461736bULL);
    const double scale = std::isfinite(r1_norm) ? r1_norm : (sw2_ + lambda_);
    r1_ = scaled(rng.unit_vec(d_), scale);
    u_ = rng.unit_vec(d_);
  }

  int dim() const override { return d_; }
  int horizon() const override { return N_; }
  const LossModel& loss_model() const override { return loss_; }
  bool has_analytic() const override { return true; }

  Vec cross_cov(int n) const {
    Vec r = r1_;
    axpy(static_cast<double>(n - 1) * rho_ * (sw2_ + lambda_), u_, r);
    return r;
  }

  double target_var(int n) const {
    const Vec r = cross_cov(n);
    return dot(r, r) / sw2_ + 1.0;
  }

  Vec minimizer(int n) const override { return scaled(cross_cov(n), 1.0 / (sw2_ + lambda_)); }

  // f_n(x) - f_n(x*_n) = (sw2 + lambda)/2 |x - x*_n|^2
  double exact_gap(int n, const Vec& x) const override {
    const Vec dxv = sub(x, minimizer(n));
    return 0.5 * (sw2_ + lambda_) * dot(dxv, dxv);
  }

  Sample sample(int n, int k, std::uint64_t run_seed, int stream = 0) const override {
    Rng rng = Rng::from_keys(base_seed_ ^ run_seed,
                             static_cast<std::uint64_t>(n),
                             static_cast<std::uint64_t>(k),
                             0x5a5a0000ULL + static_cast<std::uint64_t>(stream));
    const Vec r = cross_cov(n);
    Sample s;
    s.z.resize(d_ + 1);
    const double sw = std::sqrt(sw2_);
    double proj = 0.0;
    for (int i = 0; i < d_; ++i) {
      s.z[i] = sw * rng.gaussian();
      proj += r[i] * s.z[i];
    }
    // y | w is Gaussian with mean r'w / sw2 and unit variance by construction
    s.z[d_] = proj / sw2_ + rng.gaussian();
    return s;
  }

  // --- exact psi for this family ---

  double m_true() const { return sw2_ + lambda_; }
  double M_true() const { return sw2_ + lambda_; }

  // A_n = 2 E|grad l(x*_n, z)|^2, computed with Isserlis on the Gaussian pair
  double A_true(int n) const {
    const Vec r = cross_cov(n);
    const double rr = dot(r, r);
    const double sp = sw2_ + lambda_;
    const double var_e = target_var(n) - 2.0 * rr / sp + sw2_ * rr / (sp * sp);
    return 2.0 * (d_ * sw2_ * var_e + lambda_ * lambda_ * rr / (sp * sp));
  }

  double A_true_max() const {
    double a = 0.0;
    for (int n = 1; n <= N_; ++n) a = std::max(a, A_true(n));
    return a;
  }

  // B = 2 lambda_max( E[(w w' + lambda I)^2] ) = 2 (sw2^2 (d+2) + 2 lambda sw2 + lambda^2)
  double B_true() const {
    return 2.0 * (sw2_ * sw2_ * (d_ + 2) + 2.0 * lambda_ * sw2_ + lambda_ * lambda_);
  }

  double sw2() const { return sw2_; }
  double lambda() const { return lambda_; }
  double rho() const { return rho_; }

 private:
  int d_;
  double sw2_, lambda_, rho_;
  int N_;
  std::uint64_t base_seed_;
  PenalizedQuadraticLoss loss_;
  Vec r1_, u_;
};

inline RegressionSequence make_regression(int d, double sw2, double lambda, double rho, int N,
                                          std::uint64_t seed, double r1_norm = kNaN) {
  return RegressionSequence(d, sw2, lambda, rho, N, seed, r1_norm);
}

// Drifting binary classification under the smoothed hinge loss.  The class
// means sit at antipodal points of the unit sphere and rotate within a fixed
// seeded 2-plane by arc_step radians per task, so consecutive means are a
// constant chord 2 sin(arc_step / 2) apart.  No closed form ties the
// minimizer movement to the arc step; the bounded-drift model is the
// intended consumer.
class ClassificationSequence final : public TaskSequence {
 public:
  ClassificationSequence(int d, double sigma2, double lambda, int N, double arc_step,
                         std::uint64_t base_seed)
      : d_(d), sigma2_(sigma2), lambda_(lambda), N_(N), arc_(arc_step), base_seed_(base_seed),
        loss_(d, lambda) {
    if (d < 2) throw std::invalid_argument("make_classification: d >= 2 required");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("make_classification: sigma^2 > 0 required");
    if (N < 1) throw std::invalid_argument("make_classification: N >= 1 required");
    Rng rng = Rng::from_keys(base_seed, 0x636c6173ULL);
    e1_ = rng.unit_vec(d_);
    Vec v = rng.unit_vec(d_);
    axpy(-dot(v, e1_), e1_, v);
    double nv = norm2(v);
    while (nv < 1e-9) {
      v = rng.unit_vec(d_);
      axpy(-dot(v, e1_), e1_, v);
      nv = norm2(v);
    }
    e2_ = scaled(v, 1.0 / nv);
  }

  int dim() const override { return d_; }
  int horizon() const override { return N_; }
  const LossModel& loss_model() const override { return loss_; }

  Vec class_mean(int n, int label) const {
    const double th = static_cast<double>(n - 1) * arc_;
    Vec mu = scaled(e1_, std::cos(th));
    axpy(std::sin(th), e2_, mu);
    return label > 0 ? mu : scaled(mu, -1.0);
  }

  double mean_chord() const { return 2.0 * std::sin(0.5 * arc_); }

  Sample sample(int n, int k, std::uint64_t run_seed, int stream = 0) const override {
    Rng rng = Rng::from_keys(base_seed_ ^ run_seed,
                             static_cast<std::uint64_t>(n),
                             static_cast<std::uint64_t>(k),
                             0xc1a55000ULL + static_cast<std::uint64_t>(stream));
    const int y = rng.uniform() < 0.5 ? -1 : 1;
    const Vec mu = class_mean(n, y);
    Sample s;
    s.z.resize(d_ + 1);
    const double sd = std::sqrt(sigma2_);
    for (int i = 0; i < d_; ++i) s.z[i] = mu[i] + sd * rng.gaussian();
    s.z[d_] = static_cast<double>(y);
    return s;
  }

  double sigma2() const { return sigma2_; }
  double lambda() const { return lambda_; }
  double arc_step() const { return arc_; }

 private:
  int d_;
  double sigma2_, lambda_;
  int N_;
  double arc_;
  std::uint64_t base_seed_;
  SmoothedHingeLoss loss_;
  Vec e1_, e2_;
};

inline ClassificationSequence make_classification(int d, double sigma2, double lambda, int N,
                                                  double arc_step, std::uint64_t seed) {
  return ClassificationSequence(d, sigma2, lambda, N, arc_step, seed);
}

}  // namespace driftk
