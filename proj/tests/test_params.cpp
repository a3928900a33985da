#include <catch2/catch_amalgamated.hpp>

#include "driftk/params.hpp"

using namespace driftk;

namespace {

std::vector<Sample> single_feature_batch(const Vec& w) {
  Sample s;
  s.z = w;
  s.z.push_back(0.0);  // target unused by curvature estimators
  return {s};
}

}  // namespace

TEST_CASE("Hessian curvature estimates on the penalized quadratic") {
  const double lambda = 0.1;
  PenalizedQuadraticLoss model(2, lambda);
  const FeasibleSet set = FeasibleSet::ball(Vec(2, 0.0), 1.0);

  SECTION("single sample w = (1, 0)") {
    const auto batch = single_feature_batch(Vec{1.0, 0.0});
    CHECK(m_hat_hessian(model, batch, set) == Catch::Approx(0.1).margin(1e-12));
    CHECK(M_hat_hessian(model, batch, set) == Catch::Approx(1.1).margin(1e-12));
  }

  SECTION("zero features leave only the ridge") {
    const auto batch = single_feature_batch(Vec{0.0, 0.0});
    CHECK(m_hat_hessian(model, batch, set) == Catch::Approx(lambda).margin(1e-12));
    CHECK(M_hat_hessian(model, batch, set) == Catch::Approx(lambda).margin(1e-12));
  }

  SECTION("identity feature covariance") {
    // w = sqrt(2) e_i across the batch averages to the identity
    std::vector<Sample> batch;
    batch.push_back(single_feature_batch(Vec{std::sqrt(2.0), 0.0})[0]);
    batch.push_back(single_feature_batch(Vec{0.0, std::sqrt(2.0)})[0]);
    CHECK(m_hat_hessian(model, batch, set) == Catch::Approx(lambda + 1.0).margin(1e-12));
    CHECK(M_hat_hessian(model, batch, set) == Catch::Approx(lambda + 1.0).margin(1e-12));
  }

  SECTION("eigen-gradient descent matches on quadratics (x independence)") {
    const auto batch = single_feature_batch(Vec{1.0, 0.0});
    const double grid = m_hat_hessian(model, batch, set, ProbeMode::Grid);
    const double eg = m_hat_hessian(model, batch, set, ProbeMode::EigenGradientDescent);
    CHECK(eg == Catch::Approx(grid).margin(1e-10));
  }

  SECTION("missing capability") {
    SmoothedHingeLoss hinge(2, 0.1);
    const auto batch = single_feature_batch(Vec{1.0, 0.0});
    CHECK_THROWS_AS(m_hat_hessian(hinge, batch, set), std::logic_error);
  }
}

TEST_CASE("secant-ratio heuristic") {
  SECTION("exact on quadratics for any probes") {
    // pure ridge: loss = 0.5 m |x|^2 via zero features, lambda = m
    const double m = 0.7;
    PenalizedQuadraticLoss model(2, m);
    const auto batch = single_feature_batch(Vec{0.0, 0.0});
    const std::vector<Vec> probes = {{0.0, 0.0}, {0.5, 0.0}, {-0.3, 0.4}};
    const auto [mh, Mh] = m_M_heuristic(model, batch, probes);
    CHECK(mh == Catch::Approx(m).margin(1e-12));
    CHECK(Mh == Catch::Approx(m).margin(1e-12));
  }

  SECTION("quartic brackets the curvature at the probes") {
    // f(x) = 0.5 x^2 + 0.25 x^4 via a custom model
    struct Quartic final : LossModel {
      int dim() const override { return 1; }
      double loss(const Vec& x, const Vec&) const override {
        return 0.5 * x[0] * x[0] + 0.25 * x[0] * x[0] * x[0] * x[0];
      }
      Vec grad(const Vec& x, const Vec&) const override {
        return {x[0] + x[0] * x[0] * x[0]};
      }
    } quartic;
    const std::vector<Sample> batch = {{{0.0}}};
    const std::vector<Vec> probes = {{-1.0}, {0.0}, {1.0}};
    const auto [mh, Mh] = m_M_heuristic(quartic, batch, probes);
    // hand oracle over the six ordered pairs
    auto ratio = [&](double xi, double xj) {
      const double fi = 0.5 * xi * xi + 0.25 * xi * xi * xi * xi;
      const double fj = 0.5 * xj * xj + 0.25 * xj * xj * xj * xj;
      const double gj = xj + xj * xj * xj;
      return (fi - fj - gj * (xi - xj)) / (0.5 * (xi - xj) * (xi - xj));
    };
    double lo = 1e300, hi = -1e300;
    for (double xi : {-1.0, 0.0, 1.0})
      for (double xj : {-1.0, 0.0, 1.0}) {
        if (xi == xj) continue;
        lo = std::min(lo, ratio(xi, xj));
        hi = std::max(hi, ratio(xi, xj));
      }
    CHECK(mh == Catch::Approx(lo).margin(1e-12));
    CHECK(Mh == Catch::Approx(hi).margin(1e-12));
    // strong convexity with m = 1 keeps every secant ratio at or above 1
    CHECK(mh >= 1.0 - 1e-12);
    CHECK(Mh >= mh);
  }

  SECTION("duplicate probes are rejected") {
    PenalizedQuadraticLoss model(1, 0.1);
    const std::vector<Sample> batch = {{{1.0, 0.0}}};
    CHECK_THROWS_AS(m_M_heuristic(model, batch, {{0.0}, {0.0}}), std::invalid_argument);
  }
}

TEST_CASE("closed-form quadratic estimates match the Hessian route bit for bit") {
  const double lambda = 0.1;
  PenalizedQuadraticLoss model(3, lambda);
  const FeasibleSet set = FeasibleSet::ball(Vec(3, 0.0), 1.0);
  Rng rng(17);
  std::vector<Sample> batch;
  for (int i = 0; i < 25; ++i) batch.push_back({rng.gaussian_vec(4)});
  const auto [mq, Mq] = quadratic_specific(batch, lambda, 3);
  const double mh = m_hat_hessian(model, batch, set);
  const double Mh = M_hat_hessian(model, batch, set);
  CHECK(std::abs(mq - mh) < 1e-12);
  CHECK(std::abs(Mq - Mh) < 1e-12);
}

TEST_CASE("gradient-growth estimates") {
  SECTION("B plug-in") {
    CHECK(B_hat(1.1) == Catch::Approx(2.42));
    CHECK(B_hat(0.0) == 0.0);
    CHECK(B_hat(1.0) == 2.0);
    CHECK_THROWS_AS(B_hat(-0.1), std::invalid_argument);
  }

  SECTION("A estimate on frozen inputs") {
    struct UnitGrad final : LossModel {
      int dim() const override { return 1; }
      double loss(const Vec&, const Vec&) const override { return 0.0; }
      Vec grad(const Vec&, const Vec& z) const override { return {z[0]}; }
    } model;

    // all gradients zero
    CHECK(A_hat(model, Vec{0.0}, {{{0.0}}, {{0.0}}}, 1.0, 2.0) == 0.0);

    // K=1, |grad| = 1, ratio = 2: 2 + 4*4*1 = 18
    CHECK(A_hat(model, Vec{0.0}, {{{1.0}}}, 1.0, 2.0) == Catch::Approx(18.0));

    // noiseless batch: every gradient equals the mean, A = (2 + 4 ratio^2) |g|^2
    const std::vector<Sample> noiseless = {{{0.6}}, {{0.6}}, {{0.6}}};
    CHECK(A_hat(model, Vec{0.0}, noiseless, 1.0, 3.0) ==
          Catch::Approx((2.0 + 4.0 * 9.0) * 0.36));

    CHECK_THROWS_AS(A_hat(model, Vec{0.0}, {{{1.0}}}, 0.0, 2.0), std::invalid_argument);
  }
}

TEST_CASE("running psi combination with slack adjustment") {
  const TnSchedule tsched(0.1, 0.375);

  SECTION("single estimate and its adjusted values") {
    std::vector<PsiOneStep> hist = {{1.0, 2.0, 3.0, 8.0}};
    const ParamEstimates est = combine_params(hist, tsched);
    CHECK(est.m_mean == 1.0);
    CHECK(est.t == Catch::Approx(0.1));
    CHECK(est.m_adjusted() == Catch::Approx(0.9));
    CHECK(est.M_adjusted() == Catch::Approx(2.1));
    CHECK(est.A_adjusted() == Catch::Approx(3.1));
    CHECK(est.B_adjusted() == Catch::Approx(8.1));
  }

  SECTION("constant history keeps the mean") {
    std::vector<PsiOneStep> hist(3, PsiOneStep{1.0, 1.5, 2.0, 4.5});
    const ParamEstimates est = combine_params(hist, TnSchedule(0.1 * std::pow(3.0, 0.375), 0.375));
    CHECK(est.m_mean == Catch::Approx(1.0));
    CHECK(est.t == Catch::Approx(0.1));
    CHECK(est.m_adjusted() == Catch::Approx(0.9));
  }

  SECTION("nonpositive adjusted m is an error at use") {
    std::vector<PsiOneStep> hist = {{0.05, 1.0, 1.0, 2.0}};
    const ParamEstimates est = combine_params(hist, TnSchedule(0.1, 0.375));
    CHECK_THROWS_AS(est.m_adjusted(), std::invalid_argument);
  }

  SECTION("empty history is an error") {
    CHECK_THROWS_AS(combine_params({}, tsched), std::invalid_argument);
  }
}

TEST_CASE("monotone plumbing: larger adjusted psi never shrinks factorable bounds") {
  FunctionParams base;
  base.m = 1.0;
  base.M = 1.5;
  base.A = 0.5;
  base.B = 1.0;
  const StepSchedule mu = StepSchedule::constant(0.05);
  for (BoundKind kind : {BoundKind::LastIterate, BoundKind::ConstStepAvg}) {
    const GapBound lo(kind, mu, base);
    for (double bump : {0.05, 0.2}) {
      // psi ordering: smaller m and larger (M, A, B) mean a larger psi
      FunctionParams up = base;
      up.m -= bump * 0.5;
      up.M += bump;
      up.A += bump;
      up.B += bump;
      const GapBound hi(kind, mu, up);
      for (double d0 : {0.0, 0.5, 2.0})
        for (int K : {5, 50, 500}) CHECK(hi(d0, K) >= lo(d0, K) - 1e-12);
    }
  }
}

TEST_CASE("bias direction on the Gaussian-feature quadratic, light version") {
  // light Monte Carlo: the acceptance suite runs the full 1000-batch protocol
  const int d = 3;
  const double sw2 = 0.9, lambda = 0.1;
  const double m_true = sw2 + lambda;
  Rng rng(404);
  Vec m_vals, M_vals;
  for (int b = 0; b < 200; ++b) {
    std::vector<Sample> batch;
    for (int k = 0; k < 30; ++k) {
      Vec z = rng.gaussian_vec(d + 1);
      for (int i = 0; i < d; ++i) z[i] *= std::sqrt(sw2);
      batch.push_back({z});
    }
    const auto [mt, Mt] = quadratic_specific(batch, lambda, d);
    m_vals.push_back(mt);
    M_vals.push_back(Mt);
  }
  const MeanSE ms = mean_se(m_vals);
  const MeanSE Ms = mean_se(M_vals);
  CHECK(ms.mean <= m_true + 2.0 * ms.se);
  CHECK(Ms.mean >= m_true - 2.0 * Ms.se);
}
