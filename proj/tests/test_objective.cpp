#include <catch2/catch_amalgamated.hpp>

#include "driftk/objective.hpp"
#include "driftk/synth.hpp"

using namespace driftk;

TEST_CASE("projection onto boxes and balls") {
  const FeasibleSet box = FeasibleSet::box(Vec{-1, -1}, Vec{1, 1});
  CHECK(project(box, Vec{2.0, 0.5}) == Vec{1.0, 0.5});

  const FeasibleSet ball = FeasibleSet::ball(Vec{0, 0}, 1.0);
  const Vec p = project(ball, Vec{3.0, 4.0});
  CHECK(p[0] == Catch::Approx(0.6).epsilon(1e-12));
  CHECK(p[1] == Catch::Approx(0.8).epsilon(1e-12));

  const Vec inside{0.3, -0.4};
  CHECK(project(ball, inside) == inside);
  CHECK(project(box, inside) == inside);

  CHECK_THROWS_AS(project(box, Vec{1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("projection is idempotent and non-expansive") {
  Rng rng(42);
  const FeasibleSet ball = FeasibleSet::ball(Vec{0.5, -0.25, 1.0}, 2.0);
  const FeasibleSet box = FeasibleSet::box(Vec{-2, -1, 0}, Vec{1, 3, 2});
  for (int trial = 0; trial < 1000; ++trial) {
    Vec x = rng.gaussian_vec(3);
    Vec y = rng.gaussian_vec(3);
    for (auto& v : x) v *= 4.0;
    for (auto& v : y) v *= 4.0;
    for (const FeasibleSet* set : {&ball, &box}) {
      const Vec px = project(*set, x);
      const Vec py = project(*set, y);
      CHECK(dist2(project(*set, px), px) <= 1e-12);
      CHECK(dist2(px, py) <= dist2(x, y) + 1e-12);
    }
  }
}

namespace {

// loss with grad(x, z) = z-independent constant rows, for mean checks
struct FixedGradLoss final : LossModel {
  int dim() const override { return 2; }
  double loss(const Vec&, const Vec& z) const override { return z[0]; }
  Vec grad(const Vec&, const Vec& z) const override { return {z[0], z[1]}; }
};

}  // namespace

TEST_CASE("empirical gradient and loss are batch means") {
  FixedGradLoss model;
  const std::vector<Sample> batch = {{{1.0, 2.0}}, {{3.0, 4.0}}};
  const Vec g = empirical_gradient(model, Vec{0, 0}, batch);
  CHECK(g[0] == Catch::Approx(2.0));
  CHECK(g[1] == Catch::Approx(3.0));

  const std::vector<Sample> single = {{{7.0, -1.0}}};
  CHECK(empirical_gradient(model, Vec{0, 0}, single) == Vec{7.0, -1.0});

  const std::vector<Sample> losses = {{{1.0, 0.0}}, {{2.0, 0.0}}, {{3.0, 0.0}}};
  CHECK(empirical_loss(model, Vec{0, 0}, losses) == Catch::Approx(2.0));
  CHECK(empirical_loss(model, Vec{0, 0}, single) == Catch::Approx(7.0));

  CHECK_THROWS_AS(empirical_gradient(model, Vec{0, 0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(empirical_loss(model, Vec{0, 0}, {}), std::invalid_argument);
}

TEST_CASE("zero-noise quadratic gradient is sample independent") {
  // 0.5 |x|^2 as a penalized quadratic with w = 0 features and lambda = 1
  PenalizedQuadraticLoss model(2, 1.0);
  const std::vector<Sample> batch = {{{0.0, 0.0, 5.0}}, {{0.0, 0.0, -3.0}}};
  const Vec g = empirical_gradient(model, Vec{1.0, 1.0}, batch);
  CHECK(g[0] == Catch::Approx(1.0));
  CHECK(g[1] == Catch::Approx(1.0));
}

TEST_CASE("perfect-fit regression batch has zero loss at lambda = 0") {
  PenalizedQuadraticLoss model(2, 0.0);
  const Vec x{0.5, -2.0};
  std::vector<Sample> batch;
  for (double a : {1.0, -1.0, 2.0}) {
    Sample s;
    s.z = {a, 2 * a, 0.0};
    s.z[2] = s.z[0] * x[0] + s.z[1] * x[1];
    batch.push_back(s);
  }
  CHECK(empirical_loss(model, x, batch) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("empirical gradient is linear in the batch") {
  PenalizedQuadraticLoss model(3, 0.2);
  Rng rng(7);
  std::vector<Sample> b1, b2;
  for (int i = 0; i < 5; ++i) b1.push_back({rng.gaussian_vec(4)});
  for (int i = 0; i < 9; ++i) b2.push_back({rng.gaussian_vec(4)});
  std::vector<Sample> both = b1;
  both.insert(both.end(), b2.begin(), b2.end());
  const Vec x = rng.gaussian_vec(3);
  const Vec g1 = empirical_gradient(model, x, b1);
  const Vec g2 = empirical_gradient(model, x, b2);
  const Vec g = empirical_gradient(model, x, both);
  for (int i = 0; i < 3; ++i)
    CHECK(g[i] == Catch::Approx((5.0 * g1[i] + 9.0 * g2[i]) / 14.0).margin(1e-14));
}

namespace {

void check_gradient_fd(const LossModel& model, const Vec& x, const Vec& z) {
  const Vec g = model.grad(x, z);
  const double h = 1e-6;
  for (int i = 0; i < model.dim(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (model.loss(xp, z) - model.loss(xm, z)) / (2 * h);
    const double scale = std::max(1.0, std::abs(g[i]));
    CHECK(std::abs(g[i] - fd) / scale < 1e-5);
  }
}

void check_hessian_fd(const LossModel& model, const Vec& x, const Vec& z) {
  const Matrix H = model.hessian(x, z);
  const double h = 1e-5;
  for (int i = 0; i < model.dim(); ++i) {
    for (int j = 0; j < model.dim(); ++j) {
      CHECK(H(i, j) == Catch::Approx(H(j, i)).margin(1e-12));
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (model.grad(xp, z)[i] - model.grad(xm, z)[i]) / (2 * h);
      const double scale = std::max(1.0, std::abs(H(i, j)));
      CHECK(std::abs(H(i, j) - fd) / scale < 1e-5);
    }
  }
}

}  // namespace

TEST_CASE("finite differences validate every shipped loss model") {
  Rng rng(99);
  PenalizedQuadraticLoss quad(3, 0.1);
  SmoothedHingeLoss hinge(3, 0.1);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x = rng.gaussian_vec(3);
    Vec zq = rng.gaussian_vec(4);
    check_gradient_fd(quad, x, zq);
    check_hessian_fd(quad, x, zq);

    Vec zh = rng.gaussian_vec(4);
    zh[3] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    // stay away from the hinge kink where the second derivative jumps
    double margin = 1.0 - zh[3] * (zh[0] * x[0] + zh[1] * x[1] + zh[2] * x[2]);
    if (std::abs(margin) < 1e-3) continue;
    check_gradient_fd(hinge, x, zh);
    CHECK_FALSE(hinge.has_hessian());
  }
}

TEST_CASE("task samplers are pure functions of (n, k, seed)") {
  const RegressionSequence task = make_regression(3, 0.9, 0.1, 1.0, 5, 11);
  const Sample a = task.sample(2, 7, 99, 0);
  const Sample b = task.sample(2, 7, 99, 0);
  CHECK(a.z == b.z);
  const Sample c = task.sample(2, 8, 99, 0);
  CHECK(a.z != c.z);
  const Sample d = task.sample(2, 7, 100, 0);
  CHECK(a.z != d.z);
  const Sample e = task.sample(2, 7, 99, 1);
  CHECK(a.z != e.z);
}
