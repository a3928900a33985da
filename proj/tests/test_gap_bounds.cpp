#include <catch2/catch_amalgamated.hpp>

#include "driftk/gap_bounds.hpp"

using namespace driftk;

namespace {

FunctionParams params_mMAB(double m, double M, double A, double B) {
  FunctionParams p;
  p.m = m;
  p.M = M;
  p.A = A;
  p.B = B;
  return p;
}

}  // namespace

TEST_CASE("distance recursion bound") {
  const StepSchedule mu = StepSchedule::constant(0.1);

  SECTION("two-step unwind") {
    // m=1, B=0, A=1: q = 0.8; 0.8^2 * 1 + 0.01 * (1 + 0.8) = 0.658
    const FunctionParams p = params_mMAB(1, 1, 1, 0);
    CHECK(d_recursion_bound(1.0, 2, mu, p) == Catch::Approx(0.658).margin(1e-12));
  }

  SECTION("no noise, started at the minimizer") {
    const FunctionParams p = params_mMAB(1, 1, 0, 0);
    for (int K : {1, 5, 50}) CHECK(d_recursion_bound(0.0, K, mu, p) == 0.0);
  }

  SECTION("empty recursion returns d0") {
    const FunctionParams p = params_mMAB(1, 1, 1, 0);
    CHECK(d_recursion_bound(0.37, 0, mu, p) == Catch::Approx(0.37));
  }

  SECTION("inadmissible step sizes are rejected") {
    const FunctionParams p = params_mMAB(1, 1, 1, 0);
    CHECK_THROWS_AS(d_recursion_bound(1.0, 3, StepSchedule::constant(0.6), p),
                    std::invalid_argument);  // q = -0.2
  }

  SECTION("nonincreasing in K for admissible constant steps") {
    const FunctionParams p = params_mMAB(1, 1, 0.5, 1);
    double prev = d_recursion_bound(2.0, 0, mu, p);
    for (int K = 1; K <= 64; K *= 2) {
      const double cur = d_recursion_bound(2.0, K, mu, p);
      CHECK(cur <= prev + 1e-15);
      prev = cur;
    }
  }
}

TEST_CASE("closed-form distance bound") {
  SECTION("B = 0 is rejected") {
    const FunctionParams p = params_mMAB(1, 2, 1, 0);
    CHECK_THROWS_AS(closed_form_d_bound(1.0, 10, 2.0, 1.0, p), std::invalid_argument);
  }

  SECTION("alpha = 1/2 asymptote") {
    const FunctionParams p = params_mMAB(1, 1, 2, 1);
    const double C = 1.0;
    const double value = closed_form_d_bound(1.0, 1000000, C, 0.5, p);
    const double asymptote = 2.0 * p.A * C / (p.m * std::pow(1e6, 0.5));
    CHECK(std::abs(value - asymptote) / asymptote < 0.05);
  }

  SECTION("alpha = 1 with d0 = 0 and A = 0 vanishes") {
    const FunctionParams p = params_mMAB(1, 1, 0, 1);
    CHECK(closed_form_d_bound(0.0, 100, 2.0, 1.0, p) == Catch::Approx(0.0).margin(1e-300));
  }

  SECTION("looser than the recursion on a shared grid") {
    const FunctionParams p = params_mMAB(1, 1, 1, 1);
    const double C = 0.4, alpha = 0.75;
    const StepSchedule sched = StepSchedule::power(C, alpha);
    for (int ell : {1, 3, 10, 30, 100, 1000}) {
      const double exact = d_recursion_bound(1.0, ell, sched, p);
      const double closed = closed_form_d_bound(1.0, ell, C, alpha, p);
      CHECK(closed >= exact - 1e-12);
    }
  }

  SECTION("alpha out of range") {
    const FunctionParams p = params_mMAB(1, 1, 1, 1);
    CHECK_THROWS_AS(closed_form_d_bound(1.0, 10, 0.5, 1.5, p), std::invalid_argument);
  }
}

TEST_CASE("last-iterate bound") {
  const StepSchedule mu = StepSchedule::constant(0.1);

  SECTION("half M times the distance bound") {
    const FunctionParams p = params_mMAB(1, 2, 1, 0);
    CHECK(b_last_iterate(1.0, 2, mu, p) == Catch::Approx(0.658).margin(1e-12));
  }

  SECTION("zero everywhere") {
    const FunctionParams p = params_mMAB(1, 2, 0, 0);
    CHECK(b_last_iterate(0.0, 10, mu, p) == 0.0);
  }

  SECTION("K = 0") {
    const FunctionParams p = params_mMAB(1, 3, 1, 0);
    CHECK(b_last_iterate(0.4, 0, mu, p) == Catch::Approx(0.5 * 3 * 0.4));
  }
}

TEST_CASE("constant-step averaging bound") {
  SECTION("frozen example") {
    // gamma sums to 1 + 1/0.9 + 1/0.81 = 3.345679
    const FunctionParams p = params_mMAB(1, 1, 1, 0);
    CHECK(b_const_step_avg(1.0, 2, 0.1, p) == Catch::Approx(1.54447).margin(5e-6));
  }

  SECTION("zero everywhere") {
    const FunctionParams p = params_mMAB(1, 1, 0, 0);
    CHECK(b_const_step_avg(0.0, 5, 0.1, p) == 0.0);
  }

  SECTION("alpha collapses geometrically in K") {
    const FunctionParams p = params_mMAB(1, 1, 1, 0);
    const double a0 = const_step_avg_factors(0, 0.1, p).alpha;
    const double a6 = const_step_avg_factors(1000000, 0.1, p).alpha;
    CHECK(a6 < 1e-9 * a0);
    CHECK(const_step_avg_factors(1000000, 0.1, p).beta == Catch::Approx(0.05));
  }

  SECTION("inadmissible mu") {
    const FunctionParams p = params_mMAB(1, 1, 1, 0);
    CHECK_THROWS_AS(b_const_step_avg(1.0, 5, 1.5, p), std::invalid_argument);
  }
}

TEST_CASE("inverse-step averaging bound") {
  SECTION("plain plug-in") {
    const FunctionParams p = params_mMAB(1, 1, 0, 0);
    CHECK(b_nedic_lee(1.0, 1, p) == Catch::Approx(0.125));
  }

  SECTION("zero everywhere") {
    const FunctionParams p = params_mMAB(1, 1, 0, 0);
    CHECK(b_nedic_lee(0.0, 5, p) == 0.0);
  }

  SECTION("noise-only plug-in") {
    const FunctionParams p = params_mMAB(1, 1, 1, 0);
    CHECK(b_nedic_lee(0.0, 9, p) == Catch::Approx(5.0 / 56.0).margin(1e-12));
  }

  SECTION("gamma bounds length is checked") {
    const FunctionParams p = params_mMAB(1, 1, 1, 1);
    CHECK_THROWS_AS(b_nedic_lee(1.0, 5, p, Vec(4, 0.0)), std::invalid_argument);
  }

  SECTION("O(1/K) decay: b*K stays bounded") {
    const FunctionParams p = params_mMAB(1, 1, 1, 1.5);  // q(1) = 0.5 admissible
    double worst = 0.0;
    for (int K : {100, 1000, 10000}) worst = std::max(worst, b_nedic_lee(1.0, K, p) * K);
    CHECK(worst < 10.0);
  }
}

TEST_CASE("uniform averaging bound for quadratics") {
  SECTION("all zero") {
    const FunctionParams p = params_mMAB(1, 1, 0, 1);
    CHECK(b_quadratic_avg(0.0, 10, 0.5, 0.75, p) == 0.0);
  }

  SECTION("single surviving noise term with injected zero d-bounds") {
    const FunctionParams p = params_mMAB(1, 2, 1, 0);
    const double b = b_quadratic_avg(0.0, 100, 0.5, 0.75, p, Vec(101, 0.0));
    CHECK(b == Catch::Approx(0.01 * 0.5 * p.M).margin(1e-12));
  }

  SECTION("direct-summation oracle at the constant-step edge") {
    const FunctionParams p = params_mMAB(1, 1, 1, 1);
    const double C = 1.0, alpha = 0.5;
    const int K = 4;
    const StepSchedule sched = StepSchedule::power(C, alpha);
    // replicate the five-term combination with explicit loops
    Vec db(K + 1);
    db[0] = 1.0;
    for (int ell = 1; ell <= K; ++ell) {
      const double mu = sched.at(ell);
      db[ell] = (1 - 2 * p.m * mu + p.B * mu * mu) * db[ell - 1] + p.A * mu * mu;
    }
    double tel = 0.0;
    for (int k = 1; k <= K - 1; ++k)
      tel += std::abs(1.0 / sched.at(k + 1) - 1.0 / sched.at(k)) * std::sqrt(db[k]);
    double dsum = 0.0;
    for (int k = 1; k <= K; ++k) dsum += db[k - 1];
    const double root = tel / K + std::sqrt(db[0]) / (K * sched.at(1)) +
                        std::sqrt(db[K]) / (K * sched.at(K)) + std::sqrt(p.A / K) +
                        std::sqrt(2.0 * p.B * dsum / (K * static_cast<double>(K)));
    const double expect = 0.5 * p.M * root * root;
    CHECK(b_quadratic_avg(1.0, K, C, alpha, p) == Catch::Approx(expect).margin(1e-12));
  }

  SECTION("decays like 1/K on a log-log grid") {
    const FunctionParams p = params_mMAB(1, 1, 1, 1);
    const double b3 = b_quadratic_avg(1.0, 1000, 1.0, 0.5, p);
    const double b4 = b_quadratic_avg(1.0, 10000, 1.0, 0.5, p);
    const double b5 = b_quadratic_avg(1.0, 100000, 1.0, 0.5, p);
    const double slope1 = std::log(b3 / b4) / std::log(10.0);
    const double slope2 = std::log(b4 / b5) / std::log(10.0);
    CHECK(slope1 == Catch::Approx(1.0).margin(0.2));
    CHECK(slope2 == Catch::Approx(1.0).margin(0.2));
  }

  SECTION("alpha outside [1/2, 1]") {
    const FunctionParams p = params_mMAB(1, 1, 1, 1);
    CHECK_THROWS_AS(b_quadratic_avg(1.0, 10, 0.5, 0.3, p), std::invalid_argument);
  }
}

TEST_CASE("factorization") {
  SECTION("constant-step averaging factors") {
    const FunctionParams p = params_mMAB(1, 1, 1, 0);
    const Factorization f = factorize(BoundKind::ConstStepAvg, 2, StepSchedule::constant(0.1), p);
    CHECK(f.alpha == Catch::Approx(1.49447).margin(5e-6));
    CHECK(f.beta == Catch::Approx(0.05));
  }

  SECTION("last iterate with A = 0 has zero beta") {
    const FunctionParams p = params_mMAB(1, 2, 0, 0);
    const Factorization f = factorize(BoundKind::LastIterate, 7, StepSchedule::constant(0.1), p);
    CHECK(f.beta == 0.0);
    CHECK(f.alpha > 0.0);
  }

  SECTION("declared non-factoring kinds refuse") {
    const FunctionParams p = params_mMAB(1, 1, 1, 1.5);
    CHECK_THROWS_AS(factorize(BoundKind::NedicLeeAvg, 7, StepSchedule::inv_strong(1.0), p),
                    NonFactoringBound);
    CHECK_THROWS_AS(factorize(BoundKind::QuadraticAvg, 7, StepSchedule::power(0.5, 0.75), p),
                    NonFactoringBound);
  }

  SECTION("b(d0, K) equals alpha d0 + beta exactly") {
    const FunctionParams p = params_mMAB(1.2, 2.0, 0.7, 1.4);
    const StepSchedule mu = StepSchedule::constant(0.08);
    for (BoundKind kind : {BoundKind::LastIterate, BoundKind::ConstStepAvg}) {
      const GapBound b(kind, mu, p);
      for (int K : {1, 13, 200}) {
        const Factorization f = b.factorize(K);
        for (double d0 : {0.0, 1.0, 7.0}) CHECK(b(d0, K) == f.alpha * d0 + f.beta);
      }
    }
  }
}

TEST_CASE("every bound kind is nondecreasing in d0") {
  const FunctionParams p = params_mMAB(1, 1.5, 0.8, 1.2);
  const std::vector<GapBound> bounds = {
      GapBound(BoundKind::LastIterate, StepSchedule::constant(0.1), p),
      GapBound(BoundKind::ConstStepAvg, StepSchedule::constant(0.1), p),
      GapBound(BoundKind::NedicLeeAvg, StepSchedule::inv_strong(p.m), p),
      GapBound(BoundKind::QuadraticAvg, StepSchedule::power(0.5, 0.75), p),
      GapBound(BoundKind::ClosedFormD, StepSchedule::power(0.5, 0.75), p),
  };
  for (const GapBound& b : bounds) {
    for (int K : {5, 50}) {
      double prev = -1.0;
      for (double d0 : {0.0, 0.1, 0.5, 1.0, 2.0, 10.0}) {
        const double cur = b(d0, K);
        CHECK(cur >= prev);
        prev = cur;
      }
    }
  }
}
