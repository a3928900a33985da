#include <catch2/catch_amalgamated.hpp>

#include "driftk/concentration.hpp"

using namespace driftk;

TEST_CASE("averaged norm bound") {
  CHECK(avg_norm_bound(1.0, 3, 25) == Catch::Approx(0.6));
  CHECK(avg_norm_bound(0.0, 4, 7) == 0.0);
  CHECK(avg_norm_bound(2.5, 4, 1) == Catch::Approx(10.0));
  CHECK_THROWS_AS(avg_norm_bound(-1.0, 2, 2), std::invalid_argument);
}

TEST_CASE("norm tail") {
  CHECK(norm_tail(1.0, 2.0) == Catch::Approx(0.27067).margin(1e-5));
  CHECK(norm_tail(3.0, 0.0) == 2.0);
  CHECK(norm_tail(1.5, 1.5 * std::sqrt(2.0 * std::log(2.0))) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("mgf parameter from a tail constant") {
  CHECK(mgf_sigma_from_tail(1.0) == Catch::Approx(9.0));
  CHECK(mgf_sigma_from_tail(9.0) == Catch::Approx(1.0));
  CHECK(mgf_sigma_from_tail(1e12) == Catch::Approx(0.0).margin(1e-11));
  CHECK_THROWS_AS(mgf_sigma_from_tail(0.0), std::invalid_argument);
}

TEST_CASE("conditional Hoeffding parameter") {
  CHECK(hoeffding_sigma(0.0, 1.0) == Catch::Approx(0.25));
  CHECK(hoeffding_sigma(-1.0, 1.0) == Catch::Approx(1.0));
  CHECK(hoeffding_sigma(0.7, 0.7) == 0.0);
  CHECK_THROWS_AS(hoeffding_sigma(1.0, 0.5), std::invalid_argument);
}

TEST_CASE("martingale sum tail") {
  const Vec sigma2(100, 1.0);
  const Vec a(100, 0.01);
  CHECK(martingale_sum_tail(sigma2, a, 0.3) == Catch::Approx(std::exp(-4.5)).margin(1e-9));
  CHECK(martingale_sum_tail(sigma2, a, 0.0) == 1.0);

  // doubling every a_i and t leaves the bound unchanged
  Vec a2 = a;
  for (auto& v : a2) v *= 2.0;
  CHECK(martingale_sum_tail(sigma2, a, 0.3) ==
        Catch::Approx(martingale_sum_tail(sigma2, a2, 0.6)).margin(1e-15));

  CHECK_THROWS_AS(martingale_sum_tail(Vec{1.0}, Vec{1.0, 1.0}, 0.1), std::invalid_argument);
}

TEST_CASE("cover construction") {
  SECTION("interleaved groups") {
    const auto g = cover(5, 2);
    REQUIRE(g.size() == 2);
    CHECK(g[0] == std::vector<int>{1, 3, 5});
    CHECK(g[1] == std::vector<int>{2, 4});
  }

  SECTION("W = 1 gives a single block, W = n gives singletons") {
    const auto whole = cover(6, 1);
    REQUIRE(whole.size() == 1);
    CHECK(whole[0] == std::vector<int>{1, 2, 3, 4, 5, 6});
    const auto singles = cover(4, 4);
    REQUIRE(singles.size() == 4);
    for (int j = 0; j < 4; ++j) CHECK(singles[j] == std::vector<int>{j + 1});
  }

  SECTION("exact partition of {1..n} for all n <= 50") {
    for (int n = 1; n <= 50; ++n) {
      for (int W = 1; W <= n; ++W) {
        std::vector<int> seen(n + 1, 0);
        for (const auto& group : cover(n, W))
          for (int i : group) {
            REQUIRE(i >= 1);
            REQUIRE(i <= n);
            ++seen[i];
          }
        for (int i = 1; i <= n; ++i) CHECK(seen[i] == 1);
      }
    }
  }

  SECTION("bad arguments") {
    CHECK_THROWS_AS(cover(5, 0), std::invalid_argument);
    CHECK_THROWS_AS(cover(5, 6), std::invalid_argument);
  }
}

TEST_CASE("dependent Hoeffding tail") {
  std::vector<std::pair<double, double>> unit(100, {0.0, 1.0});
  CHECK(dependent_hoeffding_tail(unit, 2, 20.0) == Catch::Approx(std::exp(-4.0)).margin(1e-9));
  CHECK(dependent_hoeffding_tail(unit, 1, 20.0) ==
        Catch::Approx(std::exp(-2.0 * 400.0 / 100.0)).margin(1e-12));
  CHECK(dependent_hoeffding_tail(unit, 3, 0.0) == 1.0);
  CHECK_THROWS_AS(dependent_hoeffding_tail({{1.0, 0.0}}, 1, 0.5), std::invalid_argument);
}

TEST_CASE("quick Monte Carlo sanity for the dependent tail, W = 1") {
  // light version; the acceptance suite runs the full protocol
  Rng rng(314);
  const int n = 50, trials = 20000;
  const double t = 8.0;
  int exceed = 0;
  for (int trial = 0; trial < trials; ++trial) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += rng.uniform() - 0.5;
    if (s > t * 0.5) ++exceed;  // V_i in [-1/2, 1/2], sum vs t/2 scaled ranges
  }
  std::vector<std::pair<double, double>> ranges(n, {-0.5, 0.5});
  const double bound = dependent_hoeffding_tail(ranges, 1, 0.5 * t);
  const double freq = static_cast<double>(exceed) / trials;
  const double se = std::sqrt(std::max(bound, 1e-6) * (1.0 - std::min(bound, 1.0)) / trials);
  CHECK(freq <= bound + 3.0 * se);
}
