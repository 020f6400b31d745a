#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "support/stats.hpp"
#include "swlab/errors.hpp"
#include "swlab/exact.hpp"

using namespace swlab;

TEST_SUITE("exact") {
  TEST_CASE("two-vertex kernel by hand") {
    const double beta = 2.0;
    const double p = -std::expm1(-beta / 2);
    const ExactChain c = build_exact_chain(2, 2, beta);
    REQUIRE(c.states == 4);
    // From 00 the single edge is open with probability p.
    CHECK(c.P(0, 0) == doctest::Approx(p / 2 + (1 - p) / 4).epsilon(1e-14));
    CHECK(c.P(0, 3) == doctest::Approx(p / 2 + (1 - p) / 4).epsilon(1e-14));
    CHECK(c.P(0, 1) == doctest::Approx((1 - p) / 4).epsilon(1e-14));
    // From 01 there are no monochromatic edges.
    for (std::size_t to = 0; to < 4; ++to) CHECK(c.P(1, to) == doctest::Approx(0.25));
  }

  TEST_CASE("stationary weight of a monochromatic pair") {
    const auto mu = exact_stationary(2, 2, 2.0);
    const double e = std::exp(1.0);
    CHECK(mu[0] == doctest::Approx(e / (2 * e + 2)).epsilon(1e-14));
    CHECK(mu[1] == doctest::Approx(1 / (2 * e + 2)).epsilon(1e-14));
  }

  TEST_CASE("oracle instances are stochastic, stationary and reversible") {
    struct Case {
      int n, q;
      double beta;
    };
    for (const Case c : {Case{4, 2, 2.0}, Case{5, 2, 3.0}, Case{4, 3, 2.0}, Case{3, 3, 7.0}}) {
      CAPTURE(c.n);
      CAPTURE(c.q);
      const OracleReport r = check_exact_chain(build_exact_chain(c.n, c.q, c.beta));
      CHECK(r.max_row_error <= 1e-12);
      CHECK(r.stationarity_l1 <= 1e-10);
      CHECK(r.detailed_balance <= 1e-10);
      CHECK(r.stationary_mass_error <= 1e-12);
    }
  }

  TEST_CASE("sorted-count stationary law from multinomial weights") {
    for (const auto& [n, q, beta] : std::vector<std::tuple<int, int, double>>{{5, 3, 3.0}, {6, 2, 4.0}}) {
      const auto direct = stationary_sorted_counts(n, q, beta);
      const auto mu = exact_stationary(n, q, beta);
      const auto projected = project_sorted_counts(mu, n, q);
      CHECK(swlab_test::tv_distance(direct, projected) < 1e-12);
    }
  }

  TEST_CASE("evolving any start converges to the stationary law") {
    const ExactChain c = build_exact_chain(4, 3, 2.0);
    std::vector<double> dist(c.states, 0.0);
    dist[0] = 1.0;
    dist = evolve_distribution(c, dist, 200);
    double l1 = 0.0;
    for (std::size_t i = 0; i < c.states; ++i) l1 += std::fabs(dist[i] - c.stationary[i]);
    CHECK(l1 < 1e-9);
    CHECK_THROWS_AS(evolve_distribution(c, std::vector<double>(3, 0.0), 1), precondition_error);
  }

  TEST_CASE("configuration digits") {
    CHECK(config_counts(0, 4, 3) == std::vector<std::int64_t>{4, 0, 0});
    CHECK(config_counts(1 + 2 * 3 + 2 * 9, 4, 3) == std::vector<std::int64_t>{1, 1, 2});
  }

  TEST_CASE("size guards") {
    CHECK_THROWS_AS(exact_transition_matrix(7, 2, 1.0), size_guard_error);
    CHECK_THROWS_AS(exact_transition_matrix(3, 4, 1.0), size_guard_error);
    CHECK_THROWS_AS(exact_stationary(21, 2, 1.0), size_guard_error);
    CHECK_NOTHROW(exact_stationary(12, 3, 1.0));
    CHECK_THROWS_AS(stationary_sorted_counts(100000, 3, 5.0), size_guard_error);
  }
}
