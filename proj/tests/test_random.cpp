#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "support/stats.hpp"
#include "swlab/random.hpp"

using namespace swlab;

TEST_SUITE("random") {
  TEST_CASE("same key gives the same stream") {
    Stream a = derive_stream(42, 7);
    Stream b = derive_stream(42, 7);
    for (int i = 0; i < 1000; ++i) REQUIRE(a() == b());
  }

  TEST_CASE("replica ids beyond 2^32 do not collide with small ids") {
    // The first two state words are a bijective image of (seed, replica), so
    // distinct keys give distinct states.
    const std::uint64_t big = (std::uint64_t{1} << 32);
    for (std::uint64_t r = 0; r < 64; ++r) {
      const auto s1 = derive_stream(9, r).state();
      const auto s2 = derive_stream(9, r + big).state();
      CHECK(s1 != s2);
    }
    CHECK(derive_stream(9, big).state() != derive_stream(10, 0).state());
  }

  TEST_CASE("adjacent replica streams are uncorrelated") {
    Stream a = derive_stream(2024, 0);
    Stream b = derive_stream(2024, 1);
    constexpr int N = 1'000'000;
    constexpr int K = 10;
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    std::array<std::int64_t, K * K> joint{};
    for (int i = 0; i < N; ++i) {
      const double x = a.uniform();
      const double y = b.uniform();
      sx += x;
      sy += y;
      sxy += x * y;
      sxx += x * x;
      syy += y * y;
      ++joint[static_cast<std::size_t>(static_cast<int>(x * K) * K + static_cast<int>(y * K))];
    }
    const double cov = sxy / N - (sx / N) * (sy / N);
    const double r = cov / std::sqrt((sxx / N - (sx / N) * (sx / N)) * (syy / N - (sy / N) * (sy / N)));
    CHECK(std::fabs(r) * std::sqrt(static_cast<double>(N)) < 2.5758);  // two-sided 0.01
    double stat = 0.0;
    const double e = static_cast<double>(N) / (K * K);
    for (const auto c : joint) stat += (static_cast<double>(c) - e) * (static_cast<double>(c) - e) / e;
    CHECK(swlab_test::chi2_sf(stat, K * K - 1) > swlab_test::kAlpha);
  }

  TEST_CASE("below is unbiased") {
    Stream rng = derive_stream(1, 1);
    std::map<std::uint64_t, std::int64_t> obs;
    std::map<std::uint64_t, double> exp;
    for (int i = 0; i < 70000; ++i) ++obs[rng.below(7)];
    for (std::uint64_t k = 0; k < 7; ++k) exp[k] = 1.0 / 7;
    CHECK(swlab_test::chi_square_gof(obs, exp) > swlab_test::kAlpha);
  }

  TEST_CASE("binomial matches its pmf in both sampling regimes") {
    const std::vector<std::pair<std::int64_t, double>> cases{
        {10, 0.3}, {50, 0.02}, {200, 0.5}, {1000, 0.9}, {100000, 0.3}, {7, 1.0}, {7, 0.0}};
    for (const auto& [n, p] : cases) {
      CAPTURE(n);
      CAPTURE(p);
      Stream rng = derive_stream(5, static_cast<std::uint64_t>(n));
      std::map<std::int64_t, std::int64_t> obs;
      for (int i = 0; i < 50000; ++i) ++obs[binomial(rng, n, p)];
      std::map<std::int64_t, double> exp;
      for (std::int64_t k = 0; k <= n; ++k) {
        const double v = swlab_test::binom_pmf(k, n, p);
        if (v > 0) exp[k] = v;
      }
      CHECK(swlab_test::chi_square_gof(obs, exp) > swlab_test::kAlpha);
    }
  }

  TEST_CASE("binomial log pmf agrees with an independent formula") {
    for (std::int64_t k : {0, 3, 17, 40}) {
      CHECK(std::exp(binomial_log_pmf(k, 40, 0.37)) ==
            doctest::Approx(swlab_test::binom_pmf(k, 40, 0.37)).epsilon(1e-12));
    }
    CHECK(std::isinf(binomial_log_pmf(-1, 10, 0.5)));
    CHECK(std::isinf(binomial_log_pmf(11, 10, 0.5)));
  }

  TEST_CASE("hypergeometric matches its pmf") {
    struct Case {
      std::int64_t draws, marked, total;
    };
    for (const Case c : {Case{5, 7, 20}, Case{40, 300, 1000}, Case{900, 500, 1000}, Case{3, 0, 10},
                         Case{2000, 30000, 100000}}) {
      CAPTURE(c.draws);
      CAPTURE(c.total);
      Stream rng = derive_stream(6, static_cast<std::uint64_t>(c.draws));
      std::map<std::int64_t, std::int64_t> obs;
      for (int i = 0; i < 50000; ++i) ++obs[hypergeometric(rng, c.draws, c.marked, c.total)];
      std::map<std::int64_t, double> exp;
      for (std::int64_t k = 0; k <= c.draws; ++k) {
        const double v = swlab_test::hypergeom_pmf(k, c.draws, c.marked, c.total);
        if (v > 0) exp[k] = v;
      }
      CHECK(swlab_test::chi_square_gof(obs, exp) > swlab_test::kAlpha);
      CHECK(std::exp(hypergeometric_log_pmf(c.draws / 2, c.draws, c.marked, c.total)) ==
            doctest::Approx(swlab_test::hypergeom_pmf(c.draws / 2, c.draws, c.marked, c.total)).epsilon(1e-9));
    }
  }

  TEST_CASE("multinomial_uniform sums and marginals") {
    Stream rng = derive_stream(8, 0);
    std::vector<std::int64_t> out(3);
    std::map<std::int64_t, std::int64_t> first;
    for (int i = 0; i < 40000; ++i) {
      multinomial_uniform(rng, 30, out);
      REQUIRE(out[0] + out[1] + out[2] == 30);
      ++first[out[0]];
    }
    std::map<std::int64_t, double> exp;
    for (std::int64_t k = 0; k <= 30; ++k) exp[k] = swlab_test::binom_pmf(k, 30, 1.0 / 3);
    CHECK(swlab_test::chi_square_gof(first, exp) > swlab_test::kAlpha);
  }

  TEST_CASE("multivariate hypergeometric sums and marginals") {
    Stream rng = derive_stream(8, 1);
    const std::vector<std::int64_t> urn{5, 12, 3};
    std::vector<std::int64_t> out(3);
    std::map<std::int64_t, std::int64_t> second;
    for (int i = 0; i < 40000; ++i) {
      multivariate_hypergeometric(rng, 8, urn, out);
      REQUIRE(out[0] + out[1] + out[2] == 8);
      for (std::size_t j = 0; j < 3; ++j) REQUIRE(out[j] <= urn[j]);
      ++second[out[1]];
    }
    std::map<std::int64_t, double> exp;
    for (std::int64_t k = 0; k <= 8; ++k) {
      const double v = swlab_test::hypergeom_pmf(k, 8, 12, 20);
      if (v > 0) exp[k] = v;
    }
    CHECK(swlab_test::chi_square_gof(second, exp) > swlab_test::kAlpha);
  }
}
