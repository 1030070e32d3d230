#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "sibdep/error.hpp"
#include "sibdep/stats.hpp"

using namespace sibdep;

TEST_CASE("mean and standard error") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const auto e = mean_stderr(xs);
  CHECK(e.value == doctest::Approx(2.5));
  CHECK(e.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  const std::vector<double> same(7, 0.1);
  const auto c = mean_stderr(same);
  CHECK(c.value == 0.1);
  CHECK(c.std_error == 0.0);
  CHECK_THROWS_AS(mean_stderr(std::vector<double>{}), ArgumentError);
}

TEST_CASE("log-sum-exp is stable") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(log_mean_exp(big) == doctest::Approx(1000.0));
  const std::vector<double> small{-1000.0, -1001.0};
  CHECK(log_sum_exp(small) == doctest::Approx(-1000.0 + std::log1p(std::exp(-1.0))));
  const std::vector<double> plain{0.0, std::log(3.0)};
  CHECK(log_sum_exp(plain) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("least squares line") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(1.5 - 0.25 * v);
  const auto fit = linear_fit(x, y);
  CHECK(fit.slope == doctest::Approx(-0.25));
  CHECK(fit.intercept == doctest::Approx(1.5));
  CHECK(fit.slope_stderr == doctest::Approx(0.0));
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(linear_fit(one, one), ArgumentError);
  const std::vector<double> flat{2.0, 2.0};
  CHECK_THROWS_AS(linear_fit(flat, flat), ArgumentError);
}

TEST_CASE("median and distribution distances") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), ArgumentError);

  CHECK(ks_distance({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  CHECK(ks_distance({0.0, 0.1}, {5.0, 6.0}) == 1.0);
  CHECK(ks_distance({1.0, 2.0}, {2.0, 3.0}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(ks_distance({}, {1.0}), ArgumentError);

  const std::vector<double> p{0.5, 0.5}, q{0.5, 0.25, 0.25};
  CHECK(total_variation(p, q) == doctest::Approx(0.25));
  CHECK(total_variation(q, p) == doctest::Approx(0.25));
  CHECK(total_variation(p, p) == 0.0);
}
