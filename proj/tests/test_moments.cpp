#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "sibdep/moments.hpp"

using namespace sibdep;

TEST_CASE("ENV-A moment matrices") {
  const Environment a = fixtures::env_a();
  const Eigen::MatrixXd m = mean_matrix(a);
  Eigen::Matrix2d expected;
  expected << 0.3, 1.0, 0.45, 0.5;
  CHECK((m - expected).cwiseAbs().maxCoeff() < 1e-14);

  const auto b = hessians(a);
  REQUIRE(b.size() == 2);
  CHECK(b[0](1, 1) == doctest::Approx(1.0));
  CHECK(b[1](1, 1) == doctest::Approx(0.5));
  CHECK(b[0](0, 0) == 0.0);
  CHECK(b[0](0, 1) == 0.0);

  const MacroMoments macro = macro_moments(a);
  Eigen::Matrix2d macro_mean;
  macro_mean << 0.3, 0.5, 0.9, 0.5;
  CHECK((macro.mean - macro_mean).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::Matrix2d b2;
  b2 << 0.4, 0.2, 0.2, 0.2;
  CHECK((macro.hessians[1] - b2).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(macro.hessians[0].isZero());

  const Curvature c = curvature_stats(a);
  CHECK(c.total == doctest::Approx(1.5));
  CHECK(c.ratio == doctest::Approx(1.5 / (2.25 * 2.25)));
  CHECK(c.ratio == doctest::Approx(0.296296).epsilon(1e-5));

  CHECK(delta_max(a) == doctest::Approx(0.49));
  CHECK(eta_variance(a, 1, 2) == doctest::Approx(0.25));
}

TEST_CASE("ENV-A Perron data") {
  const MomentSet ms = compute_moments(fixtures::env_a());
  CHECK(ms.perron.root == doctest::Approx(1.078233).epsilon(1e-6));
  CHECK(std::log(ms.perron.root) == doctest::Approx(0.0753236).epsilon(1e-5));
  CHECK(ms.perron.vector(0) == doctest::Approx(0.562356).epsilon(1e-5));
  CHECK(ms.perron.vector.sum() == doctest::Approx(1.0));
  CHECK(ms.macro_vector(0) == doctest::Approx(0.39117).epsilon(1e-4));
  CHECK(ms.macro_vector(1) == doctest::Approx(0.60883).epsilon(1e-4));
  CHECK(ms.perron.residual <= 1e-12);
  CHECK(ms.macro_residual <= 1e-10);
  CHECK(ms.perron.primitive);
  const double exact = (0.8 + std::sqrt(0.04 + 1.8)) / 2.0;
  CHECK(std::abs(ms.perron.root - exact) < 1e-12);

  const auto j = to_json(ms);
  CHECK(j["M"][0][1].get<double>() == doctest::Approx(1.0));
  CHECK(j["perron"]["rho"].get<double>() == doctest::Approx(exact));
}

TEST_CASE("ENV-B Perron root") {
  const auto pr = perron(mean_matrix(fixtures::env_b()));
  CHECK(std::log(pr.root) == doctest::Approx(-0.4146747).epsilon(1e-6));
}

TEST_CASE("Perron root against the characteristic polynomial") {
  std::mt19937_64 gen(2024);
  for (int rep = 0; rep < 60; ++rep) {
    const int order = 2 + rep % 3;
    const Environment env = fixtures::random_environment(gen, order, rep % 3 != 0);
    const Eigen::MatrixXd m = mean_matrix(env);
    if (oracles::perron_root_charpoly(m) < 1e-12) {
      CHECK_THROWS_AS(perron(m), DegenerateError);
      continue;
    }
    const auto pr = perron(m);
    CHECK(std::abs(pr.root - oracles::perron_root_charpoly(m)) < 1e-9);
    CHECK((pr.vector.array() >= 0).all());
  }
}

TEST_CASE("Perron on reducible and periodic matrices") {
  Eigen::Matrix2d swap;
  swap << 0, 1, 1, 0;
  const auto periodic = perron(swap);
  CHECK_FALSE(periodic.primitive);
  CHECK(periodic.root == doctest::Approx(1.0));
  CHECK(periodic.vector(0) == doctest::Approx(0.5));

  Eigen::Matrix2d triangular;
  triangular << 2, 1, 0, 0.5;
  const auto tri = perron(triangular);
  CHECK_FALSE(tri.primitive);
  CHECK(tri.root == doctest::Approx(2.0));

  Eigen::Matrix2d jordan;
  jordan << 2, 1, 0, 2;
  const auto jb = perron(jordan, 1e-12, 2000);
  CHECK(jb.root == doctest::Approx(2.0));
  CHECK(jb.vector(0) == doctest::Approx(1.0));

  Eigen::Matrix2d strict;
  strict << 0, 3, 0, 0;
  CHECK_THROWS_AS(perron(strict), DegenerateError);

  Eigen::Matrix2d negative;
  negative << 1, -1, 0, 1;
  CHECK_THROWS_AS(perron(negative), ArgumentError);
  CHECK_THROWS_AS(perron(Eigen::Matrix2d::Zero().eval()), DegenerateError);
  Eigen::Matrix2d positive;
  positive << 1, 2, 3, 4;
  CHECK_THROWS_AS(perron(positive, 1e-300, 3), NumericError);
  try {
    perron(positive, 1e-300, 3);
  } catch (const NumericError& e) {
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("Perron is generic over the scalar type") {
  Eigen::Matrix<long double, 2, 2> m;
  m << 0.3L, 1.0L, 0.45L, 0.5L;
  const auto pr = perron(m, 1e-15L);
  const long double exact = (0.8L + std::sqrt(0.04L + 1.8L)) / 2.0L;
  CHECK(std::abs(static_cast<double>(pr.root - exact)) < 1e-14);
}

TEST_CASE("macro and micro moments are related entrywise") {
  std::mt19937_64 gen(99);
  for (int rep = 0; rep < 50; ++rep) {
    const int order = 2 + rep % 4;
    const Environment env = fixtures::random_environment(gen, order, rep % 2 == 1);
    const Eigen::MatrixXd m = mean_matrix(env);
    const MacroMoments macro = macro_moments(env);
    for (int i = 1; i <= order; ++i)
      for (int j = 1; j <= order; ++j) {
        CHECK(std::abs(j * macro.mean(i - 1, j - 1) - i * m(i - 1, j - 1)) <= 1e-12);
        for (int k = 1; k <= order; ++k) {
          const double pair = i >= 2 ? env.pair_marginal(i, j, k) : 0.0;
          CHECK(std::abs(macro.hessians[static_cast<std::size_t>(i - 1)](j - 1, k - 1) -
                         i * (i - 1) * pair) <= 1e-12);
        }
      }
  }
}

TEST_CASE("curvature of a sterile environment is degenerate") {
  const Environment sterile({SiblingLaw(1, 1, {{{0}, 1.0}})});
  CHECK_THROWS_AS(curvature_stats(sterile), DegenerateError);
}

TEST_CASE("ensemble mean matrix") {
  const auto mix = EnvironmentEnsemble::mixture(fixtures::env_a(), fixtures::env_b(), 0.5);
  const Eigen::MatrixXd e = ensemble_mean_matrix(mix);
  CHECK(e(0, 1) == doctest::Approx(0.7));
  CHECK(perron(e).root == doctest::Approx(0.8732112).epsilon(1e-6));
}
