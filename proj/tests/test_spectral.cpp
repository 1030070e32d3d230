#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "sibdep/moments.hpp"
#include "sibdep/spectral.hpp"

using namespace sibdep;
using fixtures::env_a;
using fixtures::env_b;

namespace {

Eigen::MatrixXd direct_product(const std::vector<Eigen::MatrixXd>& factors) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(factors.front().rows(), factors.front().rows());
  for (const auto& f : factors) p = p * f;
  return p;
}

}  // namespace

TEST_CASE("renormalized products reconstruct the direct product") {
  std::mt19937_64 gen(8);
  for (int rep = 0; rep < 40; ++rep) {
    const int order = 2 + rep % 2;
    const std::size_t length = 1 + static_cast<std::size_t>(rep % 15);
    std::vector<Eigen::MatrixXd> factors;
    for (std::size_t k = 0; k < length; ++k)
      factors.push_back(mean_matrix(fixtures::random_environment(gen, order)));
    ProductAccumulator<double> acc(order);
    for (const auto& f : factors) {
      acc.push(f);
      CHECK(std::abs(l1_norm(acc.current()) - 1.0) <= 1e-12);
    }
    const Eigen::MatrixXd direct = direct_product(factors);
    const double scale = direct.cwiseAbs().maxCoeff();
    CHECK((acc.reconstruct() - direct).cwiseAbs().maxCoeff() / scale <= 1e-10);
    CHECK(acc.factors() == length);
  }
}

TEST_CASE("product log-norms") {
  const std::vector<Eigen::MatrixXd> ids(5, Eigen::MatrixXd::Identity(3, 3));
  CHECK(product_lognorm(ids).log_norm == doctest::Approx(std::log(3.0)));

  const std::vector<Environment> three(3, env_a());
  const Eigen::MatrixXd m = mean_matrix(env_a());
  CHECK(std::abs(product_lognorm(three, false).log_norm - std::log(l1_norm(Eigen::MatrixXd(m * m * m)))) <= 1e-12);

  const std::vector<Eigen::MatrixXd> with_zero{m, Eigen::MatrixXd::Zero(2, 2)};
  CHECK_THROWS_AS(product_lognorm(with_zero), DegenerateError);
  CHECK_THROWS_AS(product_lognorm(std::span<const Eigen::MatrixXd>{}), ArgumentError);
}

TEST_CASE("macro products are micro products rescaled by i/j") {
  RngStream rng(4, 0);
  const auto mix = EnvironmentEnsemble::mixture(env_a(), env_b(), 0.5);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t length = 1 + rng.below(20);
    std::vector<Environment> envs;
    for (std::size_t k = 0; k < length; ++k) envs.push_back(sample_environment(mix, rng));
    const auto micro = product_lognorm(envs, false).accumulator.reconstruct();
    const auto macro = product_lognorm(envs, true).accumulator.reconstruct();
    for (int i = 1; i <= 2; ++i)
      for (int j = 1; j <= 2; ++j) {
        const double lhs = macro(i - 1, j - 1) * j, rhs = i * micro(i - 1, j - 1);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(rhs));
      }
  }
}

TEST_CASE("Lyapunov exponent of a single environment") {
  const auto est = estimate_lyapunov(fixtures::single(env_a()), 1000, 1000, 1);
  CHECK(est.std_error == 0.0);
  // Deterministic bias of (1/n) log |M^(n+1)| relative to log rho is O(1/n).
  CHECK(std::abs(est.value - std::log(perron(mean_matrix(env_a())).root)) <= 5e-3);
}

TEST_CASE("constant row sums make log |R| a sum of logs") {
  const auto mix = EnvironmentEnsemble::mixture(fixtures::row_sum_env(2.0),
                                                fixtures::row_sum_env(0.5), 0.5);
  const std::size_t n = 400;
  const auto norms = sample_log_norms(mix, n, 50, 9);
  for (std::size_t r = 0; r < 50; ++r) {
    RngStream stream(9, r);
    double s = std::log(2.0);
    for (std::size_t m = 0; m <= n; ++m)
      s += std::log(sample_environment_index(mix, stream) == 0 ? 2.0 : 0.5);
    CHECK(std::abs(norms[r] - s) <= 1e-9);
  }
  const auto est = estimate_lyapunov(mix, 2000, 400, 3);
  CHECK(std::abs(est.value) <= 3.0 * est.std_error + std::log(2.0) / 2000.0 * 2);
}

TEST_CASE("macro and micro Lyapunov estimates agree") {
  const auto mix = EnvironmentEnsemble::mixture(env_a(), env_b(), 0.5);
  const auto micro = estimate_lyapunov(mix, 500, 300, 2, false);
  const auto macro = estimate_lyapunov(mix, 500, 300, 2, true);
  CHECK(std::abs(micro.value - macro.value) <=
        3.0 * std::hypot(micro.std_error, macro.std_error) + 2.0 * std::log(2.0) / 500.0);
}

TEST_CASE("lambda(1) matches the independence identity") {
  const auto mix = EnvironmentEnsemble::mixture(env_a(), env_b(), 0.5);
  const std::size_t n = 30, replicas = 4000;
  const auto norms = sample_log_norms(mix, n, replicas, 5);
  std::vector<double> values;
  for (double l : norms) values.push_back(std::exp(l));
  const Estimate mean = mean_stderr(values);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd e = ensemble_mean_matrix(mix);
  for (std::size_t k = 0; k <= n; ++k) power = power * e;
  CHECK(std::abs(mean.value - l1_norm(power)) <= 3.0 * mean.std_error);

  const auto lam = estimate_lambda_theta(mix, 1.0, n, replicas, 5);
  CHECK(lam.lambda == doctest::Approx(std::exp(std::log(mean.value) / n)).epsilon(1e-12));
  CHECK_THROWS_AS(estimate_lambda_theta(mix, 1.0, n, 1, 5), ArgumentError);
  CHECK_THROWS_AS(estimate_lambda_theta(mix, 0.0, n, 10, 5), ArgumentError);
}

TEST_CASE("lambda(theta) of a single environment") {
  const double rho = perron(mean_matrix(env_a())).root;
  for (double theta : {0.5, 1.0, 2.0}) {
    const auto lam = estimate_lambda_theta(fixtures::single(env_a()), theta, 400, 10, 1);
    CHECK(std::abs(std::pow(lam.lambda, 1.0 / theta) - rho) <= 0.02 * rho);
  }
}

TEST_CASE("log lambda(theta) / theta tends to Lambda as theta -> 0") {
  const auto mix = EnvironmentEnsemble::mixture(env_a(), env_b(), 0.5);
  const auto norms = sample_log_norms(mix, 200, 2000, 6);
  const auto lyap = estimate_lyapunov(mix, 200, 2000, 6);
  const auto small = lambda_from_log_norms(norms, 1e-3, 200);
  CHECK(std::abs(small.log_lambda / 1e-3 - lyap.value) <= 3.0 * lyap.std_error + 1e-3);
}

TEST_CASE("Lambda'(1) in deterministic environments") {
  const auto b = lambda_prime_at_one(fixtures::single(env_b()), 0.1, 1000, 10, 1);
  CHECK(b.value == doctest::Approx(-0.4146747).epsilon(0.01));
  const auto a = lambda_prime_at_one(fixtures::single(env_a()), 0.1, 1000, 10, 1);
  CHECK(a.value > 0.0);
  CHECK(a.value == doctest::Approx(0.0753236).epsilon(0.1));
  CHECK_THROWS_AS(lambda_prime_at_one(fixtures::single(env_a()), 0.6, 10, 10, 1), ArgumentError);
}

TEST_CASE("Lambda'(1) is stable under h refinement") {
  const auto mix = EnvironmentEnsemble::mixture(env_a(), env_b(), 0.5);
  const auto coarse = lambda_prime_at_one(mix, 0.2, 100, 4000, 3);
  const auto fine = lambda_prime_at_one(mix, 0.1, 100, 4000, 3);
  CHECK(std::abs(coarse.value - fine.value) <=
        3.0 * std::hypot(coarse.std_error, fine.std_error));
  CHECK(fine.std_error > 0.0);
}

TEST_CASE("condition report on ENV-A") {
  ConditionParams p;
  p.horizon = 200;
  p.replicas = 20;
  const auto report = check_conditions(fixtures::single(env_a()), p);
  CHECK(report.at("H5").witness.at("min_row_sum") == doctest::Approx(0.95));
  CHECK(report.at("H5").verdict == Verdict::fails);
  CHECK(report.at("ExponFinite").witness.at("value") == doctest::Approx(1.0 / 0.95));
  CHECK(report.at("A2").verdict == Verdict::holds);
  CHECK(report.at("A2").witness.at("max_p0_plus_p1") == doctest::Approx(0.75));
  CHECK(report.at("H2").verdict == Verdict::holds);
  CHECK(report.at("H3").witness.at("gamma") == doctest::Approx(1.0 / 0.3));
  CHECK(report.at("H4").verdict == Verdict::fails);
  CHECK(report.at("A1").verdict == Verdict::holds);
  CHECK(report.at("LambdaPrime1").verdict == Verdict::fails);
  CHECK_THROWS_AS(report.at("H9"), IndexError);
  for (const auto& e : report.entries) CHECK_FALSE(e.witness.empty());
  const auto j = to_json(report);
  CHECK(j["H5"]["verdict"] == "fails");
}

TEST_CASE("condition report on the critical pair") {
  ConditionParams p;
  p.horizon = 400;
  p.replicas = 200;
  const double w = std::log(1 / 0.4) / (std::log(1.8) + std::log(1 / 0.4));
  const auto ens = EnvironmentEnsemble::mixture(fixtures::env_hi(), fixtures::env_lo(), w);
  const auto report = check_conditions(ens, p);
  CHECK(report.at("A1").verdict == Verdict::holds);
  CHECK(report.at("A1").witness.at("residual") <= 1e-10);
  CHECK(report.at("A2").verdict == Verdict::holds);
  CHECK(report.at("A3").verdict == Verdict::holds);
  CHECK(std::abs(report.at("A3").witness.at("mean_log_rho")) <= 1e-12);
  CHECK(report.at("H4").verdict == Verdict::holds);
  CHECK(report.at("H5").witness.at("min_row_sum") == doctest::Approx(1.8));
  CHECK(report.at("H5").verdict == Verdict::holds);
  CHECK(report.at("ExponFinite").witness.at("value") ==
        doctest::Approx(w / 1.8 + (1 - w) / 0.4));
}

TEST_CASE("vertex reduction agrees with a grid search over the simplex") {
  std::mt19937_64 gen(31);
  for (int rep = 0; rep < 20; ++rep) {
    const int order = 2 + rep % 2;
    const std::size_t members = 1 + static_cast<std::size_t>(rep % 3);
    std::vector<Environment> envs;
    std::vector<double> weights;
    for (std::size_t m = 0; m < members; ++m) {
      envs.push_back(fixtures::random_environment(gen, order));
      weights.push_back(1.0 / static_cast<double>(members));
    }
    const EnvironmentEnsemble ens(envs, weights);
    std::vector<Eigen::MatrixXd> mats;
    for (const auto& e : envs) mats.push_back(mean_matrix(e));
    const auto grid = oracles::grid_search(mats, ens.weights(), order == 2 ? 999 : 44);
    const auto reduced = row_sum_reduction(ens);
    CHECK(std::abs(grid.best_min_norm - reduced.best_min_row_sum) <= 1e-6);
    CHECK(std::abs(grid.sup_inverse - reduced.inverse_moment) <= 1e-6);
  }
}

TEST_CASE("critical calibration") {
  const double exact = std::log(1 / 0.4) / (std::log(1.8) + std::log(1 / 0.4));
  const auto cal = calibrate_critical(fixtures::env_hi(), fixtures::env_lo(), 1e-3, 1000, 400, 1);
  CHECK(std::abs(cal.lyapunov.value) <= 1e-3);
  CHECK(std::abs(cal.weight - exact) <= 0.02);
  CHECK_FALSE(cal.trace.empty());
  // CRN keeps the bisection trace monotone: lower weights never give larger exponents.
  for (const auto& s : cal.trace) CHECK(s.lower <= s.weight);

  const auto scalar = calibrate_critical(fixtures::row_sum_env(2.0), fixtures::row_sum_env(0.5),
                                         1e-3, 1000, 200, 2);
  CHECK(std::abs(scalar.weight - 0.5) <= 0.01);

  CHECK_THROWS_AS(calibrate_critical(env_a(), env_a(), 1e-3, 200, 20, 1), CalibrationError);
}
