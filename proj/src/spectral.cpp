#include "sibdep/spectral.hpp"

#include <algorithm>
#include <limits>

#include "sibdep/parallel.hpp"

namespace sibdep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Eigen::MatrixXd> member_matrices(const EnvironmentEnsemble& ens,
                                             bool use_macro) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(ens.size());
  for (const Environment& env : ens.members())
    out.push_back(use_macro ? macro_moments(env).mean : mean_matrix(env));
  return out;
}

void require_replicas(std::size_t replicas) {
  if (replicas < 2) throw ArgumentError("replicas >= 2 required");
}

void require_horizon(std::size_t n) {
  if (n < 1) throw ArgumentError("horizon n >= 1 required");
}

}  // namespace

ProductResult product_lognorm(std::span<const Eigen::MatrixXd> factors) {
  if (factors.empty()) throw ArgumentError("product_lognorm: empty sequence");
  ProductResult out{0.0, ProductAccumulator<double>(factors.front().rows())};
  for (const auto& f : factors) out.accumulator.push(f);
  out.log_norm = out.accumulator.log_norm();
  return out;
}

ProductResult product_lognorm(std::span<const Environment> envs, bool use_macro) {
  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(envs.size());
  for (const Environment& env : envs)
    factors.push_back(use_macro ? macro_moments(env).mean : mean_matrix(env));
  return product_lognorm(factors);
}

std::vector<double> sample_log_norms(const EnvironmentEnsemble& ens, std::size_t n,
                                     std::size_t replicas, std::uint64_t seed,
                                     bool use_macro) {
  const auto mats = member_matrices(ens, use_macro);
  std::vector<double> out(replicas);
  parallel_for(replicas, [&](std::size_t r) {
    RngStream rng(seed, r);
    ProductAccumulator<double> acc(ens.order());
    for (std::size_t m = 0; m <= n; ++m) acc.push(mats[sample_environment_index(ens, rng)]);
    out[r] = acc.log_norm();
  });
  return out;
}

Estimate estimate_lyapunov(const EnvironmentEnsemble& ens, std::size_t n,
                           std::size_t replicas, std::uint64_t seed, bool use_macro) {
  require_horizon(n);
  require_replicas(replicas);
  std::vector<double> rates = sample_log_norms(ens, n, replicas, seed, use_macro);
  for (double& x : rates) x /= static_cast<double>(n);
  return mean_stderr(rates);
}

LambdaEstimate lambda_from_log_norms(std::span<const double> log_norms, double theta,
                                     std::size_t n) {
  require_replicas(log_norms.size());
  std::vector<double> scaled(log_norms.size());
  for (std::size_t r = 0; r < scaled.size(); ++r) scaled[r] = theta * log_norms[r];
  const double top = *std::max_element(scaled.begin(), scaled.end());
  std::vector<double> shifted(scaled.size());
  for (std::size_t r = 0; r < scaled.size(); ++r) shifted[r] = std::exp(scaled[r] - top);
  const Estimate w = mean_stderr(shifted);

  LambdaEstimate out;
  out.theta = theta;
  out.log_lambda = log_mean_exp(scaled) / static_cast<double>(n);
  out.lambda = std::exp(out.log_lambda);
  out.log_lambda_stderr = w.std_error / w.value / static_cast<double>(n);
  return out;
}

LambdaEstimate estimate_lambda_theta(const EnvironmentEnsemble& ens, double theta,
                                     std::size_t n, std::size_t replicas,
                                     std::uint64_t seed) {
  require_horizon(n);
  require_replicas(replicas);
  if (!(theta > 0.0)) throw ArgumentError("theta must be positive");
  const auto log_norms = sample_log_norms(ens, n, replicas, seed);
  return lambda_from_log_norms(log_norms, theta, n);
}

Estimate lambda_prime_at_one(const EnvironmentEnsemble& ens, double h, std::size_t n,
                             std::size_t replicas, std::uint64_t seed) {
  require_horizon(n);
  require_replicas(replicas);
  if (!(h > 0.0 && h <= 0.5)) throw ArgumentError("h must lie in (0, 0.5]");
  const auto log_norms = sample_log_norms(ens, n, replicas, seed);
  const auto up = lambda_from_log_norms(log_norms, 1.0 + h, n);
  const auto down = lambda_from_log_norms(log_norms, 1.0 - h, n);

  // Delta method: replica r perturbs log mean(w_theta) by w_theta,r / mean - 1.
  auto relative_weights = [&](double theta) {
    std::vector<double> w(log_norms.size());
    double top = -kInf;
    for (double l : log_norms) top = std::max(top, theta * l);
    double total = 0.0;
    for (std::size_t r = 0; r < w.size(); ++r) {
      w[r] = std::exp(theta * log_norms[r] - top);
      total += w[r];
    }
    const double mean = total / static_cast<double>(w.size());
    for (double& x : w) x /= mean;
    return w;
  };
  const auto wu = relative_weights(1.0 + h);
  const auto wd = relative_weights(1.0 - h);
  std::vector<double> influence(log_norms.size());
  for (std::size_t r = 0; r < influence.size(); ++r)
    influence[r] = (wu[r] - wd[r]) / (2.0 * h * static_cast<double>(n));
  const Estimate spread = mean_stderr(influence);

  return {(up.log_lambda - down.log_lambda) / (2.0 * h), spread.std_error};
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::fails: return "fails";
    case Verdict::undecidable: return "undecidable";
  }
  return "undecidable";
}

const ConditionEntry& ConditionReport::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw IndexError("no condition named " + name);
}

RowSumReduction row_sum_reduction(const EnvironmentEnsemble& ens) {
  RowSumReduction out;
  const int n = ens.order();
  Eigen::VectorXd inverse = Eigen::VectorXd::Zero(n);
  for (std::size_t m = 0; m < ens.size(); ++m) {
    const Eigen::VectorXd rows = mean_matrix(ens.member(m)).rowwise().sum();
    out.min_row_sums.push_back(rows.minCoeff());
    const double w = ens.weights()[m];
    for (int i = 0; i < n; ++i) {
      if (w == 0.0) continue;
      inverse(i) += rows(i) > 0.0 ? w / rows(i) : kInf;
    }
  }
  out.best_min_row_sum = *std::max_element(out.min_row_sums.begin(), out.min_row_sums.end());
  out.inverse_moment = inverse.maxCoeff();
  return out;
}

ConditionReport check_conditions(const EnvironmentEnsemble& ens,
                                 const ConditionParams& params) {
  ConditionReport report;
  const auto mats = member_matrices(ens, false);
  const auto& w = ens.weights();
  const std::size_t members = ens.size();
  auto add = [&](std::string name, Verdict v, std::map<std::string, double> witness,
                 std::string note = {}) {
    report.entries.push_back({std::move(name), v, std::move(witness), std::move(note)});
  };

  {
    double moment = 0.0;
    for (std::size_t m = 0; m < members; ++m)
      moment += w[m] * std::pow(l1_norm(mats[m]), params.theta);
    add("H1", Verdict::holds, {{"theta", params.theta}, {"moment", moment}},
        "finite support: every moment is finite");
  }

  std::size_t positive = 0;
  double gamma = 1.0;
  for (const auto& mat : mats) {
    if ((mat.array() > 0.0).all()) {
      ++positive;
      gamma = std::max(gamma, mat.maxCoeff() / mat.minCoeff());
    } else {
      gamma = kInf;
    }
  }
  add("H2", positive == members ? Verdict::holds : Verdict::undecidable,
      {{"positive_members", static_cast<double>(positive)},
       {"members", static_cast<double>(members)}},
      "sufficient condition only: all support matrices strictly positive");
  add("H3", positive == members ? Verdict::holds : Verdict::fails, {{"gamma", gamma}});

  {
    const Estimate lam = estimate_lyapunov(ens, params.horizon, params.replicas, params.seed);
    const bool zero = std::abs(lam.value) <= 3.0 * lam.std_error;
    add("H4", zero ? Verdict::holds : Verdict::fails,
        {{"lyapunov", lam.value},
         {"stderr", lam.std_error},
         {"ci_low", lam.value - 3.0 * lam.std_error},
         {"ci_high", lam.value + 3.0 * lam.std_error},
         {"horizon", static_cast<double>(params.horizon)}});
  }

  const RowSumReduction rows = row_sum_reduction(ens);
  {
    const double sup_delta =
        rows.best_min_row_sum > 0.0 ? std::log(rows.best_min_row_sum) : -kInf;
    add("H5", sup_delta >= params.delta && params.delta > 0.0 ? Verdict::holds : Verdict::fails,
        {{"min_row_sum", rows.best_min_row_sum},
         {"sup_delta", sup_delta},
         {"delta", params.delta}});
  }
  add("ExponFinite", std::isfinite(rows.inverse_moment) ? Verdict::holds : Verdict::fails,
      {{"value", rows.inverse_moment}});

  {
    double second = 0.0;
    double h6 = 0.0;
    for (std::size_t m = 0; m < members; ++m) {
      if (w[m] == 0.0) continue;
      const double norm = l1_norm(mats[m]);
      if (!(norm > 0.0)) {
        second = kInf;
        h6 = kInf;
        continue;
      }
      const Curvature c = curvature_stats(ens.member(m));
      second += w[m] * std::pow(c.ratio, 1.0 + params.epsilon);
      h6 += c.ratio > 0.0
                ? w[m] * std::pow(std::abs(std::log(c.ratio)), 1.0 + params.epsilon) * norm
                : kInf;
    }
    add("SecondFinite", std::isfinite(second) ? Verdict::holds : Verdict::fails,
        {{"value", second}, {"epsilon", params.epsilon}});
    add("H6", std::isfinite(h6) ? Verdict::holds : Verdict::fails,
        {{"value", h6}, {"epsilon", params.epsilon}},
        "a member with T = 0 makes |log T| diverge");
  }

  std::vector<PerronResult<double>> perrons;
  bool perron_ok = true;
  for (const auto& mat : mats) {
    try {
      perrons.push_back(perron(mat));
    } catch (const Error&) {
      perron_ok = false;
      break;
    }
  }

  if (perron_ok) {
    const Eigen::VectorXd& u0 = perrons.front().vector;
    double residual = 0.0;
    for (std::size_t m = 0; m < members; ++m)
      residual = std::max(residual,
                          (mats[m] * u0 - perrons[m].root * u0).cwiseAbs().maxCoeff());
    const bool positive_u = (u0.array() > 0.0).all() && positive == members;
    add("A1", residual <= params.tol && positive_u ? Verdict::holds : Verdict::fails,
        {{"residual", residual}, {"tol", params.tol}});
  } else {
    add("A1", Verdict::fails, {}, "Perron computation failed for a member");
  }

  {
    double worst = 0.0;
    for (const Environment& env : ens.members())
      for (int i = 1; i <= env.order(); ++i)
        worst = std::max(worst, env.marginal(i, 0) + env.marginal(i, 1));
    add("A2", worst < 1.0 ? Verdict::holds : Verdict::fails, {{"max_p0_plus_p1", worst}});
  }

  if (perron_ok) {
    double mean = 0.0, second = 0.0;
    for (std::size_t m = 0; m < members; ++m) {
      const double x = std::log(perrons[m].root);
      mean += w[m] * x;
      second += w[m] * x * x;
    }
    const double variance = std::max(0.0, second - mean * mean);
    const bool regime = std::abs(mean) <= params.a3_tol && variance > 0.0;
    add("A3", regime ? Verdict::holds : Verdict::fails,
        {{"mean_log_rho", mean}, {"var_log_rho", variance}, {"alpha", 2.0}},
        regime ? "holds (alpha=2 regime): bounded log rho, zero mean, positive variance"
               : "requires E log rho = 0 and Var log rho > 0");

    double moment = 0.0, delta = 0.0;
    for (std::size_t m = 0; m < members; ++m) {
      const double d = delta_max(ens.member(m));
      delta = std::max(delta, d);
      const double x = std::log(d / (perrons[m].root * perrons[m].root));
      moment += w[m] * std::pow(std::max(0.0, x), params.alpha + params.epsilon);
    }
    add("A4", std::isfinite(moment) ? Verdict::holds : Verdict::fails,
        {{"delta_max", delta}, {"moment", moment}, {"alpha", params.alpha}});
  } else {
    add("A3", Verdict::undecidable, {}, "Perron computation failed for a member");
    add("A4", Verdict::undecidable, {}, "Perron computation failed for a member");
  }

  {
    const Estimate d = lambda_prime_at_one(ens, params.h, params.horizon, params.replicas,
                                           params.seed);
    Verdict v = Verdict::undecidable;
    if (d.value + 3.0 * d.std_error < 0.0) v = Verdict::holds;
    if (d.value - 3.0 * d.std_error > 0.0) v = Verdict::fails;
    add("LambdaPrime1", v,
        {{"value", d.value}, {"stderr", d.std_error}, {"h", params.h}},
        "holds means Lambda'(1) < 0 with the 3-sigma interval excluding 0");
  }
  return report;
}

nlohmann::json to_json(const ConditionReport& report) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& e : report.entries) {
    nlohmann::json witness = nlohmann::json::object();
    for (const auto& [k, v] : e.witness) witness[k] = v;
    out[e.name] = {{"verdict", to_string(e.verdict)}, {"witness", witness}};
    if (!e.note.empty()) out[e.name]["note"] = e.note;
  }
  return out;
}

Calibration calibrate_critical(const Environment& env_super, const Environment& env_sub,
                               double tol, std::size_t n, std::size_t replicas,
                               std::uint64_t seed) {
  if (!(tol > 0.0)) throw ArgumentError("calibration tolerance must be positive");
  const Estimate top =
      estimate_lyapunov(EnvironmentEnsemble::single(env_super), n, replicas, seed);
  const Estimate bottom =
      estimate_lyapunov(EnvironmentEnsemble::single(env_sub), n, replicas, seed);
  if (!(top.value > 0.0 && bottom.value < 0.0)) {
    throw CalibrationError("endpoint exponents must straddle zero: super " +
                           std::to_string(top.value) + ", sub " +
                           std::to_string(bottom.value));
  }
  Calibration out;
  double lo = 0.0, hi = 1.0;
  for (int it = 1; it <= 200; ++it) {
    const double w = 0.5 * (lo + hi);
    const Estimate lam = estimate_lyapunov(EnvironmentEnsemble::mixture(env_super, env_sub, w),
                                           n, replicas, seed);
    out.trace.push_back({it, lo, hi, w, lam});
    if (std::abs(lam.value) <= tol) {
      out.weight = w;
      out.lyapunov = lam;
      return out;
    }
    (lam.value > 0.0 ? hi : lo) = w;
    if (hi - lo < 1e-15) break;
  }
  throw CalibrationError("bisection interval collapsed before |Lambda| <= tol");
}

}  // namespace sibdep
