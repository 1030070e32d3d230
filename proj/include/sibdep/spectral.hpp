#ifndef SIBDEP_SPECTRAL_HPP
#define SIBDEP_SPECTRAL_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "sibdep/env_model.hpp"
#include "sibdep/moments.hpp"
#include "sibdep/stats.hpp"

namespace sibdep {

/// Running right product M^(0) M^(1) ... kept as a unit-norm matrix and the
/// log of the norms divided out. exp(log_scale()) * current() is the product.
template <typename Scalar>
class ProductAccumulator {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ProductAccumulator(Eigen::Index n)
      : current_(Matrix::Identity(n, n)), log_scale_(0) {}

  /// Right-multiplies by `factor` and renormalizes to |current| = 1.
  template <typename Derived>
  void push(const Eigen::MatrixBase<Derived>& factor) {
    using std::log;
    current_ = (current_ * factor).eval();
    const Scalar norm = l1_norm(current_);
    if (!(norm > Scalar(0))) {
      throw DegenerateError("product of mean matrices vanished after " +
                            std::to_string(factors_ + 1) + " factors");
    }
    current_ /= norm;
    log_scale_ += log(norm);
    ++factors_;
  }

  const Matrix& current() const noexcept { return current_; }
  Scalar log_scale() const noexcept { return log_scale_; }
  /// log |R|. Before the first push this is log |I| = log N.
  Scalar log_norm() const {
    using std::log;
    return factors_ == 0 ? log(Scalar(current_.rows())) : log_scale_;
  }
  std::size_t factors() const noexcept { return factors_; }
  Matrix reconstruct() const {
    using std::exp;
    return exp(log_scale_) * current_;
  }

 private:
  Matrix current_;
  Scalar log_scale_;
  std::size_t factors_ = 0;
};

struct ProductResult {
  double log_norm = 0.0;
  ProductAccumulator<double> accumulator{1};
};

/// log |M^(0) ... M^(n)| over the given matrices (identity product when empty).
ProductResult product_lognorm(std::span<const Eigen::MatrixXd> factors);

/// Same over environments; use_macro switches the factors to M_macro.
ProductResult product_lognorm(std::span<const Environment> envs, bool use_macro);

/// log |R^(n)| for each replica r, with R^(n) the product of n+1 i.i.d.
/// factors drawn on RngStream(seed, r). The same (seed, r) pairs produce the
/// same environment sequences in every estimator below.
std::vector<double> sample_log_norms(const EnvironmentEnsemble& ens, std::size_t n,
                                     std::size_t replicas, std::uint64_t seed,
                                     bool use_macro = false);

/// Mean over replicas of (1/n) log |R^(n)|.
Estimate estimate_lyapunov(const EnvironmentEnsemble& ens, std::size_t n,
                           std::size_t replicas, std::uint64_t seed,
                           bool use_macro = false);

struct LambdaEstimate {
  double theta = 1.0;
  double lambda = 0.0;         ///< (mean |R^(n)|^theta)^(1/n)
  double log_lambda = 0.0;     ///< Lambda(theta)
  double log_lambda_stderr = 0.0;
};

LambdaEstimate estimate_lambda_theta(const EnvironmentEnsemble& ens, double theta,
                                     std::size_t n, std::size_t replicas,
                                     std::uint64_t seed);

/// Lambda(theta) from precomputed log norms; the CRN building block.
LambdaEstimate lambda_from_log_norms(std::span<const double> log_norms, double theta,
                                     std::size_t n);

/// Central difference (Lambda(1+h) - Lambda(1-h)) / 2h on common random
/// numbers; the standard error is the delta-method one.
Estimate lambda_prime_at_one(const EnvironmentEnsemble& ens, double h, std::size_t n,
                             std::size_t replicas, std::uint64_t seed);

enum class Verdict { holds, fails, undecidable };
std::string to_string(Verdict v);

struct ConditionEntry {
  std::string name;
  Verdict verdict = Verdict::undecidable;
  std::map<std::string, double> witness;
  std::string note;
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;
  const ConditionEntry& at(const std::string& name) const;
};

struct ConditionParams {
  double theta = 1.0;
  double epsilon = 0.1;
  double delta = 0.01;
  double tol = 1e-10;     ///< A1 eigenvector residual
  double a3_tol = 1e-2;   ///< |E log rho| accepted as zero
  double alpha = 2.0;
  double h = 0.1;         ///< step for Lambda'(1)
  std::size_t horizon = 1000;
  std::size_t replicas = 200;
  std::uint64_t seed = 1;
};

/// For x on the simplex and nonnegative M, |xM| = sum_i x_i r_i with r the
/// row sums, so extrema over the simplex sit at its vertices.
struct RowSumReduction {
  std::vector<double> min_row_sums;  ///< per member
  double best_min_row_sum = 0.0;     ///< max over members; H5 holds iff >= e^delta
  double inverse_moment = 0.0;       ///< sup_x E[1/|xM|] = max_i E[1/r_i]
};

RowSumReduction row_sum_reduction(const EnvironmentEnsemble& ens);

ConditionReport check_conditions(const EnvironmentEnsemble& ens,
                                 const ConditionParams& params);

nlohmann::json to_json(const ConditionReport& report);

struct CalibrationStep {
  int iteration = 0;
  double lower = 0.0;
  double upper = 1.0;
  double weight = 0.0;
  Estimate lyapunov;
};

struct Calibration {
  double weight = 0.0;
  Estimate lyapunov;
  std::vector<CalibrationStep> trace;
};

/// Bisection for the weight w of w * env_super + (1 - w) * env_sub with
/// |Lambda_hat| <= tol, every evaluation on the same random numbers.
/// Throws CalibrationError unless Lambda_hat(super) > 0 > Lambda_hat(sub).
Calibration calibrate_critical(const Environment& env_super, const Environment& env_sub,
                               double tol, std::size_t n, std::size_t replicas,
                               std::uint64_t seed);

}  // namespace sibdep

#endif  // SIBDEP_SPECTRAL_HPP
