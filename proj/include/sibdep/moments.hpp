#ifndef SIBDEP_MOMENTS_HPP
#define SIBDEP_MOMENTS_HPP

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "sibdep/env_model.hpp"

namespace sibdep {

/// M(i,j) = j * p_ij, i,j = 1..N.
Eigen::MatrixXd mean_matrix(const Environment& env);

/// B_i = diag(k (k-1) p_ik), one per group size.
std::vector<Eigen::MatrixXd> hessians(const Environment& env);

/// Entrywise l1 norm, the |m| used throughout.
template <typename Derived>
typename Derived::Scalar l1_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseAbs().sum();
}

struct Curvature {
  double total = 0.0;   ///< sum_i |B_i|
  double ratio = 0.0;   ///< total / |M|^2
};

/// Throws DegenerateError when |M| = 0.
Curvature curvature_stats(const Environment& env);

struct MacroMoments {
  Eigen::MatrixXd mean;                  ///< i * p_ij
  std::vector<Eigen::MatrixXd> hessians;  ///< i (i-1) p_i(jk), j,k = 1..N
};

MacroMoments macro_moments(const Environment& env);

template <typename Scalar>
struct PerronResult {
  Scalar root{0};
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vector;  ///< >= 0, sums to 1
  Scalar residual{0};                               ///< |M u - root u|_inf
  int iterations = 0;
  bool primitive = true;  ///< false: reducible or periodic support, see perron()
};

namespace detail {

/// Wielandt bound: a nonnegative N x N matrix is primitive iff its pattern
/// raised to (N-1)^2 + 1 is strictly positive.
template <typename Derived>
bool is_primitive(const Eigen::MatrixBase<Derived>& m) {
  const Eigen::Index n = m.rows();
  using Pattern = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  const Pattern base = (m.array() > 0).template cast<int>().matrix();
  Pattern power = base;
  const Eigen::Index steps = (n - 1) * (n - 1);
  for (Eigen::Index s = 0; s < steps; ++s) {
    power = ((power * base).array() > 0).template cast<int>().matrix();
  }
  return (power.array() > 0).all();
}

/// A nonnegative matrix is nilpotent iff its support graph has no cycle,
/// i.e. its pattern raised to N vanishes.
template <typename Derived>
bool is_nilpotent(const Eigen::MatrixBase<Derived>& m) {
  using Pattern = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  const Pattern base = (m.array() > 0).template cast<int>().matrix();
  Pattern power = base;
  for (Eigen::Index s = 1; s < m.rows(); ++s) {
    power = ((power * base).array() > 0).template cast<int>().matrix();
  }
  return (power.array() == 0).all();
}

}  // namespace detail

/// Perron root and l1-normalized right eigenvector of a nonnegative square
/// matrix by power iteration with l1 renormalization.
///
/// Iteration stops once the successive ratio changes by at most tol (relative)
/// and the eigen-residual is at most tol * max(1, root). When the support is
/// not primitive the iteration runs on M + cI (same eigenvector, root shifted
/// by c) and the result carries primitive = false as a warning; for the
/// identity this yields the uniform vector.
///
/// Non-primitive supports can carry a Jordan block at the root, where power
/// iteration converges only algebraically; those fall back to a dense
/// eigendecomposition once max_iterations is spent.
///
/// Throws ArgumentError for negative entries, DegenerateError for a nilpotent
/// matrix (root 0), NumericError with the last residual when a primitive
/// matrix has not converged after max_iterations.
template <typename Derived>
PerronResult<typename Derived::Scalar> perron(
    const Eigen::MatrixBase<Derived>& m,
    typename Derived::Scalar tol = typename Derived::Scalar(1e-12),
    int max_iterations = 100000) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using std::abs;
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ArgumentError("perron: matrix must be square and nonempty");
  }
  if ((m.array() < Scalar(0)).any()) {
    throw ArgumentError("perron: matrix has negative entries");
  }
  const Eigen::Index n = m.rows();
  if (detail::is_nilpotent(m)) throw DegenerateError("perron: matrix is nilpotent");
  PerronResult<Scalar> out;
  out.primitive = detail::is_primitive(m);
  const Scalar shift = out.primitive ? Scalar(0) : m.rowwise().sum().maxCoeff();
  const Matrix a = m + shift * Matrix::Identity(n, n);

  Vector x = Vector::Constant(n, Scalar(1) / Scalar(n));
  Scalar previous(-1);
  for (int it = 1; it <= max_iterations; ++it) {
    Vector y = a * x;
    const Scalar ratio = y.sum();
    if (!(ratio > Scalar(0))) {
      throw DegenerateError("perron: matrix annihilates the iterate");
    }
    y /= ratio;
    const Scalar root = ratio - shift;
    const Scalar residual = (m * y - root * y).cwiseAbs().maxCoeff();
    x = std::move(y);
    out.iterations = it;
    out.residual = residual;
    using std::max;
    if (abs(ratio - previous) <= tol * ratio &&
        residual <= tol * max(Scalar(1), root)) {
      out.root = root;
      out.vector = x;
      return out;
    }
    previous = ratio;
  }
  if (!out.primitive) {
    Eigen::EigenSolver<Matrix> es(m.eval());
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < n; ++k)
      if (es.eigenvalues()(k).real() > es.eigenvalues()(best).real()) best = k;
    Vector v = es.eigenvectors().col(best).real();
    if (v.sum() < Scalar(0)) v = -v;
    v = v.cwiseMax(Scalar(0));
    if (v.sum() > Scalar(0)) {
      out.root = es.eigenvalues()(best).real();
      out.vector = v / v.sum();
      out.residual = (m * out.vector - out.root * out.vector).cwiseAbs().maxCoeff();
      return out;
    }
  }
  throw NumericError("perron: no convergence after " +
                         std::to_string(max_iterations) + " iterations",
                     static_cast<double>(out.residual));
}

/// U_j = j u_j / sum_k k u_k, the eigenvector of the macro mean matrix paired
/// with the right Perron vector u of M.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> macro_eigenvector(
    const Eigen::MatrixBase<Derived>& u) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Vector sizes = Vector::LinSpaced(u.size(), Scalar(1), Scalar(u.size()));
  const Vector weighted = sizes.cwiseProduct(u.derived());
  return weighted / weighted.sum();
}

/// Var(eta_ij): variance of the number of type-j groups begotten by a type-i
/// group, i(i-1) p_i(jj) + i p_ij - (i p_ij)^2.
double eta_variance(const Environment& env, int i, int j);
double delta_max(const Environment& env);

/// Everything the CLI `moments` command reports for one environment.
struct MomentSet {
  Eigen::MatrixXd mean;
  std::vector<Eigen::MatrixXd> hessians;
  MacroMoments macro;
  Curvature curvature;
  PerronResult<double> perron;
  Eigen::VectorXd macro_vector;
  double macro_residual = 0.0;
  double delta = 0.0;
};

MomentSet compute_moments(const Environment& env);

/// sum_m w_m M_m
Eigen::MatrixXd ensemble_mean_matrix(const EnvironmentEnsemble& ens);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const MomentSet& moments);

}  // namespace sibdep

#endif  // SIBDEP_MOMENTS_HPP
