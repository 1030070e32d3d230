#ifndef SIBDEP_ENV_MODEL_HPP
#define SIBDEP_ENV_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sibdep/error.hpp"
#include "sibdep/rng.hpp"

namespace sibdep {

/// Offspring counts of the members of one sibling group.
using ChildTuple = std::vector<int>;

/// One orbit of a symmetric joint law: a non-decreasing tuple and the total
/// mass of all its coordinate permutations.
struct Atom {
  ChildTuple children;
  double weight = 0.0;
};

/// Joint offspring law P(i; .) of a size-i sibling group, stored on canonical
/// multisets. Exchangeability holds by construction: every ordering of an
/// atom's tuple carries weight / orbit_size.
///
/// Construction does not validate; see validate_sibling_law. An Environment
/// refuses laws that fail validation.
class SiblingLaw {
 public:
  SiblingLaw(int group_size, int order, std::vector<Atom> atoms);

  int group_size() const noexcept { return group_size_; }
  int order() const noexcept { return order_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  double total_weight() const;

  /// Number of distinct orderings of a tuple, i! / prod(multiplicity!).
  static std::uint64_t orbit_size(std::span<const int> tuple);

  /// P(i; (k_1, ..., k_i)) for an ordered tuple.
  double ordered_mass(std::span<const int> ordered) const;

  /// Every ordered tuple with positive mass.
  std::vector<std::pair<ChildTuple, double>> ordered_expansion() const;

 private:
  friend class Environment;
  void scale_weights(double factor);

  int group_size_;
  int order_;
  std::vector<Atom> atoms_;
};

struct ValidationReport {
  bool accepted = true;
  double normalization_defect = 0.0;  ///< |sum of weights - 1|
  int negative_weights = 0;
  int out_of_range_entries = 0;
  int non_canonical_tuples = 0;
  int wrong_length_tuples = 0;
  std::vector<std::string> issues;
};

inline constexpr double kProbabilityTolerance = 1e-12;

ValidationReport validate_sibling_law(const SiblingLaw& law);

/// An atom pre-digested for evaluation and sampling.
struct CompiledAtom {
  double weight = 0.0;
  std::vector<int> nonempty;  ///< children with k >= 1, in tuple order
  std::vector<std::uint32_t> groups_by_type;  ///< index k-1: #children with k
  int particles = 0;  ///< k_1 + ... + k_i
};

/// Environment of order N: one sibling law per group size 1..N, plus the
/// single-child marginals p_ij and pair marginals p_i(jk).
class Environment {
 public:
  /// laws[i-1] must have group size i. Throws InvalidLawError when a law fails
  /// validation; weights are renormalized exactly once.
  explicit Environment(std::vector<SiblingLaw> laws);

  int order() const noexcept { return order_; }
  const SiblingLaw& law(int i) const;

  /// p_ij for 1 <= i <= N, 0 <= j <= N.
  double marginal(int i, int j) const;
  /// p_i(jk) for 2 <= i <= N, 0 <= j, k <= N.
  double pair_marginal(int i, int j, int k) const;

  /// Row i-1 holds (p_i0, ..., p_iN).
  const Eigen::MatrixXd& marginals() const noexcept { return marginals_; }
  const std::vector<CompiledAtom>& compiled(int i) const {
    return compiled_[static_cast<std::size_t>(i - 1)];
  }
  const std::vector<double>& cumulative(int i) const {
    return cumulative_[static_cast<std::size_t>(i - 1)];
  }

  void check_group_size(int i) const;

 private:
  int order_;
  std::vector<SiblingLaw> laws_;
  Eigen::MatrixXd marginals_;
  std::vector<Eigen::MatrixXd> pair_marginals_;  // index i-2
  std::vector<std::vector<CompiledAtom>> compiled_;
  std::vector<std::vector<double>> cumulative_;
};

/// Finite mixture of environments; the law of each generation's environment.
class EnvironmentEnsemble {
 public:
  EnvironmentEnsemble(std::vector<Environment> environments,
                      std::vector<double> weights);

  /// w * a + (1 - w) * b, with `a` as member 0.
  static EnvironmentEnsemble mixture(const Environment& a, const Environment& b,
                                     double w);
  static EnvironmentEnsemble single(const Environment& env);

  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return environments_.size(); }
  const Environment& member(std::size_t m) const { return environments_.at(m); }
  const std::vector<Environment>& members() const noexcept {
    return environments_;
  }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// Member index drawn from one uniform variate, by inversion of the
  /// cumulative weights. A larger weight on member 0 never moves a draw off
  /// member 0, which keeps common-random-number comparisons monotone.
  std::size_t index_for(double uniform) const;

 private:
  int order_;
  std::vector<Environment> environments_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

double marginal(const Environment& env, int i, int j);
double pair_marginal(const Environment& env, int i, int j, int k);

/// Phi_i(s) = sum P(i; k) prod_r s_{k_r} with s_0 = 1. The polynomial is
/// evaluated for any real s, so finite differences may step outside [0,1].
template <typename Derived>
typename Derived::Scalar eval_phi(const Environment& env, int i,
                                  const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  env.check_group_size(i);
  if (s.size() != env.order()) throw IndexError("eval_phi: s has wrong size");
  Scalar total(0);
  for (const CompiledAtom& atom : env.compiled(i)) {
    Scalar term(atom.weight);
    for (int k : atom.nonempty) term *= s(k - 1);
    total += term;
  }
  return total;
}

/// F_i(s) = p_i0 + sum_j p_ij s_j^j.
template <typename Derived>
typename Derived::Scalar eval_f(const Environment& env, int i,
                                const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  env.check_group_size(i);
  if (s.size() != env.order()) throw IndexError("eval_f: s has wrong size");
  Scalar total(env.marginal(i, 0));
  for (int j = 1; j <= env.order(); ++j) {
    Scalar power(1);
    for (int r = 0; r < j; ++r) power *= s(j - 1);
    total += env.marginal(i, j) * power;
  }
  return total;
}

/// Vector form (Phi_1(s), ..., Phi_N(s)).
Eigen::VectorXd eval_phi(const Environment& env, const Eigen::VectorXd& s);

/// One backward step of survival probabilities in complement form:
/// returns 1 - Phi(1 - t) componentwise, accurate when t is tiny.
Eigen::VectorXd survival_step(const Environment& env, const Eigen::VectorXd& t);

/// 1 - prod_{k in kids} (1 - t_k), accurate for small t.
double at_least_one_survives(std::span<const int> kids, const Eigen::VectorXd& t);

std::size_t sample_environment_index(const EnvironmentEnsemble& ens,
                                     RngStream& rng);
const Environment& sample_environment(const EnvironmentEnsemble& ens,
                                      RngStream& rng);

/// Member indices of `length` successive i.i.d. generations, one uniform
/// variate per generation.
std::vector<std::size_t> sample_environment_sequence(const EnvironmentEnsemble& ens,
                                                     std::size_t length,
                                                     RngStream& rng);

/// Index of the atom of P(i; .) picked by one draw.
std::size_t sample_atom(const Environment& env, int i, RngStream& rng);

/// Ordered offspring vector: canonical multiset by weight, then a uniformly
/// random permutation of it.
ChildTuple sample_offspring_vector(const Environment& env, int i, RngStream& rng);

}  // namespace sibdep

#endif  // SIBDEP_ENV_MODEL_HPP
