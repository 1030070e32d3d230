#ifndef SIBDEP_TESTS_FIXTURES_HPP
#define SIBDEP_TESTS_FIXTURES_HPP

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sibdep/env_model.hpp"

namespace fixtures {

using sibdep::Atom;
using sibdep::Environment;
using sibdep::EnvironmentEnsemble;
using sibdep::SiblingLaw;

inline SiblingLaw law(int group_size, int order,
                      std::vector<std::pair<std::vector<int>, double>> atoms) {
  std::vector<Atom> out;
  for (auto& [tuple, w] : atoms) out.push_back({tuple, w});
  return SiblingLaw(group_size, order, std::move(out));
}

inline Environment env_a() {
  return Environment({law(1, 2, {{{0}, 0.2}, {{1}, 0.3}, {{2}, 0.5}}),
                      law(2, 2, {{{0, 0}, 0.10}, {{0, 1}, 0.30}, {{0, 2}, 0.10},
                                 {{1, 1}, 0.20}, {{1, 2}, 0.20}, {{2, 2}, 0.10}})});
}

inline Environment env_b() {
  return Environment({law(1, 2, {{{0}, 0.5}, {{1}, 0.3}, {{2}, 0.2}}),
                      law(2, 2, {{{0, 0}, 0.30}, {{0, 1}, 0.35}, {{0, 2}, 0.10},
                                 {{1, 1}, 0.10}, {{1, 2}, 0.10}, {{2, 2}, 0.05}})});
}

inline Environment env_c() {
  return Environment({law(1, 2, {{{0}, 0.55}, {{1}, 0.35}, {{2}, 0.10}}),
                      law(2, 2, {{{0, 0}, 0.35}, {{0, 1}, 0.30}, {{0, 2}, 0.15},
                                 {{1, 1}, 0.10}, {{1, 2}, 0.05}, {{2, 2}, 0.05}})});
}

/// Row sums 1.8; Perron vector (1/2, 1/2).
inline Environment env_hi() {
  return Environment({law(1, 2, {{{0}, 0.05}, {{1}, 0.10}, {{2}, 0.85}}),
                      law(2, 2, {{{0, 0}, 0.04}, {{0, 2}, 0.08}, {{1, 1}, 0.02},
                                 {{1, 2}, 0.04}, {{2, 2}, 0.82}})});
}

/// Row sums 0.4; Perron vector (1/2, 1/2).
inline Environment env_lo() {
  return Environment({law(1, 2, {{{0}, 0.7}, {{1}, 0.2}, {{2}, 0.1}}),
                      law(2, 2, {{{0, 0}, 0.5}, {{0, 1}, 0.2}, {{0, 2}, 0.1},
                                 {{1, 1}, 0.2}})});
}

/// One particle, one child, forever.
inline Environment line() { return Environment({law(1, 1, {{{1}, 1.0}})}); }

/// Environment with mean matrix [[0, r], [0, r]] for r in (0, 2]: every
/// product has constant row sums, so |R| = 2 * prod r exactly.
inline Environment row_sum_env(double r) {
  return Environment({law(1, 2, {{{0}, 1.0 - r / 2.0}, {{2}, r / 2.0}}),
                      law(2, 2, {{{0, 0}, 1.0 - r / 2.0}, {{2, 2}, r / 2.0}})});
}

/// Single-member ensemble.
inline EnvironmentEnsemble single(const Environment& e) {
  return EnvironmentEnsemble::single(e);
}

inline void canonical_tuples(int length, int order, int low, std::vector<int>& prefix,
                             std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == length) {
    out.push_back(prefix);
    return;
  }
  for (int k = low; k <= order; ++k) {
    prefix.push_back(k);
    canonical_tuples(length, order, k, prefix, out);
    prefix.pop_back();
  }
}

/// Every non-decreasing tuple of the given length over 0..order.
inline std::vector<std::vector<int>> all_canonical(int length, int order) {
  std::vector<std::vector<int>> out;
  std::vector<int> prefix;
  canonical_tuples(length, order, 0, prefix, out);
  return out;
}

/// Random environment of order N. With `dense`, every canonical tuple gets
/// positive weight (strictly positive mean matrix); otherwise about half the
/// atoms are dropped.
inline Environment random_environment(std::mt19937_64& gen, int order, bool dense = true) {
  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution keep(0.5);
  std::vector<SiblingLaw> laws;
  for (int i = 1; i <= order; ++i) {
    std::vector<Atom> atoms;
    double total = 0.0;
    for (auto& t : all_canonical(i, order)) {
      if (!dense && !keep(gen)) continue;
      const double w = expo(gen);
      atoms.push_back({t, w});
      total += w;
    }
    if (atoms.empty()) {
      atoms.push_back({std::vector<int>(static_cast<std::size_t>(i), 0), 1.0});
      total = 1.0;
    }
    for (auto& a : atoms) a.weight /= total;
    // Fold the rounding residue into the first atom so the sum is 1 to 1 ulp.
    double sum = 0.0;
    for (auto& a : atoms) sum += a.weight;
    atoms.front().weight += 1.0 - sum;
    laws.emplace_back(i, order, std::move(atoms));
  }
  return Environment(std::move(laws));
}

}  // namespace fixtures

#endif  // SIBDEP_TESTS_FIXTURES_HPP
