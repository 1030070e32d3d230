#include "sibdep/env_model.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace sibdep {

SiblingLaw::SiblingLaw(int group_size, int order, std::vector<Atom> atoms)
    : group_size_(group_size), order_(order), atoms_(std::move(atoms)) {}

double SiblingLaw::total_weight() const {
  double total = 0.0;
  for (const Atom& a : atoms_) total += a.weight;
  return total;
}

std::uint64_t SiblingLaw::orbit_size(std::span<const int> tuple) {
  std::vector<int> sorted(tuple.begin(), tuple.end());
  std::sort(sorted.begin(), sorted.end());
  // Multinomial coefficient built up one position at a time; stays integral.
  std::uint64_t orbit = 1;
  std::uint64_t run = 0;
  for (std::size_t p = 0; p < sorted.size(); ++p) {
    run = (p > 0 && sorted[p] == sorted[p - 1]) ? run + 1 : 1;
    orbit = orbit * (p + 1) / run;
  }
  return orbit;
}

double SiblingLaw::ordered_mass(std::span<const int> ordered) const {
  if (static_cast<int>(ordered.size()) != group_size_) return 0.0;
  std::vector<int> key(ordered.begin(), ordered.end());
  std::sort(key.begin(), key.end());
  double mass = 0.0;
  for (const Atom& a : atoms_)
    if (a.children == key) mass += a.weight;
  return mass / static_cast<double>(orbit_size(key));
}

std::vector<std::pair<ChildTuple, double>> SiblingLaw::ordered_expansion() const {
  std::vector<std::pair<ChildTuple, double>> out;
  for (const Atom& a : atoms_) {
    if (a.weight <= 0.0) continue;
    ChildTuple perm = a.children;
    std::sort(perm.begin(), perm.end());
    const double share = a.weight / static_cast<double>(orbit_size(perm));
    do {
      out.emplace_back(perm, share);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return out;
}

void SiblingLaw::scale_weights(double factor) {
  for (Atom& a : atoms_) a.weight *= factor;
}

ValidationReport validate_sibling_law(const SiblingLaw& law) {
  ValidationReport report;
  const int i = law.group_size();
  const int n = law.order();
  if (i < 1 || i > n) {
    report.issues.push_back("group size " + std::to_string(i) +
                            " outside 1.." + std::to_string(n));
  }
  for (std::size_t a = 0; a < law.atoms().size(); ++a) {
    const Atom& atom = law.atoms()[a];
    const std::string where = "atom " + std::to_string(a);
    if (static_cast<int>(atom.children.size()) != i) {
      ++report.wrong_length_tuples;
      report.issues.push_back(where + ": tuple length " +
                              std::to_string(atom.children.size()) +
                              " != group size " + std::to_string(i));
    }
    for (std::size_t p = 0; p < atom.children.size(); ++p) {
      const int k = atom.children[p];
      if (k < 0 || k > n) {
        ++report.out_of_range_entries;
        report.issues.push_back(where + ", position " + std::to_string(p) +
                                ": child count " + std::to_string(k) +
                                " outside 0.." + std::to_string(n));
      }
    }
    if (!std::is_sorted(atom.children.begin(), atom.children.end())) {
      ++report.non_canonical_tuples;
      report.issues.push_back(where + ": tuple is not non-decreasing");
    }
    if (!(atom.weight >= 0.0)) {
      ++report.negative_weights;
      report.issues.push_back(where + ": negative weight");
    }
  }
  report.normalization_defect = std::abs(law.total_weight() - 1.0);
  if (report.normalization_defect > kProbabilityTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "weights sum to " << law.total_weight() << " (defect "
        << report.normalization_defect << ")";
    report.issues.push_back(msg.str());
  }
  report.accepted = report.issues.empty();
  return report;
}

Environment::Environment(std::vector<SiblingLaw> laws)
    : order_(static_cast<int>(laws.size())), laws_(std::move(laws)) {
  if (order_ < 1) throw InvalidLawError("environment needs at least one law");
  const int n = order_;
  for (int i = 1; i <= n; ++i) {
    SiblingLaw& law = laws_[static_cast<std::size_t>(i - 1)];
    if (law.group_size() != i || law.order() != n) {
      throw InvalidLawError("law " + std::to_string(i - 1) + " has group size " +
                            std::to_string(law.group_size()) + " and order " +
                            std::to_string(law.order()) + ", expected " +
                            std::to_string(i) + " and " + std::to_string(n));
    }
    const ValidationReport report = validate_sibling_law(law);
    if (!report.accepted) {
      throw InvalidLawError("law for group size " + std::to_string(i) + ": " +
                            report.issues.front());
    }
    law.scale_weights(1.0 / law.total_weight());
  }

  marginals_ = Eigen::MatrixXd::Zero(n, n + 1);
  pair_marginals_.assign(static_cast<std::size_t>(std::max(0, n - 1)),
                         Eigen::MatrixXd::Zero(n + 1, n + 1));
  compiled_.resize(static_cast<std::size_t>(n));
  cumulative_.resize(static_cast<std::size_t>(n));

  for (int i = 1; i <= n; ++i) {
    const SiblingLaw& law = laws_[static_cast<std::size_t>(i - 1)];
    auto& compiled = compiled_[static_cast<std::size_t>(i - 1)];
    auto& cumulative = cumulative_[static_cast<std::size_t>(i - 1)];
    double running = 0.0;
    for (const Atom& atom : law.atoms()) {
      std::vector<double> mult(static_cast<std::size_t>(n + 1), 0.0);
      for (int k : atom.children) mult[static_cast<std::size_t>(k)] += 1.0;

      for (int j = 0; j <= n; ++j)
        marginals_(i - 1, j) += atom.weight * mult[static_cast<std::size_t>(j)] / i;
      if (i >= 2) {
        const double pairs = static_cast<double>(i) * (i - 1);
        Eigen::MatrixXd& pm = pair_marginals_[static_cast<std::size_t>(i - 2)];
        for (int j = 0; j <= n; ++j) {
          for (int k = 0; k <= n; ++k) {
            const double cj = mult[static_cast<std::size_t>(j)];
            const double ck = mult[static_cast<std::size_t>(k)];
            const double ordered_pairs = j == k ? cj * (cj - 1.0) : cj * ck;
            pm(j, k) += atom.weight * ordered_pairs / pairs;
          }
        }
      }

      CompiledAtom c;
      c.weight = atom.weight;
      c.groups_by_type.assign(static_cast<std::size_t>(n), 0);
      for (int k : atom.children) {
        c.particles += k;
        if (k >= 1) {
          c.nonempty.push_back(k);
          ++c.groups_by_type[static_cast<std::size_t>(k - 1)];
        }
      }
      compiled.push_back(std::move(c));
      running += atom.weight;
      cumulative.push_back(running);
    }
    // Pin the tail at 1 from the last positive atom on, so rounding can
    // neither leak mass onto trailing zero-weight atoms nor fall short of 1.
    for (std::size_t a = compiled.size(); a-- > 0;) {
      cumulative[a] = 1.0;
      if (compiled[a].weight > 0.0) break;
    }
  }
}

void Environment::check_group_size(int i) const {
  if (i < 1 || i > order_) {
    throw IndexError("group size " + std::to_string(i) + " outside 1.." +
                     std::to_string(order_));
  }
}

const SiblingLaw& Environment::law(int i) const {
  check_group_size(i);
  return laws_[static_cast<std::size_t>(i - 1)];
}

double Environment::marginal(int i, int j) const {
  check_group_size(i);
  if (j < 0 || j > order_) {
    throw IndexError("child count " + std::to_string(j) + " outside 0.." +
                     std::to_string(order_));
  }
  return marginals_(i - 1, j);
}

double Environment::pair_marginal(int i, int j, int k) const {
  check_group_size(i);
  if (i < 2) throw IndexError("pair marginal needs group size >= 2");
  if (j < 0 || j > order_ || k < 0 || k > order_) {
    throw IndexError("child count outside 0.." + std::to_string(order_));
  }
  return pair_marginals_[static_cast<std::size_t>(i - 2)](j, k);
}

EnvironmentEnsemble::EnvironmentEnsemble(std::vector<Environment> environments,
                                         std::vector<double> weights)
    : order_(0), environments_(std::move(environments)),
      weights_(std::move(weights)) {
  if (environments_.empty()) throw InvalidLawError("ensemble has no members");
  if (environments_.size() != weights_.size()) {
    throw InvalidLawError("ensemble has " + std::to_string(environments_.size()) +
                          " members but " + std::to_string(weights_.size()) +
                          " weights");
  }
  order_ = environments_.front().order();
  double total = 0.0;
  for (std::size_t m = 0; m < weights_.size(); ++m) {
    if (environments_[m].order() != order_) {
      throw InvalidLawError("member " + std::to_string(m) + " has order " +
                            std::to_string(environments_[m].order()) +
                            ", expected " + std::to_string(order_));
    }
    if (!(weights_[m] >= 0.0)) {
      throw InvalidLawError("member " + std::to_string(m) + " has negative weight");
    }
    total += weights_[m];
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "ensemble weights sum to " << total << " (defect "
        << std::abs(total - 1.0) << ")";
    throw InvalidLawError(msg.str());
  }
  double running = 0.0;
  for (double& w : weights_) {
    w /= total;
    running += w;
    cumulative_.push_back(running);
  }
  cumulative_.back() = 1.0;
}

EnvironmentEnsemble EnvironmentEnsemble::mixture(const Environment& a,
                                                 const Environment& b, double w) {
  if (!(w >= 0.0 && w <= 1.0)) {
    throw ArgumentError("mixture weight must lie in [0, 1]");
  }
  return EnvironmentEnsemble({a, b}, {w, 1.0 - w});
}

EnvironmentEnsemble EnvironmentEnsemble::single(const Environment& env) {
  return EnvironmentEnsemble({env}, {1.0});
}

std::size_t EnvironmentEnsemble::index_for(double uniform) const {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), uniform);
  const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
  return std::min(idx, cumulative_.size() - 1);
}

double marginal(const Environment& env, int i, int j) { return env.marginal(i, j); }

double pair_marginal(const Environment& env, int i, int j, int k) {
  return env.pair_marginal(i, j, k);
}

Eigen::VectorXd eval_phi(const Environment& env, const Eigen::VectorXd& s) {
  Eigen::VectorXd out(env.order());
  for (int i = 1; i <= env.order(); ++i) out(i - 1) = eval_phi(env, i, s);
  return out;
}

double at_least_one_survives(std::span<const int> kids, const Eigen::VectorXd& t) {
  double log_all_die = 0.0;
  for (int k : kids) log_all_die += std::log1p(-t(k - 1));
  return -std::expm1(log_all_die);
}

Eigen::VectorXd survival_step(const Environment& env, const Eigen::VectorXd& t) {
  Eigen::VectorXd out(env.order());
  for (int i = 1; i <= env.order(); ++i) {
    double total = 0.0;
    for (const CompiledAtom& atom : env.compiled(i)) {
      if (atom.nonempty.empty()) continue;
      total += atom.weight * at_least_one_survives(atom.nonempty, t);
    }
    out(i - 1) = std::clamp(total, 0.0, 1.0);
  }
  return out;
}

std::size_t sample_environment_index(const EnvironmentEnsemble& ens,
                                     RngStream& rng) {
  return ens.index_for(rng.uniform());
}

const Environment& sample_environment(const EnvironmentEnsemble& ens,
                                      RngStream& rng) {
  return ens.member(sample_environment_index(ens, rng));
}

std::vector<std::size_t> sample_environment_sequence(const EnvironmentEnsemble& ens,
                                                     std::size_t length,
                                                     RngStream& rng) {
  std::vector<std::size_t> seq(length);
  for (auto& idx : seq) idx = sample_environment_index(ens, rng);
  return seq;
}

std::size_t sample_atom(const Environment& env, int i, RngStream& rng) {
  const auto& cumulative = env.cumulative(i);
  const double u = rng.uniform();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()),
                  cumulative.size() - 1);
}

ChildTuple sample_offspring_vector(const Environment& env, int i, RngStream& rng) {
  env.check_group_size(i);
  ChildTuple tuple = env.law(i).atoms()[sample_atom(env, i, rng)].children;
  for (std::size_t p = tuple.size(); p > 1; --p) {
    std::swap(tuple[p - 1], tuple[rng.below(p)]);
  }
  return tuple;
}

}  // namespace sibdep
