#ifndef SIBDEP_SIMULATOR_HPP
#define SIBDEP_SIMULATOR_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sibdep/env_model.hpp"
#include "sibdep/stats.hpp"

namespace sibdep {

/// Sibling-group counts (Z_1, ..., Z_N) of one generation.
struct MacroState {
  std::vector<std::uint64_t> counts;
  std::size_t generation = 0;

  /// zeta = sum_k k Z_k
  std::uint64_t particles() const;
  bool extinct() const;
};

inline constexpr std::uint64_t kPopulationCap = 1'000'000'000;

/// A generation exceeded the particle cap; carries the trajectory so far.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, std::vector<MacroState> partial)
      : Error("truncation", what), partial_(std::move(partial)) {}
  const std::vector<MacroState>& partial() const noexcept { return partial_; }

 private:
  std::vector<MacroState> partial_;
};

/// Generations 0..n starting from one sibling group of size i. Every
/// generation draws one environment shared by all of its groups; groups of
/// equal type are aggregated and their offspring drawn multinomially over the
/// atoms of the law. Extinct trajectories are padded with empty states.
std::vector<MacroState> simulate_micro(const EnvironmentEnsemble& ens, int i,
                                       std::size_t n, RngStream& rng,
                                       std::uint64_t cap = kPopulationCap);

struct CoupledTrajectory {
  /// zeta(m) counted as the children begotten in generation m-1, independent
  /// of the group bookkeeping below.
  std::vector<std::uint64_t> micro;
  std::vector<MacroState> macro;
};

CoupledTrajectory simulate_macro_coupled(const EnvironmentEnsemble& ens, int i,
                                         std::size_t n, RngStream& rng,
                                         std::uint64_t cap = kPopulationCap);

/// Survival probabilities to generation n = env_seq.size() for every initial
/// group type, by backward iteration of Phi from the zero vector, carried in
/// complement form t = 1 - s.
Eigen::VectorXd quenched_survival_all(std::span<const Environment> env_seq);

/// P(zeta(n) > 0 | one group of size i) for a fixed environment sequence.
double quenched_survival(std::span<const Environment> env_seq, int i);

enum class SurvivalMethod { quenched_exact, particle_mc };
std::string to_string(SurvivalMethod m);

struct SurvivalEstimate {
  std::size_t horizon = 0;
  int initial_type = 1;
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t replicas = 0;
  SurvivalMethod method = SurvivalMethod::quenched_exact;
};

/// Annealed survival: mean of quenched_survival over sampled environment
/// sequences.
SurvivalEstimate estimate_survival(const EnvironmentEnsemble& ens, int i, std::size_t n,
                                   std::size_t replicas, std::uint64_t seed);

/// Fraction of simulated trajectories alive at generation n.
SurvivalEstimate estimate_survival_particle(const EnvironmentEnsemble& ens, int i,
                                            std::size_t n, std::size_t replicas,
                                            std::uint64_t seed,
                                            std::uint64_t cap = kPopulationCap);

struct ScanRow {
  std::size_t horizon = 0;
  double survival = 0.0;
  double std_error = 0.0;
  double scaled = 0.0;  ///< n^(1/alpha) * survival
};

/// Each replica draws one environment sequence of the largest horizon and
/// uses its prefixes for every horizon, so per-replica values are nested.
std::vector<ScanRow> survival_scaling_scan(const EnvironmentEnsemble& ens, int i,
                                           std::span<const std::size_t> horizons,
                                           std::size_t replicas, double alpha,
                                           std::uint64_t seed);

enum class ConditioningMethod {
  /// Exact sampling of trajectories conditioned on survival (h-transform
  /// built from quenched survival probabilities), importance-weighted by the
  /// quenched survival of each environment sequence.
  conditioned,
  /// Plain particle simulation keeping the survivors.
  rejection,
};
std::string to_string(ConditioningMethod m);

struct ConditionalLaw {
  std::size_t horizon = 0;
  int initial_type = 1;
  ConditioningMethod method = ConditioningMethod::conditioned;
  std::vector<double> mass;  ///< mass[k] = P(zeta(n) = k | zeta(n) > 0); mass[0] = 0
  std::size_t replicas = 0;
  std::size_t survivors = 0;
  double effective_sample_size = 0.0;
  std::vector<double> pgf_grid;    ///< s values
  std::vector<double> pgf_values;  ///< sum_k mass[k] s^k
};

/// Empirical law of zeta(n) given zeta(n) > 0. Throws InsufficientSampleError
/// with fewer than 100 survivors (rejection) or effective sample size < 100.
ConditionalLaw conditional_size_distribution(
    const EnvironmentEnsemble& ens, int i, std::size_t n, std::size_t replicas,
    std::uint64_t seed, ConditioningMethod method = ConditioningMethod::conditioned,
    std::uint64_t cap = kPopulationCap);

/// One trajectory sampled from the law conditioned on zeta(n) > 0 under the
/// given environment sequence (member indices of `ens`); returns zeta(0..n).
/// The sequence must have positive survival probability.
std::vector<std::uint64_t> sample_conditioned_trajectory(
    const EnvironmentEnsemble& ens, std::span<const std::size_t> seq, int i,
    RngStream& rng, std::uint64_t cap = kPopulationCap);

struct PathRecord {
  std::vector<double> times;   ///< m / n
  std::vector<double> values;  ///< n^(-1/alpha) l(n) log zeta(m)
  bool survived = true;
  bool used_mean_field = false;  ///< population passed the cap at some point
};

struct PathOptions {
  /// l(n); constant 1 by default.
  std::function<double(std::size_t)> normalization = [](std::size_t) { return 1.0; };
  /// Above this many particles a replica follows the mean recursion
  /// Z <- Z M_macro, returning to sampling once it falls back below.
  std::uint64_t cap = kPopulationCap;
};

struct PathSummary {
  std::size_t horizon = 0;
  double alpha = 2.0;
  std::size_t replicas = 0;
  std::vector<PathRecord> records;  ///< survivors only, in replica order
  std::vector<double> endpoints;
  std::vector<double> mean_path;
};

/// Normalized log-population paths of the replicas alive at generation n.
/// Throws InsufficientSampleError when none survive.
PathSummary log_population_path(const EnvironmentEnsemble& ens, int i, std::size_t n,
                                std::size_t replicas, double alpha, std::uint64_t seed,
                                const PathOptions& options = {});

}  // namespace sibdep

#endif  // SIBDEP_SIMULATOR_HPP
